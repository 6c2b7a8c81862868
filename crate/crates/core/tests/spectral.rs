use std::f64::consts::PI;

use revlab::geometry::{effective_potential, EffectivePotential};
use revlab::microlocal::PsiClass;
use revlab::profiles::catalog_profile;
use revlab::spectral::{discretize_mode, eigen_window, mode_eigenpairs, surface_spectrum, Grid, Scheme};

fn pot(name: &str, params: &[f64]) -> EffectivePotential {
    effective_potential(&catalog_profile(name, params).unwrap())
}

fn lowest(p: &EffectivePotential, k: i64, n: usize, scheme: Scheme, count: usize) -> Vec<f64> {
    let op = discretize_mode(p, k, Grid::new(n, 2.0 * PI).unwrap(), scheme);
    eigen_window(&op, f64::NEG_INFINITY, f64::INFINITY).iter().take(count).map(|e| e.value).collect()
}

#[test]
fn nondeg_ground_state_self_converges() {
    let p = pot("nondeg", &[]);
    // Excited states avoid the exact zero mode of the k = 0 operator.
    let a = lowest(&p, 0, 128, Scheme::Spectral, 4);
    let b = lowest(&p, 0, 256, Scheme::Spectral, 4);
    assert!(a[0].abs() < 1e-9, "k = 0 ground state {}", a[0]);
    for (x, y) in a.iter().zip(&b).skip(1) {
        assert!(((x - y) / y).abs() <= 1e-9, "{x} vs {y}");
    }
    let a = lowest(&p, 3, 128, Scheme::Spectral, 1)[0];
    let b = lowest(&p, 3, 256, Scheme::Spectral, 1)[0];
    assert!(((a - b) / b).abs() <= 1e-9);
}

#[test]
fn finite_difference_orders() {
    let p = pot("nondeg", &[]);
    let exact = lowest(&p, 2, 512, Scheme::Spectral, 10);
    for (scheme, order) in [(Scheme::Fd2, 2.0), (Scheme::Fd4, 4.0)] {
        let e1 = lowest(&p, 2, 128, scheme, 10);
        let e2 = lowest(&p, 2, 256, scheme, 10);
        let d1 = e1.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d2 = e2.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rate = (d1 / d2).log2();
        assert!(rate > order - 0.3, "{scheme}: observed order {rate}");
        let dx = 2.0 * PI / 128.0;
        // Symbol error of the stencil is O(κ^{p+2} dx^p).
        let c = d1 / (dx.powf(order) * exact[9].powf(order / 2.0 + 1.0));
        assert!(c < 1.0, "{scheme}: constant {c}");
    }
}

#[test]
fn eigenvectors_are_orthonormal() {
    let p = pot("power-max", &[2.0]);
    let op = discretize_mode(&p, 7, Grid::new(256, 2.0 * PI).unwrap(), Scheme::Spectral);
    let ev = eigen_window(&op, 0.0, 400.0);
    assert!(ev.len() > 20);
    for (i, a) in ev.iter().enumerate() {
        for (j, b) in ev.iter().enumerate() {
            let g: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() <= 1e-10, "gram[{i}][{j}] = {g}");
        }
    }
}

#[test]
fn k_and_minus_k_agree() {
    let p = pot("inflection", &[1.0]);
    let grid = Grid::new(128, 2.0 * PI).unwrap();
    for k in [1i64, 4, 9] {
        let a = mode_eigenpairs(&p, k, 900.0, grid, Scheme::Spectral);
        let b = mode_eigenpairs(&p, -k, 900.0, grid, Scheme::Spectral);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda_sq, y.lambda_sq);
            assert_eq!(x.eta, -y.eta);
        }
    }
}

#[test]
fn weyl_count() {
    let p = pot("nondeg", &[]);
    let lambda_sq = 2000.0f64;
    let grid = Grid::new(256, 2.0 * PI).unwrap();
    let (_, a_max) = p.a_range();
    let k_max = (lambda_sq.sqrt() * a_max).ceil() as u32 + 1;
    let spec = surface_spectrum(&p, k_max, lambda_sq.sqrt(), grid, Scheme::Spectral).unwrap();
    // The dropped zero mode counts too.
    let count = spec.modes.len() as f64 + 1.0;
    let m = 4096;
    let int_a: f64 = (0..m).map(|j| p.curve().a(2.0 * PI * j as f64 / m as f64)).sum::<f64>() * 2.0 * PI / m as f64;
    let area = 2.0 * PI * int_a;
    let weyl = area / (4.0 * PI) * lambda_sq;
    assert!((count - weyl).abs() <= 0.1 * weyl, "count {count} vs Weyl {weyl}");
}

#[test]
fn modes_honor_residual_and_norm() {
    let p = pot("cylinder", &[0.5, 2.0]);
    let grid = Grid::new(256, 2.0 * PI).unwrap();
    let spec = surface_spectrum(&p, 12, 20.0, grid, Scheme::Spectral).unwrap();
    let dx = grid.spacing();
    for m in &spec.modes {
        let norm: f64 = m.phi.iter().map(|v| v * v).sum::<f64>() * dx;
        assert!((norm - 1.0).abs() <= 1e-12);
        assert!(m.residual <= 1e-8 * m.lambda_sq.max(1.0), "residual {} at {}", m.residual, m.lambda_sq);
    }
}

#[test]
fn psi_classes_on_flat_and_nondeg() {
    let grid = Grid::new(128, 2.0 * PI).unwrap();
    let flat = surface_spectrum(&pot("flat", &[]), 15, 15.0, grid, Scheme::Spectral).unwrap();
    assert!(flat.modes.iter().all(|m| m.psi_class != PsiClass::Psi2));
    assert!(flat.modes.iter().filter(|m| m.k == 0).all(|m| m.psi_class == PsiClass::Psi0));

    let p = pot("nondeg", &[]);
    let (a0, a1) = p.a_range();
    let spec = surface_spectrum(&p, 20, 20.0, grid, Scheme::Spectral).unwrap();
    let mid: Vec<_> = spec.modes.iter().filter(|m| m.eta * m.eta > 0.5 * a0 * a0 && m.eta * m.eta < 2.0 * a1 * a1).collect();
    assert!(!mid.is_empty());
    assert!(mid.iter().all(|m| m.psi_class == PsiClass::Psi1));
}
