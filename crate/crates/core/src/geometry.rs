//! Effective potential of the conjugated Laplacian and the moment map.
//!
//! Conjugating by `u ↦ A^{1/2} u` turns `−Δ` into `−∂ₓ² − A⁻²∂_θ² + V1` on
//! `L²(dx dθ)` with
//!
//! ```text
//! V1 = ½ A''/A − ¼ (A'/A)²
//! ```
//!
//! and each angular mode `e^{ikθ}` sees the potential `k² V0 + V1`,
//! `V0 = A⁻²`. In semiclassical form (`h = 1/|k|`) this is
//! `(hD)² + V0 + h² V1`.

use serde::Serialize;

use crate::profiles::{GeneratingCurve, FLOOR_GRID};

#[derive(Debug, Clone)]
pub struct EffectivePotential {
    curve: GeneratingCurve,
    a_range: (f64, f64),
    v0_range: (f64, f64),
}

pub fn effective_potential(curve: &GeneratingCurve) -> EffectivePotential {
    let mut amin = f64::INFINITY;
    let mut amax: f64 = 0.0;
    for j in 0..FLOOR_GRID {
        let a = curve.a(curve.period() * j as f64 / FLOOR_GRID as f64);
        amin = amin.min(a);
        amax = amax.max(a);
    }
    EffectivePotential {
        curve: curve.clone(),
        a_range: (amin, amax),
        v0_range: (amax.powi(-2), amin.powi(-2)),
    }
}

impl EffectivePotential {
    pub fn curve(&self) -> &GeneratingCurve {
        &self.curve
    }

    pub fn period(&self) -> f64 {
        self.curve.period()
    }

    /// `(A₀, A₁) = (min A, max A)`.
    pub fn a_range(&self) -> (f64, f64) {
        self.a_range
    }

    /// `(min V0, max V0) = (A₁⁻², A₀⁻²)`.
    pub fn v0_range(&self) -> (f64, f64) {
        self.v0_range
    }

    pub fn v0(&self, x: f64) -> f64 {
        self.curve.v0(x)
    }

    pub fn dv0(&self, x: f64) -> f64 {
        self.curve.dv0(x)
    }

    pub fn v1(&self, x: f64) -> f64 {
        let [a, da, d2a] = self.curve.a_derivs(x);
        0.5 * d2a / a - 0.25 * (da / a).powi(2)
    }

    /// `V(x) = V0(x) + h² V1(x)`.
    pub fn v_at(&self, h: f64, x: f64) -> f64 {
        self.v0(x) + h * h * self.v1(x)
    }

    /// `(V0, V1)` sampled on the `n`-point grid.
    pub fn sample(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let period = self.period();
        (0..n)
            .map(|j| {
                let x = period * j as f64 / n as f64;
                let [a, da, d2a] = self.curve.a_derivs(x);
                (a.powi(-2), 0.5 * d2a / a - 0.25 * (da / a).powi(2))
            })
            .unzip()
    }
}

/// Point `(x, ξ, η)` of `T*S¹_x × T*_θ`; θ is quotiented out since every
/// symbol involved is θ-independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: f64,
    pub xi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentMapValue {
    /// `ξ² + V0(x) η²`
    pub p: f64,
    /// `η²`
    pub q: f64,
    pub rank: u8,
}

const RANK_TOL: f64 = 1e-10;

/// Values and Jacobian rank of `M(x, ξ, θ, η) = (ξ² + V0 η², η²)`.
///
/// The Jacobian columns are `(x, ξ, θ, η)`; the θ column is identically zero.
pub fn moment_map_rank(pot: &EffectivePotential, pt: PhasePoint) -> MomentMapValue {
    let v0 = pot.v0(pt.x);
    let dv0 = pot.dv0(pt.x);
    let eta2 = pt.eta * pt.eta;
    let r1 = [dv0 * eta2, 2.0 * pt.xi, 0.0, 2.0 * v0 * pt.eta];
    let r2 = [0.0, 0.0, 0.0, 2.0 * pt.eta];
    MomentMapValue { p: pt.xi * pt.xi + v0 * eta2, q: eta2, rank: rank_2x4(&r1, &r2) }
}

fn rank_2x4(r1: &[f64; 4], r2: &[f64; 4]) -> u8 {
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n1 = dot(r1, r1).sqrt();
    let n2 = dot(r2, r2).sqrt();
    let scale = n1.max(n2);
    if scale == 0.0 {
        return 0;
    }
    let z1 = n1 <= RANK_TOL * scale;
    let z2 = n2 <= RANK_TOL * scale;
    match (z1, z2) {
        (true, true) => 0,
        (true, false) | (false, true) => 1,
        (false, false) => {
            // Component of r2 orthogonal to r1, relative to |r2|.
            let c = dot(r1, r2) / (n1 * n1);
            let perp: f64 = r2.iter().zip(r1).map(|(b, a)| (b - c * a).powi(2)).sum::<f64>().sqrt();
            if perp <= RANK_TOL * n2 {
                1
            } else {
                2
            }
        }
    }
}

/// CSV `x,xi,eta,p,q,rank` for phase-portrait plotting.
pub fn moment_map_csv(pot: &EffectivePotential, points: &[PhasePoint]) -> String {
    let mut s = String::from("x,xi,eta,p,q,rank\n");
    for &pt in points {
        let m = moment_map_rank(pot, pt);
        s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n", pt.x, pt.xi, pt.eta, m.p, m.q, m.rank));
    }
    s
}

/// Integrates the reduced geodesic flow of `ξ² + V0(x) η²` at fixed `η`
/// with the fourth-order Yoshida composition of leapfrog steps.
/// Returns the trajectory `(x, ξ)` including the initial point.
pub fn integrate_reduced_flow(
    pot: &EffectivePotential,
    x0: f64,
    xi0: f64,
    eta: f64,
    dt: f64,
    steps: usize,
) -> Vec<(f64, f64)> {
    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 * w1;
    let eta2 = eta * eta;
    let force = |x: f64| -pot.dv0(x) * eta2;
    let leapfrog = |x: &mut f64, xi: &mut f64, tau: f64| {
        *xi += 0.5 * tau * force(*x);
        *x += tau * 2.0 * *xi;
        *xi += 0.5 * tau * force(*x);
    };
    let mut out = Vec::with_capacity(steps + 1);
    let (mut x, mut xi) = (x0, xi0);
    out.push((x, xi));
    for _ in 0..steps {
        leapfrog(&mut x, &mut xi, w1 * dt);
        leapfrog(&mut x, &mut xi, w0 * dt);
        leapfrog(&mut x, &mut xi, w1 * dt);
        out.push((x, xi));
    }
    out
}

/// `T u = A^{1/2} u` on grid samples.
pub fn conjugate_to_flat(curve: &GeneratingCurve, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    u.iter()
        .enumerate()
        .map(|(j, &v)| curve.a(curve.period() * j as f64 / n as f64).sqrt() * v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::catalog_profile;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_has_no_subprincipal_term() {
        let pot = effective_potential(&catalog_profile("flat", &[]).unwrap());
        for &x in &[0.0, 1.0, 3.0] {
            assert_eq!(pot.v1(x), 0.0);
            assert_eq!(pot.v0(x), 1.0);
        }
        assert_eq!(pot.v0_range(), (1.0, 1.0));
    }

    #[test]
    fn nondeg_subprincipal_values() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        // A=1, A'=0, A''=1 at π; A=3, A'=0, A''=-1 at 0.
        assert_relative_eq!(pot.v1(PI), 0.5, epsilon = 1e-14);
        assert_relative_eq!(pot.v1(0.0), -1.0 / 6.0, epsilon = 1e-14);
        let (lo, hi) = pot.v0_range();
        assert_relative_eq!(lo, 1.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
        assert_eq!(pot.a_range(), (1.0, 3.0));
        assert_relative_eq!(pot.v_at(0.1, PI), 1.0 + 0.01 * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn moment_map_rank_examples() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        let r = moment_map_rank(&pot, PhasePoint { x: 1.0, xi: 0.0, eta: 1.0 });
        assert_eq!(r.rank, 2);
        let r = moment_map_rank(&pot, PhasePoint { x: PI, xi: 0.0, eta: 1.0 });
        assert_eq!(r.rank, 1);
        assert_relative_eq!(r.p, 1.0, epsilon = 1e-14);
        let r = moment_map_rank(&pot, PhasePoint { x: 0.4, xi: 1.0, eta: 0.0 });
        assert_eq!(r.rank, 1);
        assert_eq!((r.p, r.q), (1.0, 0.0));
        let r = moment_map_rank(&pot, PhasePoint { x: 0.4, xi: 0.0, eta: 0.0 });
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn stratification_matches_closed_form() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        for i in 0..64 {
            let x = 2.0 * PI * i as f64 / 64.0;
            for &xi in &[-1.0, 0.0, 0.5] {
                for &eta in &[0.0, 0.7, -2.0] {
                    let r = moment_map_rank(&pot, PhasePoint { x, xi, eta }).rank;
                    let critical_x = pot.dv0(x).abs() < 1e-12;
                    let expect_low = eta == 0.0 || (xi == 0.0 && critical_x);
                    assert_eq!(r <= 1, expect_low, "x={x} xi={xi} eta={eta}");
                }
            }
        }
    }

    #[test]
    fn flow_conserves_energy() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        let eta = 1.0;
        let (x0, xi0) = (0.3, 0.2);
        let e0 = xi0 * xi0 + pot.v0(x0) * eta * eta;
        let traj = integrate_reduced_flow(&pot, x0, xi0, eta, 1e-3, 6284);
        for &(x, xi) in &traj {
            let e = xi * xi + pot.v0(x) * eta * eta;
            assert!((e - e0).abs() <= 1e-8, "drift {}", (e - e0).abs());
        }
    }

    #[test]
    fn isometry_bookkeeping() {
        let curve = catalog_profile("nondeg", &[]).unwrap();
        let n = 512;
        let dx = 2.0 * PI / n as f64;
        let u: Vec<f64> = (0..n).map(|j| (j as f64 * dx).sin() + 0.3).collect();
        let vol: f64 = u.iter().enumerate().map(|(j, v)| v * v * curve.a(j as f64 * dx)).sum::<f64>() * dx;
        let flat: f64 = conjugate_to_flat(&curve, &u).iter().map(|v| v * v).sum::<f64>() * dx;
        assert_relative_eq!(vol, flat, max_relative = 1e-13);
    }
}
