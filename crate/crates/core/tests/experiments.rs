use std::f64::consts::PI;

use revlab::experiments::{
    band_mass, build_family, dichotomy_report, quasimode_packet, volume_weights, wavefront_proxy, BandRegion, Branch,
    DichotomyOptions, Measure, Selector, Verdict,
};
use revlab::geometry::{effective_potential, EffectivePotential};
use revlab::profiles::catalog_profile;
use revlab::spectral::{mode_eigenpairs, Grid, Scheme};

fn pot(name: &str, params: &[f64]) -> EffectivePotential {
    effective_potential(&catalog_profile(name, params).unwrap())
}

const KS: [i64; 7] = [4, 6, 9, 13, 19, 27, 40];

#[test]
fn well_modes_vanish_on_the_barrier_band() {
    let p = pot("nondeg", &[]);
    let grid = Grid::new(256, 2.0 * PI).unwrap();
    let fam = build_family(&p, "well", Selector::Ground { ks: KS.to_vec() }, grid).unwrap();
    let band = BandRegion::new(PI - 0.5, PI + 0.5);
    let rep = dichotomy_report(&fam, &band, &p, &DichotomyOptions::default()).unwrap();
    assert_eq!(rep.branch, Branch::Vanishing, "{:?}", rep.masses);
    assert_eq!(rep.verdict, Verdict::Pass);
    // Masses fall off along the family.
    assert!(rep.masses.last().unwrap() < &rep.masses[0]);
}

#[test]
fn flat_ground_family_has_constant_mass() {
    let p = pot("flat", &[]);
    let grid = Grid::new(128, 2.0 * PI).unwrap();
    let fam = build_family(&p, "ground", Selector::Ground { ks: KS.to_vec() }, grid).unwrap();
    let band = BandRegion::new(1.0, 2.0);
    let rep = dichotomy_report(&fam, &band, &p, &DichotomyOptions::default()).unwrap();
    for m in &rep.masses {
        assert!((m - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }
    assert_eq!(rep.branch, Branch::LowerBounded);
    assert!(rep.gamma_fit.unwrap().exponent.abs() < 1e-9);
    assert!(rep.wavefront_meets_band);
    assert_eq!(rep.verdict, Verdict::Pass);
}

#[test]
fn volume_measure_on_flat_matches_flat_measure() {
    let p = pot("flat", &[]);
    let grid = Grid::new(128, 2.0 * PI).unwrap();
    let w = volume_weights(&p, &grid);
    let modes = mode_eigenpairs(&p, 3, 100.0, grid, Scheme::Spectral);
    let band = BandRegion::new(0.4, 2.9);
    let a = p.curve().a(0.0);
    for m in &modes {
        let f = band_mass(&m.phi, &grid, &band, Measure::Flat, None).unwrap();
        let v = band_mass(&m.phi, &grid, &band, Measure::Volume, Some(&w)).unwrap();
        assert!((v - a * f).abs() < 1e-12, "{v} vs {f}");
    }
}

#[test]
fn wavefront_proxy_on_flat_mode() {
    let p = pot("flat", &[]);
    let grid = Grid::new(128, 2.0 * PI).unwrap();
    let m = mode_eigenpairs(&p, 5, 200.0, grid, Scheme::Spectral).remove(0);
    let band = BandRegion::new(1.0, 2.0);
    assert!(wavefront_proxy(&m, &p, &grid, &band) > 1e-4);
}

#[test]
fn quasimode_packet_residual_is_within_window() {
    let p = pot("nondeg", &[]);
    let grid = Grid::new(256, 2.0 * PI).unwrap();
    let modes = mode_eigenpairs(&p, 0, 2500.0, grid, Scheme::Spectral);
    let lambda0 = modes[20].lambda() + 0.01;
    let beta0 = 0.0;
    let (phi, resid) = quasimode_packet(&modes, lambda0, beta0).unwrap();
    let norm: f64 = phi.iter().map(|v| v * v).sum::<f64>() * grid.spacing();
    assert!((norm - 1.0).abs() < 1e-10);
    let width = lambda0.powf(-beta0);
    assert!(resid <= 2.0 * lambda0 * width + width * width);
    assert!(quasimode_packet(&modes, 1e6, 1.0).is_none());
}
