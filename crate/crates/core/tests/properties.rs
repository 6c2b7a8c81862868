use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use revlab::classify::{predicted_exponent, CriticalElement, Taxonomy, VanishingOrder};
use revlab::experiments::{band_mass, BandRegion, Measure};
use revlab::microlocal::{build_compression, fit_rate, FitModel, GridPolicy, PhaseSpaceWindow};
use revlab::profiles::ProfileSpec;
use revlab::spectral::Grid;

fn element(taxonomy: Taxonomy) -> CriticalElement {
    CriticalElement {
        interval: (0.0, 0.0),
        x0: 0.0,
        level: 1.0,
        order: VanishingOrder::Infinite,
        taxonomy,
        side_signs: (1, -1),
    }
}

#[test]
fn predicted_exponents_increase_towards_two() {
    let mut last = 0.0;
    for m in 1..=10u32 {
        let t = if m == 1 { Taxonomy::NondegenerateMax } else { Taxonomy::FiniteDegenerateMax { m } };
        let a = predicted_exponent(&element(t)).unwrap().alpha.value();
        assert!((1.0..=2.0).contains(&a));
        assert!(a > last);
        last = a;
    }
    for m2 in 1..=10u32 {
        let a = predicted_exponent(&element(Taxonomy::InflectionTransmission { m2 })).unwrap().alpha.value();
        assert!((1.0..=2.0).contains(&a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn band_mass_is_additive(seed in proptest::collection::vec(-1.0f64..1.0, 64), a in 0.0f64..6.0, l1 in 0.45f64..2.5, l2 in 0.45f64..2.5) {
        let grid = Grid::new(64, 2.0 * PI).unwrap();
        let seed: Vec<f64> = seed.iter().map(|v| v + 1.5).collect();
        let whole = band_mass(&seed, &grid, &BandRegion::new(a, a + l1 + l2), Measure::Flat, None).unwrap();
        let left = band_mass(&seed, &grid, &BandRegion::new(a, a + l1), Measure::Flat, None).unwrap();
        let right = band_mass(&seed, &grid, &BandRegion::new(a + l1, a + l1 + l2), Measure::Flat, None).unwrap();
        prop_assert!((whole - left - right).abs() <= 1e-12 * (1.0 + whole));
    }

    #[test]
    fn pure_power_fit_recovers_exponent(alpha in 0.5f64..2.5, c in 0.1f64..10.0) {
        let h: Vec<f64> = (0..7).map(|j| 0.02 * 0.5f64.powi(j)).collect();
        let g: Vec<f64> = h.iter().map(|x| c * x.powf(alpha)).collect();
        let fit = fit_rate(&h, &g, FitModel::PurePower).unwrap();
        prop_assert!((fit.exponent - alpha).abs() <= 1e-9);
        prop_assert!(fit.reliable);
    }

    #[test]
    fn compression_is_a_contraction(re in proptest::collection::vec(-1.0f64..1.0, 256), im in proptest::collection::vec(-1.0f64..1.0, 256), xc in 0.0f64..6.28, xw in 0.5f64..3.0, kc in -1.0f64..1.0, kw in 0.2f64..1.0) {
        let grid = Grid::new(256, 2.0 * PI).unwrap();
        let phi = build_compression(PhaseSpaceWindow::new(xc, xw, kc, kw), grid, 0.02).unwrap();
        let u: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let v = phi.apply(&u);
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(nv.sqrt() <= (1.0 + 1e-10) * nu.sqrt());
    }

    #[test]
    fn grid_policy_stays_in_bounds(h in 1e-4f64..0.5) {
        let p = GridPolicy::default();
        let n = p.n_for(h);
        prop_assert!(n.is_power_of_two());
        prop_assert!((p.min_n..=p.max_n).contains(&n));
    }

    #[test]
    fn power_max_spec_roundtrips(m in 2u32..=10) {
        let s = ProfileSpec::new("power-max", &[m as f64]);
        let back = ProfileSpec::parse_compact(&s.compact()).unwrap();
        prop_assert_eq!(back.compact(), s.compact());
        prop_assert!(back.build().is_ok());
    }
}
