use std::f64::consts::PI;

use revlab::classify::{classify_potential, ClassifyOptions, Taxonomy};
use revlab::geometry::effective_potential;
use revlab::catalog_profile;

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn run(name: &str, params: &[f64]) -> revlab::classify::Classification {
    let pot = effective_potential(&catalog_profile(name, params).unwrap());
    classify_potential(&pot, &ClassifyOptions::default()).unwrap()
}

#[test]
fn power_max_orders() {
    for m in 2..=6u32 {
        let c = run("power-max", &[m as f64]);
        let max = c.elements.iter().find(|e| matches!(e.taxonomy, Taxonomy::FiniteDegenerateMax { .. })).unwrap();
        assert_eq!(max.taxonomy, Taxonomy::FiniteDegenerateMax { m });
        assert!(circ_dist(max.x0, 0.0) < 1e-6);
        assert_eq!(c.elements.len(), 2);
    }
}

#[test]
fn inflection_has_transmission_points() {
    let c = run("inflection", &[1.0]);
    let infl: Vec<_> = c.elements.iter().filter(|e| e.taxonomy == Taxonomy::InflectionTransmission { m2: 1 }).collect();
    assert_eq!(infl.len(), 2);
    for e in &infl {
        assert!(circ_dist(e.x0, 0.0) < 1e-6 || circ_dist(e.x0, PI) < 1e-6);
        assert!((e.level - 0.5).abs() < 1e-12);
    }
    assert!(c.elements.iter().any(|e| e.taxonomy == Taxonomy::NondegenerateMax && circ_dist(e.x0, 1.5 * PI) < 1e-6));
    assert!(c.elements.iter().any(|e| e.taxonomy == Taxonomy::WeaklyStableMin && circ_dist(e.x0, 0.5 * PI) < 1e-6));
}

#[test]
fn cylinder_interval_within_two_cells() {
    let c = run("cylinder", &[0.5, 2.0]);
    let cell = 2.0 * PI / 4096.0;
    let cyl = c.elements.iter().find(|e| e.taxonomy == Taxonomy::CylinderMax).unwrap();
    assert!(circ_dist(cyl.interval.0, -0.5) <= 2.0 * cell, "{:?}", cyl.interval);
    assert!(circ_dist(cyl.interval.1, 0.5) <= 2.0 * cell, "{:?}", cyl.interval);
}

#[test]
fn gevrey_flat_is_infinitely_degenerate() {
    let c = run("gevrey-flat", &[2.0]);
    let e = c.elements.iter().find(|e| e.taxonomy == Taxonomy::InfinitelyDegenerateMax).unwrap();
    assert!(circ_dist(e.x0, 0.0) < 2.0 * 2.0 * PI / 4096.0);
}
