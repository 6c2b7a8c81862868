//! Critical elements of `V0 = A⁻²` and their taxonomy.
//!
//! A critical element is a maximal connected piece of `{V0' = 0}` on the
//! x-circle: an isolated point or a closed interval. Each element is tagged
//! as weakly stable (an honest minimum) or as one of the weakly unstable
//! types, and weakly unstable elements carry the exponent `α` of the sharp
//! microlocal bound `‖P φ u‖ ≳ h^α ‖φ u‖`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::EffectivePotential;
use crate::profiles::GeneratingCurve;

/// Slopes below this (absolute) mean the potential is constant.
const FLAT_FLOOR: f64 = 1e-14;
/// `|V0'|` below this is treated as an exact zero when locating flat edges.
const REPRESENTABLE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    pub grid_size: usize,
    /// Relative zero tolerance for `V0'` and for derivative probing.
    pub tol: f64,
    /// Maximum number of critical elements before the set counts as infinite.
    pub cap: usize,
    /// Largest vanishing order `m` probed (derivatives up to `2m + 1`).
    pub max_order: u32,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { grid_size: 1 << 12, tol: 1e-8, cap: 64, max_order: 10 }
    }
}

impl ClassifyOptions {
    fn check(&self) -> Result<()> {
        if self.grid_size < (1 << 12) {
            return Err(Error::ParameterOutOfRange(format!("grid_size must be >= 4096, got {}", self.grid_size)));
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::ParameterOutOfRange(format!("tol must lie in (0, 1e-3), got {}", self.tol)));
        }
        if !(1..=10).contains(&self.max_order) {
            return Err(Error::ParameterOutOfRange(format!("max_order must lie in 1..=10, got {}", self.max_order)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Taxonomy {
    NondegenerateMax,
    FiniteDegenerateMax { m: u32 },
    InflectionTransmission { m2: u32 },
    InfinitelyDegenerateMax,
    InfinitelyDegenerateInflection,
    CylinderMax,
    CylinderInflection,
    WeaklyStableMin,
    GlobalCylinder,
}

impl Taxonomy {
    pub fn is_weakly_stable(&self) -> bool {
        matches!(self, Taxonomy::WeaklyStableMin)
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Taxonomy::NondegenerateMax => write!(f, "NondegenerateMax"),
            Taxonomy::FiniteDegenerateMax { m } => write!(f, "FiniteDegenerateMax({m})"),
            Taxonomy::InflectionTransmission { m2 } => write!(f, "InflectionTransmission({m2})"),
            Taxonomy::InfinitelyDegenerateMax => write!(f, "InfinitelyDegenerateMax"),
            Taxonomy::InfinitelyDegenerateInflection => write!(f, "InfinitelyDegenerateInflection"),
            Taxonomy::CylinderMax => write!(f, "CylinderMax"),
            Taxonomy::CylinderInflection => write!(f, "CylinderInflection"),
            Taxonomy::WeaklyStableMin => write!(f, "WeaklyStableMin"),
            Taxonomy::GlobalCylinder => write!(f, "GlobalCylinder"),
        }
    }
}

/// Order of the first non-vanishing derivative `V0^(k)`, `k ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VanishingOrder {
    Finite { k: u32 },
    /// Every probed derivative was below tolerance.
    Infinite,
}

impl VanishingOrder {
    /// `m = k/2` for even `k`, `m₂ = (k−1)/2` for odd `k`.
    pub fn m(&self) -> Option<u32> {
        match *self {
            VanishingOrder::Finite { k } if k % 2 == 0 => Some(k / 2),
            VanishingOrder::Finite { k } => Some((k - 1) / 2),
            VanishingOrder::Infinite => None,
        }
    }
}

/// Critical element before taxonomy assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalStub {
    /// Left end, wrapped into `[0, period)`.
    pub alpha: f64,
    /// Right end, `alpha ≤ beta < alpha + period`.
    pub beta: f64,
    /// Representative critical point inside `[alpha, beta]`.
    pub x0: f64,
    pub level: f64,
    /// Signs of `V0'` immediately left of `alpha` and right of `beta`.
    pub side_signs: (i8, i8),
    pub isolated: bool,
    pub global: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalElement {
    pub interval: (f64, f64),
    pub x0: f64,
    pub level: f64,
    pub order: VanishingOrder,
    pub taxonomy: Taxonomy,
    pub side_signs: (i8, i8),
}

impl CriticalElement {
    pub fn is_isolated(&self) -> bool {
        self.interval.0 == self.interval.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValueSet {
    pub values: Vec<f64>,
    pub components_per_value: Vec<usize>,
    pub finite: bool,
}

/// Exponent `α` with its rational form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn reduced(num: u32, den: u32) -> Rational {
    let mut a = num;
    let mut b = den;
    while b != 0 {
        (a, b) = (b, a % b);
    }
    Rational { num: num / a, den: den / a }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PredictedExponent {
    pub alpha: Rational,
    /// Bound is `h^α / log(1/h)`.
    pub log_corrected: bool,
    /// Bound is `h^{α+η}` for every `η > 0`.
    pub eta_slack: bool,
}

/// Exponent of the sharp lower bound for weakly unstable elements; `None`
/// for weakly stable minima and the globally flat case, which carry no
/// such estimate.
pub fn predicted_exponent(elem: &CriticalElement) -> Option<PredictedExponent> {
    let plain = |alpha| PredictedExponent { alpha, log_corrected: false, eta_slack: false };
    match elem.taxonomy {
        Taxonomy::NondegenerateMax => {
            Some(PredictedExponent { alpha: reduced(1, 1), log_corrected: true, eta_slack: false })
        }
        Taxonomy::FiniteDegenerateMax { m } => Some(plain(reduced(2 * m, m + 1))),
        Taxonomy::InflectionTransmission { m2 } => Some(plain(reduced(4 * m2 + 2, 2 * m2 + 3))),
        Taxonomy::InfinitelyDegenerateMax
        | Taxonomy::InfinitelyDegenerateInflection
        | Taxonomy::CylinderMax
        | Taxonomy::CylinderInflection => {
            Some(PredictedExponent { alpha: reduced(2, 1), log_corrected: false, eta_slack: true })
        }
        Taxonomy::WeaklyStableMin | Taxonomy::GlobalCylinder => None,
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let w = x.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// Scans `V0'` on a grid and returns the maximal critical intervals together
/// with the clustered critical values.
pub fn find_critical_intervals(
    pot: &EffectivePotential,
    opts: &ClassifyOptions,
) -> Result<(Vec<CriticalStub>, CriticalValueSet)> {
    opts.check()?;
    let curve = pot.curve();
    let period = curve.period();
    let n = opts.grid_size;
    let dx = period / n as f64;
    let d: Vec<f64> = (0..n).into_par_iter().map(|j| curve.dv0(j as f64 * dx)).collect();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    if dmax < FLAT_FLOOR {
        let level = curve.v0(0.0);
        let stub = CriticalStub {
            alpha: 0.0,
            beta: period,
            x0: 0.0,
            level,
            side_signs: (0, 0),
            isolated: false,
            global: true,
        };
        let values = CriticalValueSet { values: vec![level], components_per_value: vec![1], finite: true };
        return Ok((vec![stub], values));
    }

    let thr = opts.tol * dmax;
    let flagged: Vec<bool> = d.iter().map(|v| v.abs() <= thr).collect();
    let start = (0..n).find(|&j| !flagged[j]).expect("dmax is attained at an unflagged point");
    let idx = |k: usize| (start + k) % n;
    let xat = |k: usize| (start + k) as f64 * dx;

    let mut stubs = Vec::new();
    let mut k = 0;
    while k < n {
        let j = idx(k);
        let jn = idx(k + 1);
        if !flagged[jn] {
            // Cell between two unflagged samples.
            if d[j] * d[jn] < 0.0 {
                let x0 = bisect(|x| curve.dv0(x), xat(k), xat(k + 1));
                stubs.push(isolated_stub(curve, x0, (sign(d[j]), sign(d[jn]))));
            } else if is_local_dip(&d, j, n) && d[j].abs() <= opts.tol.sqrt() * dmax {
                let (x0, val) = golden_min(|x| curve.dv0(x).abs(), xat(k) - dx, xat(k) + dx);
                if val <= thr {
                    let left = sign(d[(j + n - 1) % n]);
                    stubs.push(isolated_stub(curve, x0, (left, sign(d[jn]))));
                }
            }
            k += 1;
            continue;
        }
        // Flagged run starting at k + 1.
        let kl = k + 1;
        let mut kr = kl;
        while flagged[idx(kr + 1)] {
            kr += 1;
        }
        let left_sign = sign(d[j]);
        let right_sign = sign(d[idx(kr + 1)]);
        check_shoulders(&d, &flagged, idx(k), idx(kr + 1), n, xat(kl))?;
        stubs.push(resolve_run(curve, opts, xat(k), xat(kr + 1), xat(kl), xat(kr), (left_sign, right_sign), dx, thr));
        k = kr + 1;
    }
    // Two candidates sharing a cell can only arise from a dip next to a run.
    stubs.dedup_by(|b, a| (b.x0 - a.x0).abs() < dx);

    let values = cluster_levels(&stubs, pot, opts);
    let finite = stubs.len() <= opts.cap;
    Ok((stubs, CriticalValueSet { finite, ..values }))
}

fn is_local_dip(d: &[f64], j: usize, n: usize) -> bool {
    let a = d[(j + n - 1) % n].abs();
    let b = d[j].abs();
    let c = d[(j + 1) % n].abs();
    b <= a && b <= c && sign(d[(j + n - 1) % n]) == sign(d[(j + 1) % n])
}

/// Shoulders just outside a run must keep the sign of the adjacent sample.
fn check_shoulders(d: &[f64], flagged: &[bool], jl: usize, jr: usize, n: usize, x: f64) -> Result<()> {
    let l2 = (jl + n - 1) % n;
    let r2 = (jr + 1) % n;
    if (!flagged[l2] && sign(d[l2]) != sign(d[jl])) || (!flagged[r2] && sign(d[r2]) != sign(d[jr])) {
        return Err(Error::Classification {
            x,
            reason: "V0' changes sign within the shoulder scan radius".into(),
        });
    }
    Ok(())
}

fn isolated_stub(curve: &GeneratingCurve, x0: f64, side_signs: (i8, i8)) -> CriticalStub {
    let x0 = wrap(x0, curve.period());
    CriticalStub {
        alpha: x0,
        beta: x0,
        x0,
        level: curve.v0(x0),
        side_signs,
        isolated: true,
        global: false,
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_run(
    curve: &GeneratingCurve,
    opts: &ClassifyOptions,
    x_left_out: f64,
    x_right_out: f64,
    x_first: f64,
    x_last: f64,
    side_signs: (i8, i8),
    dx: f64,
    thr: f64,
) -> CriticalStub {
    let period = curve.period();
    let dv0 = |x: f64| curve.dv0(x);
    let x0 = if side_signs.0 != side_signs.1 {
        bisect(dv0, x_left_out, x_right_out)
    } else {
        let d2 = |x: f64| curve.v0_derivs(x, 2)[2];
        if sign(d2(x_left_out)) != sign(d2(x_right_out)) && sign(d2(x_left_out)) != 0 {
            bisect(d2, x_left_out, x_right_out)
        } else {
            golden_min(|x| dv0(x).abs(), x_left_out, x_right_out).0
        }
    };
    if x_last - x_first <= 2.0 * dx {
        return isolated_stub(curve, x0, side_signs);
    }
    if let VanishingOrder::Finite { .. } = probe_order(curve, x0, opts.max_order, opts.tol) {
        return isolated_stub(curve, x0, side_signs);
    }
    let (alpha, beta) = match curve.exact_derivative_order() {
        Some(k) if k >= 2 => {
            let a = extrapolate_flat_edge(curve, x_left_out, x0, thr).unwrap_or(x_first);
            let b = extrapolate_flat_edge(curve, x_right_out, x0, thr).unwrap_or(x_last);
            (a.min(x0), b.max(x0))
        }
        _ => (x_first, x_last),
    };
    if beta - alpha <= 2.0 * dx {
        return isolated_stub(curve, 0.5 * (alpha + beta), side_signs);
    }
    let a = wrap(alpha, period);
    let b = a + (beta - alpha);
    CriticalStub {
        alpha: a,
        beta: b,
        x0: wrap(x0, period),
        level: curve.v0(0.5 * (alpha + beta)),
        side_signs,
        isolated: false,
        global: false,
    }
}

fn cluster_levels(stubs: &[CriticalStub], pot: &EffectivePotential, opts: &ClassifyOptions) -> CriticalValueSet {
    let (lo, hi) = pot.v0_range();
    let gap = opts.tol * (hi - lo).max(f64::MIN_POSITIVE);
    let mut levels: Vec<f64> = stubs.iter().map(|s| s.level).collect();
    levels.sort_by(f64::total_cmp);
    let mut values: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for l in levels {
        match values.last() {
            Some(&v) if (l - v).abs() <= gap => *counts.last_mut().unwrap() += 1,
            _ => {
                values.push(l);
                counts.push(1);
            }
        }
    }
    CriticalValueSet { values, components_per_value: counts, finite: true }
}

/// Bisection for a sign change of `f` on `[a, b]`, to 1e-12 or exact zero.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    if f(b) == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= 1e-12 {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if sign(fm) == sign(fa) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Locates the edge of an infinitely flat piece of `V0` approached from
/// `x_out` (outside, `|V0'| > 0`) towards `x_in` (inside, `V0' = 0`).
///
/// Near such an edge `−ln|V0'|` follows the Gevrey tail
/// `c·t^{−p} + q·ln t + C` in the distance `t` to the edge. The model is fitted
/// to samples between the tolerance crossing and the last representable
/// slope, and the fitted edge is returned.
pub fn extrapolate_flat_edge(curve: &GeneratingCurve, x_out: f64, x_in: f64, thr: f64) -> Option<f64> {
    let f = |x: f64| curve.dv0(x).abs();
    if f(x_in) > REPRESENTABLE || f(x_out) <= REPRESENTABLE {
        return None;
    }
    let boundary = |pred: &dyn Fn(f64) -> bool, mut a: f64, mut b: f64| {
        // pred(a) true, pred(b) false
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if pred(m) {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() < 1e-15 {
                break;
            }
        }
        a
    };
    let x_z = boundary(&|x| f(x) > REPRESENTABLE, x_out, x_in);
    let x_f = if f(x_out) > thr { boundary(&|x| f(x) > thr, x_out, x_z) } else { x_out };
    let span = (x_z - x_f).abs();
    if span <= 0.0 {
        return None;
    }
    let dir = (x_in - x_out).signum();
    let m = 64;
    let mut dist = Vec::with_capacity(m);
    let mut g = Vec::with_capacity(m);
    for i in 0..m {
        let x = x_f + (x_z - x_f) * i as f64 / (m - 1) as f64;
        let v = f(x);
        if v > 0.0 && v.is_finite() {
            dist.push((x_z - x).abs());
            g.push(-v.ln());
        }
    }
    if dist.len() < 8 {
        return None;
    }
    let rss = |log_s: f64, p: f64| -> f64 {
        if !(0.1..=12.0).contains(&p) {
            return f64::INFINITY;
        }
        let s = log_s.exp();
        let rows = dist.len();
        let a = DMatrix::from_fn(rows, 3, |i, c| {
            let t = dist[i] + s;
            match c {
                0 => t.powf(-p),
                1 => t.ln(),
                _ => 1.0,
            }
        });
        let b = DVector::from_column_slice(&g);
        let svd = a.clone().svd(true, true);
        match svd.solve(&b, 1e-14) {
            Ok(coef) => (a * coef - b).norm_squared(),
            Err(_) => f64::INFINITY,
        }
    };
    // Coarse search, then Nelder–Mead in (ln s, p).
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..40 {
        let log_s = (span * 1e-6).ln() + (1e6f64).ln() * i as f64 / 39.0;
        for jp in 0..40 {
            let p = 0.3 + 7.7 * jp as f64 / 39.0;
            let r = rss(log_s, p);
            if r < best.0 {
                best = (r, log_s, p);
            }
        }
    }
    let (log_s, _) = nelder_mead_2d(|v| rss(v[0], v[1]), [best.1, best.2], [0.3, 0.2], 400);
    let edge = x_z + dir * log_s.exp();
    edge.is_finite().then_some(edge)
}

fn nelder_mead_2d(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], iters: usize) -> (f64, f64) {
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut vals = simplex.map(&f);
    for _ in 0..iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        if (vals[2] - vals[0]).abs() <= 1e-14 * vals[0].abs().max(1e-300) {
            break;
        }
        let c = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    vals[i] = f(simplex[i]);
                }
            }
        }
    }
    let i = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[i][0], simplex[i][1])
}

fn probe_order(curve: &GeneratingCurve, x0: f64, max_order: u32, tol: f64) -> VanishingOrder {
    let kmax = (2 * max_order + 1) as usize;
    let d = curve.v0_derivs(x0, kmax);
    let len_scale = curve.period() / (2.0 * std::f64::consts::PI);
    // Curvature scale: total variation of V0 on the circle.
    let (lo, hi) = (0..256).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
        let v = curve.v0(curve.period() * j as f64 / 256.0);
        (lo.min(v), hi.max(v))
    });
    let scale = (hi - lo).max(f64::MIN_POSITIVE);
    let mut fact = 1.0;
    for (k, dk) in d.iter().enumerate().skip(1) {
        fact *= k as f64;
        if k >= 2 && (dk.abs() * len_scale.powi(k as i32) / fact) > tol * scale {
            return VanishingOrder::Finite { k: k as u32 };
        }
    }
    VanishingOrder::Infinite
}

/// Smallest `k ≥ 2` with a non-negligible `V0^(k)(x0)`, probing up to
/// `2·max_order + 1`.
pub fn vanishing_order(pot: &EffectivePotential, x0: f64, max_order: u32, tol: f64) -> Result<VanishingOrder> {
    if !(1..=10).contains(&max_order) {
        return Err(Error::ParameterOutOfRange(format!("max_order must lie in 1..=10, got {max_order}")));
    }
    let curve = pot.curve();
    let scale = (0..1024)
        .map(|j| curve.dv0(curve.period() * j as f64 / 1024.0).abs())
        .fold(0.0, f64::max);
    let slope = curve.dv0(x0).abs();
    if scale >= FLAT_FLOOR && slope > tol.sqrt() * scale {
        return Err(Error::NotCritical { x: x0, slope });
    }
    Ok(probe_order(curve, x0, max_order, tol))
}

/// Assigns the taxonomy from isolation, side signs and vanishing order.
pub fn classify_element(stub: &CriticalStub, order: VanishingOrder) -> Result<CriticalElement> {
    let fail = |reason: &str| Error::Classification { x: stub.x0, reason: reason.to_string() };
    let (l, r) = stub.side_signs;
    let taxonomy = if stub.global {
        Taxonomy::GlobalCylinder
    } else if l < 0 && r > 0 {
        if let VanishingOrder::Finite { k } = order {
            if stub.isolated && k % 2 == 1 {
                return Err(fail("odd vanishing order at a minimum"));
            }
        }
        Taxonomy::WeaklyStableMin
    } else if l > 0 && r < 0 {
        match (stub.isolated, order) {
            (false, _) => Taxonomy::CylinderMax,
            (true, VanishingOrder::Finite { k: 2 }) => Taxonomy::NondegenerateMax,
            (true, VanishingOrder::Finite { k }) if k % 2 == 0 => Taxonomy::FiniteDegenerateMax { m: k / 2 },
            (true, VanishingOrder::Finite { .. }) => return Err(fail("odd vanishing order at a maximum")),
            (true, VanishingOrder::Infinite) => Taxonomy::InfinitelyDegenerateMax,
        }
    } else if l == r && l != 0 {
        match (stub.isolated, order) {
            (false, _) => Taxonomy::CylinderInflection,
            (true, VanishingOrder::Finite { k }) if k % 2 == 1 => Taxonomy::InflectionTransmission { m2: (k - 1) / 2 },
            (true, VanishingOrder::Finite { .. }) => return Err(fail("even vanishing order at a monotone point")),
            (true, VanishingOrder::Infinite) => Taxonomy::InfinitelyDegenerateInflection,
        }
    } else {
        return Err(fail("undetermined side signs"));
    };
    Ok(CriticalElement {
        interval: (stub.alpha, stub.beta),
        x0: stub.x0,
        level: stub.level,
        order,
        taxonomy,
        side_signs: stub.side_signs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub elements: Vec<CriticalElement>,
    pub values: CriticalValueSet,
}

/// Runs the full pipeline: scan, order probing, taxonomy.
pub fn classify_potential(pot: &EffectivePotential, opts: &ClassifyOptions) -> Result<Classification> {
    let (stubs, values) = find_critical_intervals(pot, opts)?;
    if !values.finite {
        return Err(Error::CriticalCapExceeded { cap: opts.cap, found: stubs.len() });
    }
    let elements = stubs
        .par_iter()
        .map(|s| {
            let order = if s.global || !s.isolated {
                VanishingOrder::Infinite
            } else {
                probe_order(pot.curve(), s.x0, opts.max_order, opts.tol)
            };
            classify_element(s, order)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classification { elements, values })
}

/// One entry of the JSON classification report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEntry {
    pub interval: (f64, f64),
    pub level: f64,
    pub order: Option<u32>,
    pub order_infinite: bool,
    pub taxonomy: String,
    pub predicted_exponent: Option<f64>,
    pub predicted_exponent_rational: Option<String>,
    pub log_corrected: bool,
    pub eta_slack: bool,
}

impl Classification {
    pub fn report(&self) -> Vec<ReportEntry> {
        self.elements
            .iter()
            .map(|e| {
                let pred = predicted_exponent(e);
                let order = match e.taxonomy {
                    Taxonomy::CylinderMax | Taxonomy::CylinderInflection | Taxonomy::GlobalCylinder => None,
                    _ => e.order.m(),
                };
                ReportEntry {
                    interval: e.interval,
                    level: e.level,
                    order,
                    order_infinite: e.order == VanishingOrder::Infinite,
                    taxonomy: e.taxonomy.to_string(),
                    predicted_exponent: pred.map(|p| p.alpha.value()),
                    predicted_exponent_rational: pred.map(|p| p.alpha.to_string()),
                    log_corrected: pred.is_some_and(|p| p.log_corrected),
                    eta_slack: pred.is_some_and(|p| p.eta_slack),
                }
            })
            .collect()
    }

    pub fn weakly_unstable(&self) -> impl Iterator<Item = &CriticalElement> {
        self.elements.iter().filter(|e| predicted_exponent(e).is_some())
    }
}
