//! Band masses of single-`k` mode families and the mass dichotomy.
//!
//! A band is `Ω = (a, b)_x × S¹_θ`. For a family of joint eigenmodes, the
//! mass in `Ω` either dies faster than any power of `λ` or stays above
//! `C λ^{−1−ε}`; this module measures which, with `O(λ^{−∞})` replaced by the
//! surrogate `λ^{−N0}`.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::geometry::EffectivePotential;
use crate::microlocal::{fit_rate_with_span, FitModel, PsiClass, RateFit};
use crate::spectral::{mode_eigenpairs, Grid, Scheme, SurfaceMode};

pub const DEFAULT_VANISHING_DEGREE: i32 = 6;
pub const DEFAULT_EPS_ACCEPT: f64 = 0.2;
pub const DEFAULT_WAVEFRONT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_UNIFORM_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRegion {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub label: String,
}

impl BandRegion {
    pub fn new(a: f64, b: f64) -> Self {
        BandRegion { a, b, label: format!("({a:.4},{b:.4})") }
    }

    /// Length of `(a, b)` read counterclockwise from `a`.
    pub fn length(&self, period: f64) -> f64 {
        (self.b - self.a).rem_euclid(period)
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        let len = self.length(grid.period());
        if !(self.a.is_finite() && self.b.is_finite()) || len == 0.0 {
            return Err(Error::InvalidBand(format!("endpoints {} and {} coincide on the circle", self.a, self.b)));
        }
        if len < 4.0 * grid.spacing() {
            return Err(Error::InvalidBand(format!("band length {len} is under 4 grid cells")));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, period: f64) -> bool {
        let t = (x - self.a).rem_euclid(period);
        t > 0.0 && t < self.length(period)
    }
}

impl fmt::Display for BandRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// `|φ|² dx`
    Flat,
    /// `|φ|² A dx`
    Volume,
}

/// Integral of the periodic piecewise-linear interpolant of `f` over the
/// band, by the trapezoidal rule with interpolated endpoint values.
fn band_integral(f: &[f64], grid: &Grid, band: &BandRegion) -> f64 {
    let n = grid.n();
    let dx = grid.spacing();
    let period = grid.period();
    let interp = |x: f64| {
        let s = x.rem_euclid(period) / dx;
        let j = (s.floor() as usize).min(n - 1);
        let t = s - j as f64;
        (1.0 - t) * f[j] + t * f[(j + 1) % n]
    };
    let a = band.a;
    let len = band.length(period);
    let b = a + len;
    let mut xs = vec![a];
    let first = (a / dx).floor() as i64 + 1;
    let mut j = first;
    while (j as f64) * dx < b {
        xs.push(j as f64 * dx);
        j += 1;
    }
    xs.push(b);
    xs.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (interp(w[0]) + interp(w[1]))).sum()
}

fn density(phi: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    match weights {
        Some(w) => phi.iter().zip(w).map(|(p, a)| p * p * a).collect(),
        None => phi.iter().map(|p| p * p).collect(),
    }
}

/// Samples of `A` on the grid, for the volume measure.
pub fn volume_weights(pot: &EffectivePotential, grid: &Grid) -> Vec<f64> {
    grid.nodes().iter().map(|&x| pot.curve().a(x)).collect()
}

/// Fraction of the mode's mass in the band. `weights` must be
/// [`volume_weights`] for [`Measure::Volume`].
pub fn band_mass(phi: &[f64], grid: &Grid, band: &BandRegion, measure: Measure, weights: Option<&[f64]>) -> Result<f64> {
    band.check(grid)?;
    let w = match measure {
        Measure::Flat => None,
        Measure::Volume => Some(weights.ok_or_else(|| Error::InvalidBand("volume measure needs A samples".into()))?),
    };
    let f = density(phi, w);
    let total: f64 = f.iter().sum::<f64>() * grid.spacing();
    if total == 0.0 {
        return Err(Error::InvalidBand("mode has zero norm".into()));
    }
    Ok((band_integral(&f, grid, band) / total).clamp(0.0, 1.0))
}

/// Band masses averaged over each cluster of numerically equal `λ²` within
/// one `k`, which removes the arbitrary basis choice in degenerate
/// eigenspaces.
pub fn cluster_band_masses(modes: &[SurfaceMode], grid: &Grid, band: &BandRegion, rel_tol: f64) -> Result<Vec<(i64, f64, f64)>> {
    let mut out: Vec<(i64, f64, f64)> = Vec::new();
    let mut sorted: Vec<&SurfaceMode> = modes.iter().collect();
    sorted.sort_by(|a, b| a.k.cmp(&b.k).then(a.lambda_sq.total_cmp(&b.lambda_sq)));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        let scale = sorted[i].lambda_sq.abs().max(1.0);
        while j < sorted.len() && sorted[j].k == sorted[i].k && (sorted[j].lambda_sq - sorted[i].lambda_sq).abs() <= rel_tol * scale {
            j += 1;
        }
        let mut acc = 0.0;
        for m in &sorted[i..j] {
            acc += band_mass(&m.phi, grid, band, Measure::Flat, None)?;
        }
        out.push((sorted[i].k, sorted[i].lambda_sq, acc / (j - i) as f64));
        i = j;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Selector {
    /// For each `k`, the mode with `λ²` nearest `k²·level`.
    Barrier { level: f64, ks: Vec<i64> },
    /// Lowest mode of each `P_k`.
    Ground { ks: Vec<i64> },
    /// Every mode of one `k` with `λ` in `[lambda_min, lambda_max]`.
    FixedK { k: i64, lambda_min: f64, lambda_max: f64 },
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Barrier { level, .. } => write!(f, "lambda^2 nearest k^2*{level}"),
            Selector::Ground { .. } => write!(f, "ground mode of P_k"),
            Selector::FixedK { k, lambda_min, lambda_max } => write!(f, "k={k}, lambda in [{lambda_min}, {lambda_max}]"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeFamily {
    pub label: String,
    pub selector: Selector,
    pub grid: Grid,
    /// Sorted by `λ`.
    pub members: Vec<SurfaceMode>,
}

/// Eigensolves needed by the selector, one `k` per task.
pub fn build_family(pot: &EffectivePotential, label: &str, selector: Selector, grid: Grid) -> Result<ModeFamily> {
    let mut members: Vec<SurfaceMode> = match &selector {
        Selector::Barrier { level, ks } => ks
            .par_iter()
            .filter_map(|&k| {
                let target = (k * k) as f64 * level;
                mode_eigenpairs(pot, k, f64::INFINITY, grid, Scheme::Spectral)
                    .into_iter()
                    .min_by(|a, b| (a.lambda_sq - target).abs().total_cmp(&(b.lambda_sq - target).abs()))
            })
            .collect(),
        Selector::Ground { ks } => ks
            .par_iter()
            .filter_map(|&k| mode_eigenpairs(pot, k, f64::INFINITY, grid, Scheme::Spectral).into_iter().next())
            .collect(),
        Selector::FixedK { k, lambda_min, lambda_max } => {
            mode_eigenpairs(pot, *k, lambda_max * lambda_max, grid, Scheme::Spectral)
                .into_iter()
                .filter(|m| m.lambda() >= *lambda_min)
                .collect()
        }
    };
    if members.is_empty() {
        return Err(Error::EmptyFamily(format!("selector '{selector}' matched no modes")));
    }
    members.sort_by(|a, b| a.lambda_sq.total_cmp(&b.lambda_sq).then(a.k.cmp(&b.k)));
    Ok(ModeFamily { label: label.to_string(), selector, grid, members })
}

impl ModeFamily {
    pub fn lambdas(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.lambda()).collect()
    }

    pub fn masses(&self, band: &BandRegion, measure: Measure, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        self.members.iter().map(|m| band_mass(&m.phi, &self.grid, band, measure, weights)).collect()
    }

    /// At least 5 members spanning a `λ` factor of 4.
    pub fn check_fit_ready(&self) -> Result<()> {
        let l = self.lambdas();
        let (lo, hi) = l.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if l.len() < 5 || !(hi >= 4.0 * lo) {
            return Err(Error::InsufficientData(format!(
                "family '{}' has {} members spanning a lambda factor {:.2}; need 5 and 4",
                self.label,
                l.len(),
                hi / lo
            )));
        }
        Ok(())
    }
}

/// Mass of `χ_band φ` at frequencies classically allowed somewhere in the
/// band (`κ² ≤ λ² − k² min_band V0`), relative to `‖φ‖²`.
pub fn wavefront_proxy(mode: &SurfaceMode, pot: &EffectivePotential, grid: &Grid, band: &BandRegion) -> f64 {
    let period = grid.period();
    let nodes = grid.nodes();
    let v0_min = nodes
        .iter()
        .filter(|&&x| band.contains(x, period))
        .map(|&x| pot.v0(x))
        .fold(f64::INFINITY, f64::min);
    let floor = (mode.k * mode.k) as f64 * v0_min;
    let mut allowed = mode.lambda_sq - floor;
    // Rounding at the turning level.
    let slack = 1e-10 * mode.lambda_sq.abs().max(floor.abs());
    if !(allowed >= -slack) {
        return 0.0;
    }
    allowed = allowed.max(0.0) + slack;
    let mut buf: Vec<Complex64> = nodes
        .iter()
        .zip(&mode.phi)
        .map(|(&x, &p)| Complex64::new(if band.contains(x, period) { p } else { 0.0 }, 0.0))
        .collect();
    fourier::forward(&mut buf);
    let n = grid.n() as f64;
    let kap = fourier::wavenumbers(grid.n(), period);
    // Parseval: Σ|û|²/n = Σ|u|².
    let inside: f64 = buf.iter().zip(&kap).filter(|(_, k)| *k * *k <= allowed).map(|(v, _)| v.norm_sqr()).sum::<f64>() / n;
    let total: f64 = mode.phi.iter().map(|p| p * p).sum();
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassFit {
    /// `γ` in `mass ≈ λ^{−γ}` is `fit.exponent`.
    pub fit: RateFit,
    /// Some member's wavefront proxy missed the band.
    pub vacuous: bool,
}

pub fn mass_rate_fit(
    family: &ModeFamily,
    band: &BandRegion,
    measure: Measure,
    weights: Option<&[f64]>,
    pot: &EffectivePotential,
) -> Result<MassFit> {
    family.check_fit_ready()?;
    let masses = family.masses(band, measure, weights)?;
    let h: Vec<f64> = family.lambdas().iter().map(|l| 1.0 / l).collect();
    let g: Vec<f64> = masses.iter().map(|m| m.max(f64::MIN_POSITIVE)).collect();
    let fit = fit_rate_with_span(&h, &g, FitModel::PurePower, 4.0)?;
    let vacuous = family
        .members
        .iter()
        .any(|m| wavefront_proxy(m, pot, &family.grid, band) <= DEFAULT_WAVEFRONT_THRESHOLD);
    Ok(MassFit { fit, vacuous })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformMass {
    pub min_mass: f64,
    pub max_mass: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Extremes of the band mass over a family of `ψ0`-class modes.
pub fn uniform_mass_check(family: &ModeFamily, band: &BandRegion, ratio_bound: f64, min_bound: f64) -> Result<UniformMass> {
    if family.members.is_empty() {
        return Err(Error::EmptyFamily(family.label.clone()));
    }
    if let Some(m) = family.members.iter().find(|m| m.psi_class != PsiClass::Psi0) {
        return Err(Error::ParameterOutOfRange(format!(
            "mode k={} lambda^2={} is {}, not psi0",
            m.k, m.lambda_sq, m.psi_class
        )));
    }
    let masses = family.masses(band, Measure::Flat, None)?;
    let min_mass = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let max_mass = masses.iter().copied().fold(0.0, f64::max);
    let ratio = max_mass / min_mass;
    Ok(UniformMass { min_mass, max_mass, ratio, pass: ratio <= ratio_bound && min_mass >= min_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Vanishing,
    LowerBounded,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub band: BandRegion,
    pub family: String,
    pub selector: String,
    pub lambdas: Vec<f64>,
    pub masses: Vec<f64>,
    pub branch: Branch,
    pub gamma_fit: Option<RateFit>,
    /// Every member's wavefront proxy meets the band.
    pub wavefront_meets_band: bool,
    /// `1 − γ` when positive.
    pub delta_hat: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyOptions {
    pub vanishing_degree: i32,
    pub eps_accept: f64,
    pub wavefront_threshold: f64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions {
            vanishing_degree: DEFAULT_VANISHING_DEGREE,
            eps_accept: DEFAULT_EPS_ACCEPT,
            wavefront_threshold: DEFAULT_WAVEFRONT_THRESHOLD,
        }
    }
}

pub fn dichotomy_report(
    family: &ModeFamily,
    band: &BandRegion,
    pot: &EffectivePotential,
    opts: &DichotomyOptions,
) -> Result<DichotomyReport> {
    let masses = family.masses(band, Measure::Flat, None)?;
    let lambdas = family.lambdas();
    let below: Vec<bool> = masses
        .iter()
        .zip(&lambdas)
        .map(|(m, l)| *m <= l.powi(-opts.vanishing_degree))
        .collect();
    let wavefront_meets_band = family
        .members
        .iter()
        .all(|m| wavefront_proxy(m, pot, &family.grid, band) > opts.wavefront_threshold);
    let (branch, gamma_fit) = if below.iter().all(|&b| b) {
        (Branch::Vanishing, None)
    } else if below.iter().any(|&b| b) {
        (Branch::Inconclusive, None)
    } else {
        match mass_rate_fit(family, band, Measure::Flat, None, pot) {
            Ok(f) => (Branch::LowerBounded, Some(f.fit)),
            Err(Error::InsufficientData(_)) => (Branch::Inconclusive, None),
            Err(e) => return Err(e),
        }
    };
    let verdict = match (branch, &gamma_fit) {
        (Branch::Vanishing, _) => Verdict::Pass,
        (Branch::LowerBounded, Some(f)) if f.exponent <= 1.0 + opts.eps_accept => Verdict::Pass,
        (Branch::LowerBounded, _) => Verdict::Fail,
        (Branch::Inconclusive, _) => Verdict::Inconclusive,
    };
    let delta_hat = gamma_fit.as_ref().map(|f| 1.0 - f.exponent).filter(|d| *d > 0.0);
    Ok(DichotomyReport {
        band: band.clone(),
        family: family.label.clone(),
        selector: family.selector.to_string(),
        lambdas,
        masses,
        branch,
        gamma_fit,
        wavefront_meets_band,
        delta_hat,
        verdict,
    })
}

/// Combination of the modes of one `k` whose `λ` lies within
/// `λ0^{−β0}` of `λ0`, weighted equally. Returns `(φ, ‖(P_k − λ0²)φ‖)` with
/// `φ` normalized, or `None` if no mode falls in the window.
pub fn quasimode_packet(modes: &[SurfaceMode], lambda0: f64, beta0: f64) -> Option<(Vec<f64>, f64)> {
    let width = lambda0.powf(-beta0);
    let picked: Vec<&SurfaceMode> = modes.iter().filter(|m| (m.lambda() - lambda0).abs() <= width).collect();
    let first = picked.first()?;
    if picked.iter().any(|m| m.k != first.k) {
        return None;
    }
    let c = 1.0 / (picked.len() as f64).sqrt();
    let mut phi = vec![0.0; first.phi.len()];
    for m in &picked {
        phi.iter_mut().zip(&m.phi).for_each(|(p, v)| *p += c * v);
    }
    // Eigenmodes are orthonormal, so the residual is explicit.
    let resid = picked.iter().map(|m| (c * (m.lambda_sq - lambda0 * lambda0)).powi(2)).sum::<f64>().sqrt();
    Some((phi, resid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(256, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_mode_mass_is_length_fraction() {
        let g = grid();
        let phi = vec![1.0; 256];
        for (a, b) in [(0.3, 1.7), (-0.5, 0.5), (5.0, 1.0)] {
            let band = BandRegion::new(a, b);
            let m = band_mass(&phi, &g, &band, Measure::Flat, None).unwrap();
            assert!((m - band.length(2.0 * PI) / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_is_additive() {
        let g = grid();
        let phi: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).sin() + 0.2 * x.cos() + 0.1).collect();
        let cuts = [0.1, 0.9, 2.05, 3.3, 4.4, 5.9];
        let mut total = 0.0;
        for i in 0..cuts.len() {
            let band = BandRegion::new(cuts[i], cuts[(i + 1) % cuts.len()]);
            total += band_mass(&phi, &g, &band, Measure::Flat, None).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_validation() {
        let g = grid();
        let phi = vec![1.0; 256];
        assert!(band_mass(&phi, &g, &BandRegion::new(1.0, 1.0 + 2.0 * PI), Measure::Flat, None).is_err());
        assert!(band_mass(&phi, &g, &BandRegion::new(1.0, 1.05), Measure::Flat, None).is_err());
        assert!(band_mass(&phi, &g, &BandRegion::new(1.0, 2.0), Measure::Volume, None).is_err());
    }
}
