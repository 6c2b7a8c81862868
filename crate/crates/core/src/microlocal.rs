//! Phase-space cutoffs and the restricted smallest singular value.
//!
//! The cutoff is the sandwich `Φ = M_χ F⁻¹ M_ψ F M_χ`: a cosine-tapered
//! window `χ` in `x` and `ψ` in the semiclassical frequency `ξ = hκ`. Writing
//! `Φ = G G*` with `G = M_χ F⁻¹ M_{√ψ}` restricted to the support of `ψ`, the
//! nonzero spectrum of `Φ` is that of the small Toeplitz matrix `G*G`, so the
//! range basis costs one eigensolve of size `|supp ψ|` instead of `n`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::CriticalElement;
use crate::error::{Error, Result};
use crate::fourier;
use crate::geometry::EffectivePotential;
use crate::spectral::{discretize, DiscreteOperator, Grid, Scheme, SurfaceMode};

pub const DEFAULT_TAPER: f64 = 0.25;
pub const DEFAULT_RANGE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_X_HALFWIDTH: f64 = 1.5;
pub const DEFAULT_XI_HALFWIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiClass {
    Psi0,
    Psi1,
    Psi2,
}

impl fmt::Display for PsiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsiClass::Psi0 => "psi0",
            PsiClass::Psi1 => "psi1",
            PsiClass::Psi2 => "psi2",
        })
    }
}

/// Angular-momentum regime of a mode with `η = k/λ`, given `A0 = min A`,
/// `A1 = max A`.
pub fn psi_partition_class(eta: f64, a0: f64, a1: f64) -> PsiClass {
    let e2 = eta * eta;
    if e2 <= 0.5 * a0 * a0 {
        PsiClass::Psi0
    } else if e2 >= 2.0 * a1 * a1 {
        PsiClass::Psi2
    } else {
        PsiClass::Psi1
    }
}

pub fn mode_psi_class(mode: &SurfaceMode, a0: f64, a1: f64) -> PsiClass {
    psi_partition_class(mode.eta, a0, a1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceWindow {
    pub x_center: f64,
    pub x_halfwidth: f64,
    pub xi_center: f64,
    pub xi_halfwidth: f64,
    #[serde(default = "default_taper")]
    pub taper: f64,
}

fn default_taper() -> f64 {
    DEFAULT_TAPER
}

impl PhaseSpaceWindow {
    pub fn new(x_center: f64, x_halfwidth: f64, xi_center: f64, xi_halfwidth: f64) -> Self {
        PhaseSpaceWindow { x_center, x_halfwidth, xi_center, xi_halfwidth, taper: DEFAULT_TAPER }
    }

    /// Window at `(x_center, 0)` with the default halfwidths.
    pub fn around(x_center: f64) -> Self {
        Self::new(x_center, DEFAULT_X_HALFWIDTH, 0.0, DEFAULT_XI_HALFWIDTH)
    }

    /// All of phase space: `Φ = I`.
    pub fn full() -> Self {
        Self::new(0.0, f64::INFINITY, 0.0, f64::INFINITY)
    }

    pub fn is_full(&self) -> bool {
        self.x_halfwidth.is_infinite() && self.xi_halfwidth.is_infinite()
    }

    /// Halfwidths must exceed four grid cells in `x` and four frequency
    /// steps `h·2π/period` in `ξ`.
    pub fn check(&self, grid: &Grid, h: f64) -> Result<()> {
        if !(0.0..1.0).contains(&self.taper) {
            return Err(Error::UnresolvableWindow(format!("taper {} outside [0, 1)", self.taper)));
        }
        if !(self.x_halfwidth > 4.0 * grid.spacing()) {
            return Err(Error::UnresolvableWindow(format!(
                "x halfwidth {} not above 4 cells ({})",
                self.x_halfwidth,
                4.0 * grid.spacing()
            )));
        }
        let dxi = h * 2.0 * std::f64::consts::PI / grid.period();
        if !(self.xi_halfwidth > 4.0 * dxi) {
            return Err(Error::UnresolvableWindow(format!(
                "xi halfwidth {} not above 4 frequency steps ({})",
                self.xi_halfwidth,
                4.0 * dxi
            )));
        }
        Ok(())
    }
}

/// 1 on `|d| ≤ w(1−τ)`, cosine roll-off to 0 at `|d| = w`.
fn taper(d: f64, w: f64, frac: f64) -> f64 {
    if w.is_infinite() {
        return 1.0;
    }
    let a = d.abs();
    let inner = w * (1.0 - frac);
    if a <= inner {
        1.0
    } else if a >= w {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (a - inner) / (w - inner)).cos())
    }
}

fn circle_offset(x: f64, c: f64, period: f64) -> f64 {
    (x - c + 0.5 * period).rem_euclid(period) - 0.5 * period
}

#[derive(Debug, Clone)]
pub struct CompressionOperator {
    pub h: f64,
    pub grid: Grid,
    pub window: PhaseSpaceWindow,
    /// Spatial window on the grid.
    pub chi: Vec<f64>,
    /// Frequency window in FFT order.
    pub psi: Vec<f64>,
}

pub fn build_compression(window: PhaseSpaceWindow, grid: Grid, h: f64) -> Result<CompressionOperator> {
    window.check(&grid, h)?;
    let period = grid.period();
    let chi = grid
        .nodes()
        .iter()
        .map(|&x| taper(circle_offset(x, window.x_center, period), window.x_halfwidth, window.taper))
        .collect();
    let psi = fourier::wavenumbers(grid.n(), period)
        .iter()
        .map(|&k| taper(h * k - window.xi_center, window.xi_halfwidth, window.taper))
        .collect();
    Ok(CompressionOperator { h, grid, window, chi, psi })
}

impl CompressionOperator {
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().zip(&self.chi).map(|(v, c)| v * c).collect();
        fourier::forward(&mut buf);
        buf.iter_mut().zip(&self.psi).for_each(|(v, p)| *v *= p);
        fourier::inverse(&mut buf);
        buf.iter_mut().zip(&self.chi).for_each(|(v, c)| *v *= c);
        buf
    }

    /// Dense `Φ`; for tests and small grids.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.grid.n();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = Complex64::new(0.0, 0.0);
        }
        m
    }

    /// Orthonormal basis (as columns) of the eigenvectors of `Φ` with
    /// eigenvalue `≥ θ·max`.
    pub fn range_basis(&self, theta: f64) -> Result<DMatrix<Complex64>> {
        let n = self.grid.n();
        let support: Vec<usize> = (0..n).filter(|&j| self.psi[j] > 0.0).collect();
        if support.is_empty() || self.chi.iter().all(|&c| c == 0.0) {
            return Err(Error::EmptyRange);
        }
        let mut c: Vec<Complex64> = self.chi.iter().map(|v| Complex64::new(v * v, 0.0)).collect();
        fourier::forward(&mut c);
        let inv_n = 1.0 / n as f64;
        let sq: Vec<f64> = support.iter().map(|&j| self.psi[j].sqrt()).collect();
        let s = support.len();
        let t = DMatrix::from_fn(s, s, |a, b| c[(support[a] + n - support[b]) % n] * (inv_n * sq[a] * sq[b]));
        let eig = SymmetricEigen::new(t);
        let mu_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(mu_max > 0.0) {
            return Err(Error::EmptyRange);
        }
        let keep: Vec<usize> = (0..s).filter(|&i| eig.eigenvalues[i] >= theta * mu_max).collect();
        let norm = (n as f64).sqrt();
        let columns: Vec<Vec<Complex64>> = keep
            .par_iter()
            .map(|&i| {
                let mut coef = vec![Complex64::new(0.0, 0.0); n];
                for (a, &j) in support.iter().enumerate() {
                    coef[j] = eig.eigenvectors[(a, i)] * sq[a];
                }
                // G v = χ · (Σ_κ e^{iκx} √ψ v_κ) / √n, scaled by 1/√μ.
                fourier::inverse(&mut coef);
                let s = norm / eig.eigenvalues[i].sqrt();
                coef.iter().zip(&self.chi).map(|(v, ch)| v * (ch * s)).collect()
            })
            .collect();
        Ok(DMatrix::from_fn(n, columns.len(), |r, col| columns[col][r]))
    }
}

/// Smallest singular value of an `n × r` complex matrix (`n ≥ r`).
fn sigma_min(m: DMatrix<Complex64>) -> f64 {
    let r = m.qr().r();
    r.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `g = σ_min((P − z) B)` with `B` the range basis of the compression of
/// `window` at the operator's `h`.
pub fn restricted_sigma_min(op: &DiscreteOperator, z: f64, window: &PhaseSpaceWindow, theta: f64) -> Result<f64> {
    let n = op.grid().n();
    if window.is_full() {
        // Φ = I: the range is everything.
        let mut m = op.matrix().map(|v| Complex64::new(v, 0.0));
        for j in 0..n {
            m[(j, j)] -= z;
        }
        return Ok(m.singular_values().iter().copied().fold(f64::INFINITY, f64::min));
    }
    let comp = build_compression(*window, op.grid(), op.h())?;
    let basis = range_basis_or_err(&comp, theta)?;
    let cols: Vec<Vec<Complex64>> = (0..basis.ncols())
        .into_par_iter()
        .map(|c| {
            let u: Vec<Complex64> = basis.column(c).iter().copied().collect();
            op.apply_complex(&u).iter().zip(&u).map(|(pu, u)| pu - u * z).collect()
        })
        .collect();
    let pb = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    Ok(sigma_min(pb))
}

fn range_basis_or_err(comp: &CompressionOperator, theta: f64) -> Result<DMatrix<Complex64>> {
    let b = comp.range_basis(theta)?;
    if b.ncols() == 0 {
        return Err(Error::EmptyRange);
    }
    Ok(b)
}

/// Admissible distance of `z` from a critical level: `0.05·(max V0 − min V0)`.
pub fn level_window(pot: &EffectivePotential) -> f64 {
    let (lo, hi) = pot.v0_range();
    0.05 * (hi - lo)
}

/// [`restricted_sigma_min`] for the semiclassical operator at `h`, with `z`
/// checked against the element's level.
pub fn restricted_sigma_min_at(
    pot: &EffectivePotential,
    elem: &CriticalElement,
    z: f64,
    h: f64,
    grid: Grid,
    window: &PhaseSpaceWindow,
    theta: f64,
) -> Result<f64> {
    let eps = level_window(pot);
    if (z - elem.level).abs() > eps {
        return Err(Error::ParameterOutOfRange(format!(
            "z = {z} is farther than {eps} from the critical level {}",
            elem.level
        )));
    }
    let op = discretize(pot, h, grid, Scheme::Spectral)?;
    restricted_sigma_min(&op, z, window, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitModel {
    /// `log g = c + α log h`.
    PurePower,
    /// `log g = c + α log h − γ log log(1/h)`; `gamma: None` fits `γ`.
    LogCorrected { gamma: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub model: FitModel,
    pub exponent: f64,
    pub log_gamma: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub h_list: Vec<f64>,
    pub reliable: bool,
}

/// Relative rise of `g` under decreasing `h` tolerated before a sweep is
/// flagged unreliable.
const MONOTONE_SLACK: f64 = 0.05;

/// Least-squares fit of `log y` against `log x` with the chosen model.
/// Requires at least 5 points with `h` spanning a factor 8.
pub fn fit_rate(h: &[f64], g: &[f64], model: FitModel) -> Result<RateFit> {
    fit_rate_with_span(h, g, model, 8.0)
}

/// [`fit_rate`] with a custom minimum span; mass fits against `1/λ` use 4.
pub fn fit_rate_with_span(h: &[f64], g: &[f64], model: FitModel, min_span: f64) -> Result<RateFit> {
    if h.len() != g.len() {
        return Err(Error::InsufficientData("h and g lengths differ".into()));
    }
    if h.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points, need at least 5", h.len())));
    }
    let (hmin, hmax) = h.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hmax / hmin >= min_span * (1.0 - 1e-12)) {
        return Err(Error::InsufficientData(format!("h spans a factor {:.3}, need {min_span}", hmax / hmin)));
    }
    if h.iter().chain(g).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InsufficientData("non-positive or non-finite sample".into()));
    }
    let lh: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let lg: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let lll: Vec<f64> = h.iter().map(|v| (1.0 / v).ln().ln()).collect();
    let rows = h.len();
    let (exponent, log_gamma, intercept, resid) = match model {
        FitModel::PurePower => {
            let (c, r) = least_squares(rows, 2, |i, j| if j == 0 { lh[i] } else { 1.0 }, |i| lg[i]);
            (c[0], 0.0, c[1], r)
        }
        FitModel::LogCorrected { gamma: Some(gm) } => {
            let (c, r) = least_squares(rows, 2, |i, j| if j == 0 { lh[i] } else { 1.0 }, |i| lg[i] + gm * lll[i]);
            (c[0], gm, c[1], r)
        }
        FitModel::LogCorrected { gamma: None } => {
            if h.iter().any(|v| *v >= 1.0 / std::f64::consts::E) {
                return Err(Error::InsufficientData("log log(1/h) needs h < 1/e".into()));
            }
            let (c, r) = least_squares(
                rows,
                3,
                |i, j| match j {
                    0 => lh[i],
                    1 => -lll[i],
                    _ => 1.0,
                },
                |i| lg[i],
            );
            (c[0], c[1], c[2], r)
        }
    };
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    let reliable = order.windows(2).all(|w| g[w[1]] <= g[w[0]] * (1.0 + MONOTONE_SLACK));
    Ok(RateFit {
        model,
        exponent,
        log_gamma,
        intercept,
        residual_rms: (resid.iter().map(|r| r * r).sum::<f64>() / rows as f64).sqrt(),
        h_list: h.to_vec(),
        reliable,
    })
}

fn least_squares(
    rows: usize,
    cols: usize,
    a: impl Fn(usize, usize) -> f64,
    b: impl Fn(usize) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let m = DMatrix::from_fn(rows, cols, &a);
    let rhs = nalgebra::DVector::from_fn(rows, |i, _| b(i));
    let coef = m.clone().svd(true, true).solve(&rhs, 1e-14).expect("SVD computed with U and V");
    let resid = &m * &coef - &rhs;
    (coef.iter().copied().collect(), resid.iter().copied().collect())
}

/// Grid size as a function of `h`: `64/h` points rounded up to a power of
/// two, clamped to `[min_n, max_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub min_n: usize,
    pub max_n: usize,
    pub points_per_inverse_h: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { min_n: 1024, max_n: 4096, points_per_inverse_h: 64.0 }
    }
}

impl GridPolicy {
    pub fn n_for(&self, h: f64) -> usize {
        let want = (self.points_per_inverse_h / h).ceil() as usize;
        want.next_power_of_two().clamp(self.min_n, self.max_n)
    }
}

/// `h_j = (1/50)·2^{−j/2}`, `j = 0..8`: from 1/50 down to 1/800.
pub fn default_h_sweep() -> Vec<f64> {
    (0..9).map(|j| (1.0 / 50.0) * 2f64.powf(-(j as f64) / 2.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSample {
    pub h: f64,
    pub g: f64,
    pub n: usize,
    pub resolution_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSweep {
    pub samples: Vec<GapSample>,
    pub fit: RateFit,
}

impl GapSweep {
    /// CSV `h,g,n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,g,n\n");
        for p in &self.samples {
            s.push_str(&format!("{:.15e},{:.15e},{}\n", p.h, p.g, p.n));
        }
        s
    }
}

/// Sweeps `h`, measures `g(h)` with the spectral scheme, and fits a rate.
pub fn gap_rate_fit(
    pot: &EffectivePotential,
    window: &PhaseSpaceWindow,
    z: f64,
    h_sequence: &[f64],
    policy: GridPolicy,
    theta: f64,
    model: FitModel,
) -> Result<GapSweep> {
    let samples = h_sequence
        .par_iter()
        .map(|&h| {
            let grid = Grid::new(policy.n_for(h), pot.period())?;
            let op = discretize(pot, h, grid, Scheme::Spectral)?;
            let g = restricted_sigma_min(&op, z, window, theta)?;
            Ok(GapSample { h, g, n: grid.n(), resolution_warning: op.resolution_warning() })
        })
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let gs: Vec<f64> = samples.iter().map(|s| s.g).collect();
    let fit = fit_rate(&hs, &gs, model)?;
    Ok(GapSweep { samples, fit })
}

/// Default window for an element: centered on it at `ξ = 0`, with the
/// default `x` halfwidth widened to cover an interval.
pub fn element_window(elem: &CriticalElement) -> PhaseSpaceWindow {
    let (a, b) = elem.interval;
    let mid = 0.5 * (a + b);
    PhaseSpaceWindow::new(mid, DEFAULT_X_HALFWIDTH.max(0.5 * (b - a) + 1.0), 0.0, DEFAULT_XI_HALFWIDTH)
}

/// Number of angular sectors carrying at least `threshold` of the total
/// mass of `u = Σ c_j φ_{k_j} e^{i k_j θ}`. Terms with equal `k` are summed
/// before measuring.
pub fn fourier_spread(terms: &[(f64, &SurfaceMode)], dx: f64, threshold: f64) -> usize {
    let masses = sector_masses(terms, dx);
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    if total == 0.0 {
        return 0;
    }
    masses.iter().filter(|(_, m)| *m >= threshold * total).count()
}

/// `(k, ‖Σ_{k_j = k} c_j φ_j‖²)` in ascending `k`.
pub fn sector_masses(terms: &[(f64, &SurfaceMode)], dx: f64) -> Vec<(i64, f64)> {
    let mut ks: Vec<i64> = terms.iter().map(|(_, m)| m.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .map(|k| {
            let mut acc: Vec<f64> = Vec::new();
            for (c, m) in terms.iter().filter(|(_, m)| m.k == k) {
                if acc.is_empty() {
                    acc = vec![0.0; m.phi.len()];
                }
                acc.iter_mut().zip(&m.phi).for_each(|(a, p)| *a += c * p);
            }
            (k, acc.iter().map(|v| v * v).sum::<f64>() * dx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::effective_potential;
    use crate::profiles::catalog_profile;
    use std::f64::consts::PI;

    #[test]
    fn psi_classes() {
        assert_eq!(psi_partition_class(0.0, 1.0, 3.0), PsiClass::Psi0);
        assert_eq!(psi_partition_class(0.7, 1.0, 3.0), PsiClass::Psi0);
        assert_eq!(psi_partition_class(0.8, 1.0, 3.0), PsiClass::Psi1);
        assert_eq!(psi_partition_class(4.3, 1.0, 3.0), PsiClass::Psi2);
    }

    #[test]
    fn taper_shape() {
        assert_eq!(taper(0.0, 1.0, 0.25), 1.0);
        assert_eq!(taper(0.75, 1.0, 0.25), 1.0);
        assert!((taper(0.875, 1.0, 0.25) - 0.5).abs() < 1e-12);
        assert_eq!(taper(1.0, 1.0, 0.25), 0.0);
        assert_eq!(taper(5.0, f64::INFINITY, 0.25), 1.0);
    }

    #[test]
    fn compression_norm_and_basis() {
        let grid = Grid::new(128, 2.0 * PI).unwrap();
        let comp = build_compression(PhaseSpaceWindow::new(1.0, 1.0, 0.2, 0.5), grid, 0.05).unwrap();
        let m = comp.matrix();
        let norm = m.singular_values().max();
        assert!(norm <= 1.0 + 1e-10);
        let b = comp.range_basis(0.5).unwrap();
        let gram = b.adjoint() * &b;
        let eye = DMatrix::<Complex64>::identity(b.ncols(), b.ncols());
        assert!((gram - eye).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-10);
        // Basis vectors are eigenvectors of Φ with eigenvalue ≥ ½.
        let pb = &m * &b;
        for c in 0..b.ncols() {
            let col = b.column(c);
            let ray = (col.adjoint() * pb.column(c))[(0, 0)].re;
            assert!(ray >= 0.5 - 1e-10);
            assert!((pb.column(c) - col * Complex64::new(ray, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn unresolvable_window_rejected() {
        let grid = Grid::new(128, 2.0 * PI).unwrap();
        assert!(matches!(
            build_compression(PhaseSpaceWindow::new(0.0, 0.1, 0.0, 0.5), grid, 0.05),
            Err(Error::UnresolvableWindow(_))
        ));
        assert!(matches!(
            build_compression(PhaseSpaceWindow::new(0.0, 1.0, 0.0, 0.1), grid, 0.05),
            Err(Error::UnresolvableWindow(_))
        ));
    }

    #[test]
    fn synthetic_power_law() {
        let h = default_h_sweep();
        let g: Vec<f64> = h.iter().map(|v| v.powf(1.5)).collect();
        let fit = fit_rate(&h, &g, FitModel::PurePower).unwrap();
        assert!((fit.exponent - 1.5).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-10 && fit.reliable);
    }

    #[test]
    fn synthetic_log_corrected() {
        let h = default_h_sweep();
        let g: Vec<f64> = h.iter().map(|v| v / (1.0 / v).ln()).collect();
        let pure = fit_rate(&h, &g, FitModel::PurePower).unwrap();
        assert!(pure.exponent > 1.0 && pure.exponent < 1.25, "{}", pure.exponent);
        let fixed = fit_rate(&h, &g, FitModel::LogCorrected { gamma: Some(1.0) }).unwrap();
        assert!(fixed.residual_rms < pure.residual_rms);
        assert!((fixed.exponent - 1.0).abs() < 1e-10);
        let free = fit_rate(&h, &g, FitModel::LogCorrected { gamma: None }).unwrap();
        assert!((free.log_gamma - 1.0).abs() < 1e-8 && (free.exponent - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_preconditions() {
        let h = [0.1, 0.05, 0.03, 0.02, 0.015];
        let g = [1.0; 5];
        assert!(fit_rate(&h, &g, FitModel::PurePower).is_err());
        let h = default_h_sweep();
        assert!(fit_rate(&h[..4], &h[..4], FitModel::PurePower).is_err());
        let mut g: Vec<f64> = h.iter().map(|v| v * v).collect();
        g[6] *= 10.0;
        assert!(!fit_rate(&h, &g, FitModel::PurePower).unwrap().reliable);
    }

    #[test]
    fn grid_policy() {
        let p = GridPolicy::default();
        assert_eq!(p.n_for(1.0 / 50.0), 4096);
        assert_eq!(p.n_for(0.5), 1024);
        assert_eq!(p.n_for(1.0 / 800.0), 4096);
    }

    #[test]
    fn full_window_is_distance_to_spectrum() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        let grid = Grid::new(64, 2.0 * PI).unwrap();
        let op = discretize(&pot, 0.1, grid, Scheme::Spectral).unwrap();
        let ev = crate::spectral::eigen_window(&op, f64::NEG_INFINITY, f64::INFINITY);
        let z = 0.61;
        let d = ev.iter().map(|p| (p.value - z).abs()).fold(f64::INFINITY, f64::min);
        let g = restricted_sigma_min(&op, z, &PhaseSpaceWindow::full(), 0.5).unwrap();
        assert!((g - d).abs() < 1e-10);
    }
}
