//! Discretization of the separated operators and the surface spectrum.
//!
//! Every operator here has the form `(hD)² + V` on the periodic grid, with
//! `V` a multiplication by grid values. The semiclassical form uses
//! `h = 1/|k|`, `V = V0 + h² V1`; the unscaled form of angular mode `k` uses
//! `h = 1`, `V = k² V0 + V1`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::geometry::EffectivePotential;
use crate::microlocal::{psi_partition_class, PsiClass};

/// Points per local wavelength below which an operator is flagged.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    period: f64,
}

impl Grid {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two >= 64, got {n}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Grid { n, period })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.period * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fd2,
    Fd4,
    Spectral,
}

impl Scheme {
    /// Formal order of accuracy; `None` for spectral.
    pub fn order(&self) -> Option<u32> {
        match self {
            Scheme::Fd2 => Some(2),
            Scheme::Fd4 => Some(4),
            Scheme::Spectral => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Fd2 => "fd2",
            Scheme::Fd4 => "fd4",
            Scheme::Spectral => "spectral",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd2" => Ok(Scheme::Fd2),
            "fd4" => Ok(Scheme::Fd4),
            "spectral" => Ok(Scheme::Spectral),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// `(hD)² + V` on a periodic grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    h: f64,
    grid: Grid,
    scheme: Scheme,
    potential: Vec<f64>,
    resolution_warning: bool,
}

/// Semiclassical operator `(hD)² + V0 + h² V1`.
pub fn discretize(pot: &EffectivePotential, h: f64, grid: Grid, scheme: Scheme) -> Result<DiscreteOperator> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("h must be positive, got {h}")));
    }
    let (v0, v1) = pot.sample(grid.n());
    let v = v0.iter().zip(&v1).map(|(a, b)| a + h * h * b).collect();
    let wavelength = 2.0 * std::f64::consts::PI * h / pot.v0_range().1.sqrt();
    Ok(DiscreteOperator::new(h, grid, scheme, v, wavelength))
}

/// Unscaled operator `−d²/dx² + k² V0 + V1` of angular mode `k`.
pub fn discretize_mode(pot: &EffectivePotential, k: i64, grid: Grid, scheme: Scheme) -> DiscreteOperator {
    let (v0, v1) = pot.sample(grid.n());
    let k2 = (k * k) as f64;
    let v = v0.iter().zip(&v1).map(|(a, b)| k2 * a + b).collect();
    let wavelength = 2.0 * std::f64::consts::PI / (k2 * pot.v0_range().1).sqrt().max(1.0);
    DiscreteOperator::new(1.0, grid, scheme, v, wavelength)
}

impl DiscreteOperator {
    fn new(h: f64, grid: Grid, scheme: Scheme, potential: Vec<f64>, wavelength: f64) -> Self {
        let resolution_warning = wavelength / grid.spacing() < MIN_POINTS_PER_WAVELENGTH;
        DiscreteOperator { h, grid, scheme, potential, resolution_warning }
    }

    /// Operator with an explicit potential vector.
    pub fn from_potential(h: f64, grid: Grid, scheme: Scheme, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.n() {
            return Err(Error::InvalidGrid(format!("{} potential values for n = {}", potential.len(), grid.n())));
        }
        let vmax = potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let wavelength = 2.0 * std::f64::consts::PI * h / vmax.sqrt().max(f64::MIN_POSITIVE);
        Ok(DiscreteOperator::new(h, grid, scheme, potential, wavelength))
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn resolution_warning(&self) -> bool {
        self.resolution_warning
    }

    /// First row of the circulant kinetic part `(hD)²`.
    fn kinetic_row(&self) -> Vec<f64> {
        let n = self.grid.n();
        let dx = self.grid.spacing();
        let h2 = self.h * self.h;
        let mut c = vec![0.0; n];
        match self.scheme {
            Scheme::Fd2 => {
                let s = h2 / (dx * dx);
                c[0] = 2.0 * s;
                c[1] -= s;
                c[n - 1] -= s;
            }
            Scheme::Fd4 => {
                let s = h2 / (12.0 * dx * dx);
                c[0] = 30.0 * s;
                c[1] -= 16.0 * s;
                c[n - 1] -= 16.0 * s;
                c[2] += s;
                c[n - 2] += s;
            }
            Scheme::Spectral => {
                let kap = fourier::wavenumbers(n, self.grid.period());
                let mut buf: Vec<Complex64> = kap.iter().map(|k| Complex64::new(h2 * k * k, 0.0)).collect();
                fourier::inverse(&mut buf);
                for (j, v) in buf.iter().enumerate() {
                    c[j] = v.re;
                }
                for j in 1..n / 2 {
                    let avg = 0.5 * (c[j] + c[n - j]);
                    c[j] = avg;
                    c[n - j] = avg;
                }
            }
        }
        c
    }

    /// Dense symmetric matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n();
        let c = self.kinetic_row();
        DMatrix::from_fn(n, n, |i, j| {
            let v = c[(i + n - j) % n];
            if i == j {
                v + self.potential[i]
            } else {
                v
            }
        })
    }

    /// Matrix-free application to a complex vector.
    pub fn apply_complex(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        assert_eq!(u.len(), n);
        let h2 = self.h * self.h;
        let mut out: Vec<Complex64> = match self.scheme {
            Scheme::Spectral => {
                let kap = fourier::wavenumbers(n, self.grid.period());
                let mut buf = u.to_vec();
                fourier::forward(&mut buf);
                for (v, k) in buf.iter_mut().zip(&kap) {
                    *v *= h2 * k * k;
                }
                fourier::inverse(&mut buf);
                buf
            }
            Scheme::Fd2 | Scheme::Fd4 => {
                let c = self.kinetic_row();
                let taps: Vec<(usize, f64)> = c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(m, v)| (m, *v)).collect();
                (0..n)
                    .map(|i| taps.iter().map(|&(m, w)| u[(i + n - m) % n] * w).sum())
                    .collect()
            }
        };
        for (o, (ui, vi)) in out.iter_mut().zip(u.iter().zip(&self.potential)) {
            *o += ui * vi;
        }
        out
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.apply_complex(&fourier::to_complex(u)).iter().map(|v| v.re).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit Euclidean norm, first significant component positive.
    pub vector: Vec<f64>,
    /// `‖(M − E) v‖₂`.
    pub residual: f64,
}

/// All eigenpairs with eigenvalue in `[lo, hi]`, ascending.
pub fn eigen_window(op: &DiscreteOperator, lo: f64, hi: f64) -> Vec<EigenPair> {
    let eig = SymmetricEigen::new(op.matrix());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| (lo..=hi).contains(&eig.eigenvalues[i])).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .map(|i| {
            let value = eig.eigenvalues[i];
            let mut vector: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            let vmax = vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lead = vector.iter().find(|v| v.abs() > 1e-8 * vmax).copied().unwrap_or(1.0);
            let s = lead.signum() / norm;
            vector.iter_mut().for_each(|v| *v *= s);
            let av = op.apply(&vector);
            let residual = av.iter().zip(&vector).map(|(a, v)| (a - value * v).powi(2)).sum::<f64>().sqrt();
            EigenPair { value, vector, residual }
        })
        .collect()
}

/// Joint eigenmode `φ_k(x) e^{ikθ}` of the conjugated surface Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceMode {
    pub k: i64,
    pub lambda_sq: f64,
    /// Samples of `φ_k`, normalized so that `Σ φ² dx = 1`.
    #[serde(skip)]
    pub phi: Vec<f64>,
    pub residual: f64,
    pub eta: f64,
    pub psi_class: PsiClass,
}

impl SurfaceMode {
    pub fn lambda(&self) -> f64 {
        self.lambda_sq.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceSpectrum {
    pub grid: Grid,
    pub scheme: Scheme,
    /// Sorted by `λ²`, then `k`.
    pub modes: Vec<SurfaceMode>,
    pub resolution_warning: bool,
}

/// Below this `λ²` the `k = 0` ground state (the kernel `A^{1/2}`) is dropped.
const ZERO_MODE: f64 = 1e-6;

/// Eigenpairs of mode `k` with `λ² ≤ lambda_sq_max`, as surface modes.
pub fn mode_eigenpairs(
    pot: &EffectivePotential,
    k: i64,
    lambda_sq_max: f64,
    grid: Grid,
    scheme: Scheme,
) -> Vec<SurfaceMode> {
    let op = discretize_mode(pot, k, grid, scheme);
    let dx = grid.spacing();
    let (a0, a1) = pot.a_range();
    eigen_window(&op, f64::NEG_INFINITY, lambda_sq_max)
        .into_iter()
        .filter(|p| !(k == 0 && p.value.abs() < ZERO_MODE))
        .map(|p| {
            let scale = 1.0 / dx.sqrt();
            let phi: Vec<f64> = p.vector.iter().map(|v| v * scale).collect();
            let lambda = p.value.max(0.0).sqrt();
            let eta = if lambda > 0.0 { k as f64 / lambda } else { 0.0 };
            SurfaceMode {
                k,
                lambda_sq: p.value,
                phi,
                residual: p.residual * scale,
                eta,
                psi_class: psi_partition_class(eta, a0, a1),
            }
        })
        .collect()
}

/// All modes with `|k| ≤ k_max` and `λ ≤ lambda_max`.
pub fn surface_spectrum(
    pot: &EffectivePotential,
    k_max: u32,
    lambda_max: f64,
    grid: Grid,
    scheme: Scheme,
) -> Result<SurfaceSpectrum> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let lsq = lambda_max * lambda_max;
    let (v0_min, _) = pot.v0_range();
    let (_, v1) = pot.sample(grid.n());
    let v1_min = v1.iter().copied().fold(f64::INFINITY, f64::min);
    // Modes whose potential floor already exceeds the window are skipped.
    let ks: Vec<i64> = (-(k_max as i64)..=k_max as i64)
        .filter(|k| (k * k) as f64 * v0_min + v1_min <= lsq)
        .collect();
    let per_k: Vec<Vec<SurfaceMode>> = ks.par_iter().map(|&k| mode_eigenpairs(pot, k, lsq, grid, scheme)).collect();
    let mut modes: Vec<SurfaceMode> = per_k.into_iter().flatten().collect();
    modes.sort_by(|a, b| a.lambda_sq.total_cmp(&b.lambda_sq).then(a.k.cmp(&b.k)));
    let wavelength = 2.0 * std::f64::consts::PI / lambda_max;
    Ok(SurfaceSpectrum {
        grid,
        scheme,
        modes,
        resolution_warning: wavelength / grid.spacing() < MIN_POINTS_PER_WAVELENGTH,
    })
}

impl SurfaceSpectrum {
    /// CSV `k,lambda_sq,residual,eta,psi_class`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda_sq,residual,eta,psi_class\n");
        for m in &self.modes {
            s.push_str(&format!("{},{:.15e},{:.6e},{:.15e},{}\n", m.k, m.lambda_sq, m.residual, m.eta, m.psi_class));
        }
        s
    }

    /// Binary eigenvector dump, all little-endian.
    ///
    /// File header: magic `RVLMODE1` (8 bytes), mode count `u64`. Each record:
    /// `n: u64`, `period: f64`, `k: i64`, `lambda_sq: f64`, then `n` `f64`
    /// samples of `φ_k`.
    pub fn write_eigenvectors<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"RVLMODE1")?;
        w.write_all(&(self.modes.len() as u64).to_le_bytes())?;
        for m in &self.modes {
            w.write_all(&(m.phi.len() as u64).to_le_bytes())?;
            w.write_all(&self.grid.period().to_le_bytes())?;
            w.write_all(&m.k.to_le_bytes())?;
            w.write_all(&m.lambda_sq.to_le_bytes())?;
            for v in &m.phi {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Decoded record of [`SurfaceSpectrum::write_eigenvectors`].
#[derive(Debug, Clone, PartialEq)]
pub struct DumpedMode {
    pub period: f64,
    pub k: i64,
    pub lambda_sq: f64,
    pub phi: Vec<f64>,
}

pub fn read_eigenvectors(bytes: &[u8]) -> Result<Vec<DumpedMode>> {
    let bad = || Error::InvalidProfile("truncated or malformed eigenvector dump".into());
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + len).ok_or_else(bad)?;
        pos += len;
        Ok(s)
    };
    if take(8)? != b"RVLMODE1" {
        return Err(bad());
    }
    let word = |s: &[u8]| <[u8; 8]>::try_from(s).expect("8-byte slice");
    let count = u64::from_le_bytes(word(take(8)?));
    let mut out = Vec::new();
    for _ in 0..count {
        let n = u64::from_le_bytes(word(take(8)?)) as usize;
        let period = f64::from_le_bytes(word(take(8)?));
        let k = i64::from_le_bytes(word(take(8)?));
        let lambda_sq = f64::from_le_bytes(word(take(8)?));
        let raw = take(8 * n)?;
        let phi = raw.chunks_exact(8).map(|c| f64::from_le_bytes(word(c))).collect();
        out.push(DumpedMode { period, k, lambda_sq, phi });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::effective_potential;
    use crate::profiles::catalog_profile;
    use std::f64::consts::PI;

    fn flat() -> EffectivePotential {
        effective_potential(&catalog_profile("flat", &[]).unwrap())
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::new(32, 1.0).is_err());
        assert!(Grid::new(100, 1.0).is_err());
        let g = Grid::new(128, 2.0 * PI).unwrap();
        assert_eq!(g.spacing() * 128.0, 2.0 * PI);
    }

    #[test]
    fn flat_spectral_is_exact() {
        let h = 0.1;
        let op = discretize(&flat(), h, Grid::new(64, 2.0 * PI).unwrap(), Scheme::Spectral).unwrap();
        let ev = eigen_window(&op, -1.0, 1e9);
        let mut expect: Vec<f64> = (-31i64..=32).map(|j| 1.0 + h * h * (j * j) as f64).collect();
        expect.sort_by(f64::total_cmp);
        for (p, e) in ev.iter().zip(&expect) {
            assert!((p.value - e).abs() <= 1e-12 * e, "{} vs {}", p.value, e);
        }
    }

    #[test]
    fn flat_fd2_matches_discrete_symbol() {
        let h = 0.05;
        let n = 64;
        let g = Grid::new(n, 2.0 * PI).unwrap();
        let op = discretize(&flat(), h, g, Scheme::Fd2).unwrap();
        let ev = eigen_window(&op, -1.0, 1e9);
        let dx = g.spacing();
        let mut expect: Vec<f64> = (0..n)
            .map(|j| 1.0 + 2.0 * h * h / (dx * dx) * (1.0 - (2.0 * PI * j as f64 / n as f64).cos()))
            .collect();
        expect.sort_by(f64::total_cmp);
        for (p, e) in ev.iter().zip(&expect) {
            assert!((p.value - e).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn matrices_are_symmetric_and_match_apply() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        let g = Grid::new(64, 2.0 * PI).unwrap();
        for scheme in [Scheme::Fd2, Scheme::Fd4, Scheme::Spectral] {
            let op = discretize(&pot, 0.2, g, scheme).unwrap();
            let m = op.matrix();
            assert!((&m - m.transpose()).amax() <= 1e-13);
            let u: Vec<f64> = (0..64).map(|j| ((j * 7 % 13) as f64).sin()).collect();
            let mu = &m * nalgebra::DVector::from_column_slice(&u);
            let au = op.apply(&u);
            for j in 0..64 {
                assert!((mu[j] - au[j]).abs() < 1e-10);
            }
            if scheme != Scheme::Spectral {
                // Constant vectors see only the potential.
                let one = op.apply(&vec![1.0; 64]);
                for j in 0..64 {
                    assert!((one[j] - op.potential()[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn flat_window_example() {
        let op = discretize(&flat(), 1.0, Grid::new(64, 2.0 * PI).unwrap(), Scheme::Spectral).unwrap();
        let ev = eigen_window(&op, 0.5, 2.5);
        let vals: Vec<f64> = ev.iter().map(|p| p.value).collect();
        assert_eq!(vals.len(), 3);
        for (v, e) in vals.iter().zip([1.0, 2.0, 2.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(eigen_window(&op, -5.0, -4.0).is_empty());
    }

    #[test]
    fn dump_roundtrip() {
        let pot = effective_potential(&catalog_profile("nondeg", &[]).unwrap());
        let spec = surface_spectrum(&pot, 2, 4.0, Grid::new(64, 2.0 * PI).unwrap(), Scheme::Spectral).unwrap();
        let mut buf = Vec::new();
        spec.write_eigenvectors(&mut buf).unwrap();
        let back = read_eigenvectors(&buf).unwrap();
        assert_eq!(back.len(), spec.modes.len());
        for (b, m) in back.iter().zip(&spec.modes) {
            assert_eq!((b.k, b.lambda_sq, &b.phi), (m.k, m.lambda_sq, &m.phi));
        }
        assert!(read_eigenvectors(&buf[..buf.len() - 3]).is_err());
    }
}
