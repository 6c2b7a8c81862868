//! Run configuration.
//!
//! The file format is TOML. Every section and key is optional; omitted keys
//! take the defaults below.
//!
//! ```toml
//! [profile]
//! name = "power-max"     # catalog name, or "sampled" with `csv`
//! params = [2.0]
//! period = 6.283185307179586
//! # csv = "curve.csv"    # columns x,A[,dA,d2A]; used when name = "sampled"
//!
//! [grid]
//! n = 1024               # eigensolve grid for spectra and mode families
//! scheme = "spectral"    # fd2 | fd4 | spectral
//! min_n = 1024           # rate sweeps: n = clamp(next_pow2(points_per_inverse_h / h))
//! max_n = 4096
//! points_per_inverse_h = 64.0
//!
//! [sweep]
//! h_max = 0.02
//! h_min = 0.00125
//! h_count = 9            # geometric
//! lambda_max = 300.0
//! k_max = 40
//!
//! [classify]
//! grid_size = 4096
//! tol = 1e-8
//! cap = 64
//! max_order = 10
//!
//! [microlocal]
//! x_halfwidth = 1.5
//! xi_halfwidth = 0.5
//! taper = 0.25
//! range_threshold = 0.5
//!
//! [experiments]
//! bands = [[2.6416, 3.6416], [-0.5, 0.5], [1.0, 2.0]]
//! family_ks = [5, 8, 12, 18, 27, 40, 60, 90, 135, 200, 290]
//! vanishing_degree = 6
//! eps_accept = 0.2
//! wavefront_threshold = 1e-4
//! uniform_ratio = 10.0
//! uniform_min_mass = 0.05
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::ClassifyOptions;
use crate::error::{Error, Result};
use crate::experiments::{BandRegion, DichotomyOptions};
use crate::microlocal::{GridPolicy, PhaseSpaceWindow};
use crate::profiles::{catalog_profile_with_period, GeneratingCurve};
use crate::spectral::Scheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub name: String,
    pub params: Vec<f64>,
    pub period: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection { name: "nondeg".into(), params: vec![], period: 2.0 * std::f64::consts::PI, csv: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub scheme: Scheme,
    pub min_n: usize,
    pub max_n: usize,
    pub points_per_inverse_h: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let p = GridPolicy::default();
        GridSection {
            n: 1024,
            scheme: Scheme::Spectral,
            min_n: p.min_n,
            max_n: p.max_n,
            points_per_inverse_h: p.points_per_inverse_h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub h_max: f64,
    pub h_min: f64,
    pub h_count: usize,
    pub lambda_max: f64,
    pub k_max: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { h_max: 1.0 / 50.0, h_min: 1.0 / 800.0, h_count: 9, lambda_max: 300.0, k_max: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicrolocalSection {
    pub x_halfwidth: f64,
    pub xi_halfwidth: f64,
    pub taper: f64,
    pub range_threshold: f64,
}

impl Default for MicrolocalSection {
    fn default() -> Self {
        MicrolocalSection {
            x_halfwidth: crate::microlocal::DEFAULT_X_HALFWIDTH,
            xi_halfwidth: crate::microlocal::DEFAULT_XI_HALFWIDTH,
            taper: crate::microlocal::DEFAULT_TAPER,
            range_threshold: crate::microlocal::DEFAULT_RANGE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsSection {
    pub bands: Vec<[f64; 2]>,
    pub family_ks: Vec<i64>,
    pub vanishing_degree: i32,
    pub eps_accept: f64,
    pub wavefront_threshold: f64,
    pub uniform_ratio: f64,
    pub uniform_min_mass: f64,
}

impl Default for ExperimentsSection {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        let d = DichotomyOptions::default();
        ExperimentsSection {
            bands: vec![[pi - 0.5, pi + 0.5], [-0.5, 0.5], [1.0, 2.0]],
            family_ks: vec![5, 8, 12, 18, 27, 40, 60, 90, 135, 200, 290],
            vanishing_degree: d.vanishing_degree,
            eps_accept: d.eps_accept,
            wavefront_threshold: d.wavefront_threshold,
            uniform_ratio: crate::experiments::DEFAULT_UNIFORM_RATIO,
            uniform_min_mass: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: ProfileSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub classify: ClassifyOptions,
    pub microlocal: MicrolocalSection,
    pub experiments: ExperimentsSection,
    pub output: OutputSection,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads, parses and validates. Relative CSV paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(csv), Some(dir)) = (&cfg.profile.csv, path.parent()) {
            if csv.is_relative() {
                cfg.profile.csv = Some(dir.join(csv));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded. The output
    /// section does not take part.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.profile;
        if !(p.period.is_finite() && p.period > 0.0) {
            return Err(bad(format!("profile.period must be positive, got {}", p.period)));
        }
        if p.name == "sampled" {
            let csv = p.csv.as_ref().ok_or_else(|| bad("profile.csv is required for a sampled profile".into()))?;
            if !csv.is_file() {
                return Err(bad(format!("profile.csv {} does not exist", csv.display())));
            }
        } else {
            catalog_profile_with_period(&p.name, &p.params, p.period).map_err(|e| bad(format!("profile: {e}")))?;
        }
        let g = &self.grid;
        if g.n < 64 || !g.n.is_power_of_two() {
            return Err(bad(format!("grid.n must be a power of two >= 64, got {}", g.n)));
        }
        if !(g.min_n.is_power_of_two() && g.max_n.is_power_of_two() && 64 <= g.min_n && g.min_n <= g.max_n) {
            return Err(bad(format!("grid.min_n/max_n must be powers of two with 64 <= min_n <= max_n, got {}/{}", g.min_n, g.max_n)));
        }
        if !(g.points_per_inverse_h > 0.0) {
            return Err(bad("grid.points_per_inverse_h must be positive".into()));
        }
        let s = &self.sweep;
        if !(s.h_min > 0.0 && s.h_max > s.h_min && s.h_max < 1.0) {
            return Err(bad(format!("sweep needs 0 < h_min < h_max < 1, got {} and {}", s.h_min, s.h_max)));
        }
        if s.h_count < 5 || s.h_max / s.h_min < 8.0 {
            return Err(bad("sweep needs at least 5 h values spanning a factor 8".into()));
        }
        if !(s.lambda_max > 0.0) {
            return Err(bad("sweep.lambda_max must be positive".into()));
        }
        let c = &self.classify;
        if c.grid_size < 4096 || !(c.tol > 0.0 && c.tol < 1e-3) || !(1..=10).contains(&c.max_order) || c.cap == 0 {
            return Err(bad("classify: need grid_size >= 4096, 0 < tol < 1e-3, 1 <= max_order <= 10, cap >= 1".into()));
        }
        let m = &self.microlocal;
        if !(m.x_halfwidth > 0.0 && m.xi_halfwidth > 0.0 && (0.0..1.0).contains(&m.taper) && m.range_threshold > 0.0 && m.range_threshold <= 1.0) {
            return Err(bad("microlocal: halfwidths must be positive, taper in [0,1), range_threshold in (0,1]".into()));
        }
        let e = &self.experiments;
        for [a, b] in &e.bands {
            if !(a.is_finite() && b.is_finite()) || (b - a).rem_euclid(p.period) == 0.0 {
                return Err(bad(format!("band ({a}, {b}) is degenerate")));
            }
        }
        if e.family_ks.is_empty() || e.family_ks.iter().any(|k| *k <= 0) {
            return Err(bad("experiments.family_ks must be non-empty and positive".into()));
        }
        if e.vanishing_degree < 1 || !(e.eps_accept >= 0.0) || !(e.wavefront_threshold > 0.0) || !(e.uniform_ratio >= 1.0) || !(e.uniform_min_mass >= 0.0) {
            return Err(bad("experiments: thresholds out of range".into()));
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<GeneratingCurve> {
        match &self.profile.csv {
            Some(path) if self.profile.name == "sampled" => {
                let text = std::fs::read_to_string(path)?;
                GeneratingCurve::from_csv(&text)
            }
            _ => catalog_profile_with_period(&self.profile.name, &self.profile.params, self.profile.period),
        }
    }

    /// Geometric sweep from `h_max` down to `h_min`.
    pub fn h_sequence(&self) -> Vec<f64> {
        let s = &self.sweep;
        let r = (s.h_min / s.h_max).ln();
        (0..s.h_count).map(|j| s.h_max * (r * j as f64 / (s.h_count - 1) as f64).exp()).collect()
    }

    pub fn grid_policy(&self) -> GridPolicy {
        GridPolicy { min_n: self.grid.min_n, max_n: self.grid.max_n, points_per_inverse_h: self.grid.points_per_inverse_h }
    }

    pub fn bands(&self) -> Vec<BandRegion> {
        self.experiments.bands.iter().map(|[a, b]| BandRegion::new(*a, *b)).collect()
    }

    pub fn dichotomy_options(&self) -> DichotomyOptions {
        DichotomyOptions {
            vanishing_degree: self.experiments.vanishing_degree,
            eps_accept: self.experiments.eps_accept,
            wavefront_threshold: self.experiments.wavefront_threshold,
        }
    }

    /// Window template with the configured halfwidths at the given centre.
    pub fn window_at(&self, x_center: f64, x_halfwidth: f64) -> PhaseSpaceWindow {
        PhaseSpaceWindow {
            x_center,
            x_halfwidth,
            xi_center: 0.0,
            xi_halfwidth: self.microlocal.xi_halfwidth,
            taper: self.microlocal.taper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn roundtrip_is_exact() {
        let text = "[profile]\nname = \"power-max\"\nparams = [3.0]\n[sweep]\nh_count = 7\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("[profile\nname=").is_err());
        assert!(RunConfig::from_toml("[grid]\nbogus = 1\n").is_err());
        let cfg = RunConfig::from_toml("[profile]\nname = \"power-max\"\nparams = [1.0]\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_toml("[sweep]\nh_min = 0.01\nh_max = 0.02\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_toml("[profile]\nname = \"sampled\"\ncsv = \"/nonexistent.csv\"\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_sweep_matches_microlocal_default() {
        let hs = RunConfig::default().h_sequence();
        for (a, b) in hs.iter().zip(crate::microlocal::default_h_sweep()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
