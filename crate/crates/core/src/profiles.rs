//! Generating curves `A(x)` of periodic surfaces of revolution.
//!
//! The metric is `ds² = dx² + A(x)² dθ²` on the torus `S¹_x × S¹_θ`. Three
//! kinds of source are supported:
//!
//! * the built-in catalog, evaluated in closed form through [`Jet`]s so that
//!   any number of derivatives of `V0 = A⁻²` is available exactly;
//! * a user supplied potential `v0` with its first two derivatives
//!   ([`construct_from_v0`]);
//! * sampled curves, differentiated spectrally ([`GeneratingCurve::from_samples`]).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{self, TrigInterpolant};
use crate::jet::Jet;

/// Highest derivative order the catalog jets are expanded to.
pub const MAX_JET_ORDER: usize = 24;

/// Grid used to certify the positive floor of `A`.
pub const FLOOR_GRID: usize = 1 << 16;
const FLOOR_MARGIN: f64 = 1e-9;

/// Drop of the catalog potentials below their top level.
const CATALOG_DROP: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    ClosedForm,
    CompositeWithFlatPieces,
    GevreyFlat,
    Sampled,
}

/// Built-in profiles, one per critical-element type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CatalogProfile {
    /// `A ≡ 1`.
    Flat,
    /// `A = 2 + cos x`: nondegenerate maximum of `V0` at π, minimum at 0.
    Nondeg,
    /// `V0 = 1 − ¾ sin^{2m}(x/2)`.
    PowerMax { m: u32 },
    /// `V0 = ½ − ¼ sin^{2m₂+1}(x)`.
    Inflection { m2: u32 },
    /// `V0 ≡ 1` on `[−a, a]`, `exp(−1/tᵖ)` shoulders, flat floor around π.
    Cylinder { a: f64, p: f64 },
    /// `V0 = 1 − ¾ exp(1 − |sin(x/2)|^{−p})`, infinitely flat at 0.
    GevreyFlat { p: f64 },
}

impl CatalogProfile {
    pub fn tag(&self) -> &'static str {
        match self {
            CatalogProfile::Flat => "flat",
            CatalogProfile::Nondeg => "nondeg",
            CatalogProfile::PowerMax { .. } => "power-max",
            CatalogProfile::Inflection { .. } => "inflection",
            CatalogProfile::Cylinder { .. } => "cylinder",
            CatalogProfile::GevreyFlat { .. } => "gevrey-flat",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CatalogProfile::Flat | CatalogProfile::Nondeg => vec![],
            CatalogProfile::PowerMax { m } => vec![m as f64],
            CatalogProfile::Inflection { m2 } => vec![m2 as f64],
            CatalogProfile::Cylinder { a, p } => vec![a, p],
            CatalogProfile::GevreyFlat { p } => vec![p],
        }
    }

    pub fn kind(&self) -> CurveKind {
        match self {
            CatalogProfile::Cylinder { .. } => CurveKind::CompositeWithFlatPieces,
            CatalogProfile::GevreyFlat { .. } => CurveKind::GevreyFlat,
            _ => CurveKind::ClosedForm,
        }
    }

    /// The six catalog entries with their default parameters.
    pub fn defaults() -> Vec<CatalogProfile> {
        vec![
            CatalogProfile::Flat,
            CatalogProfile::Nondeg,
            CatalogProfile::PowerMax { m: 2 },
            CatalogProfile::Inflection { m2: 1 },
            CatalogProfile::Cylinder { a: 0.5, p: 2.0 },
            CatalogProfile::GevreyFlat { p: 2.0 },
        ]
    }

    fn from_tag(name: &str, params: &[f64]) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::ParameterOutOfRange(format!(
                    "`{name}` takes {k} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let integer = |v: f64, what: &str| -> Result<u32> {
            if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::ParameterOutOfRange(format!("{what} must be an integer, got {v}")))
            }
        };
        match name {
            "flat" => want(0).map(|_| CatalogProfile::Flat),
            "nondeg" => want(0).map(|_| CatalogProfile::Nondeg),
            "power-max" => {
                want(1)?;
                Ok(CatalogProfile::PowerMax { m: integer(params[0], "m")? })
            }
            "inflection" => {
                want(1)?;
                Ok(CatalogProfile::Inflection { m2: integer(params[0], "m2")? })
            }
            "cylinder" => {
                want(2)?;
                Ok(CatalogProfile::Cylinder { a: params[0], p: params[1] })
            }
            "gevrey-flat" => {
                want(1)?;
                Ok(CatalogProfile::GevreyFlat { p: params[0] })
            }
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }

    fn check(&self, period: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::ParameterOutOfRange(msg));
        match *self {
            CatalogProfile::PowerMax { m } if !(2..=10).contains(&m) => {
                bad(format!("power-max requires 2 <= m <= 10, got {m}"))
            }
            CatalogProfile::Inflection { m2 } if !(1..=10).contains(&m2) => {
                bad(format!("inflection requires 1 <= m2 <= 10, got {m2}"))
            }
            CatalogProfile::Cylinder { a, p } => {
                if !(a > 0.0 && a < period / 4.0) {
                    bad(format!("cylinder requires 0 < a < period/4, got a = {a}"))
                } else if !(p >= 1.0 && p.is_finite()) {
                    bad(format!("cylinder requires p >= 1, got {p}"))
                } else {
                    Ok(())
                }
            }
            CatalogProfile::GevreyFlat { p } if !(p >= 1.0 && p.is_finite()) => {
                bad(format!("gevrey-flat requires p >= 1, got {p}"))
            }
            _ => Ok(()),
        }
    }

    /// `V0` as a jet in the rescaled variable `u ∈ (−π, π]`.
    fn v0_in_u(&self, u: &Jet, period: f64) -> Jet {
        let order = u.order();
        match *self {
            CatalogProfile::Flat => Jet::constant(1.0, order),
            CatalogProfile::Nondeg => self.a_in_u(u, period).powf(-2.0),
            CatalogProfile::PowerMax { m } => {
                let s = u.scale(0.5).sin().powi(2 * m);
                Jet::constant(1.0, order) - s.scale(CATALOG_DROP)
            }
            CatalogProfile::Inflection { m2 } => {
                let s = u.sin().powi(2 * m2 + 1);
                Jet::constant(0.5, order) - s.scale(0.25)
            }
            CatalogProfile::Cylinder { a, p } => {
                let a_u = a * 2.0 * PI / period;
                let w = 0.5 * (PI - a_u);
                let d = if u.value() < 0.0 { -u } else { u.clone() };
                let t = d.offset(-a_u).scale(1.0 / w);
                Jet::constant(1.0, order) - smooth_step(&t, p).scale(CATALOG_DROP)
            }
            CatalogProfile::GevreyFlat { p } => {
                let s = u.scale(0.5).sin();
                let s = if s.value() < 0.0 { -s } else { s };
                Jet::constant(1.0, order) - flat_bump(&s, p).scale(CATALOG_DROP)
            }
        }
    }

    fn a_in_u(&self, u: &Jet, period: f64) -> Jet {
        match self {
            CatalogProfile::Flat => Jet::constant(1.0, u.order()),
            CatalogProfile::Nondeg => u.cos().offset(2.0),
            _ => self.v0_in_u(u, period).powf(-0.5),
        }
    }
}

/// `exp(1 − s^{−p})` for `s > 0`, identically zero at `s = 0`.
fn flat_bump(s: &Jet, p: f64) -> Jet {
    if s.value() <= 0.0 {
        return Jet::zero(s.order());
    }
    s.powf(-p).scale(-1.0).offset(1.0).exp()
}

/// Smooth step from 0 (t ≤ 0) to 1 (t ≥ 1) built from `exp(−1/tᵖ)`.
fn smooth_step(t: &Jet, p: f64) -> Jet {
    let order = t.order();
    if t.value() <= 0.0 {
        return Jet::zero(order);
    }
    if t.value() >= 1.0 {
        return Jet::constant(1.0, order);
    }
    let f = |s: &Jet| s.powf(-p).scale(-1.0).exp();
    let left = f(t);
    let right = f(&(-t).offset(1.0));
    &left / &(&left + &right)
}

/// Plain-text profile description: catalog name, parameters and period.
///
/// The compact form is `name(p1,p2)`; [`fmt::Display`] writes the three-line
/// key–value form
///
/// ```text
/// name = cylinder
/// params = 0.5, 2
/// period = 6.283185307179586
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * PI
}

impl ProfileSpec {
    pub fn new(name: &str, params: &[f64]) -> Self {
        ProfileSpec { name: name.to_string(), params: params.to_vec(), period: 2.0 * PI }
    }

    /// Parses the compact `name(p1,p2)` form.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidProfile(format!("unbalanced parentheses in `{s}`")))?;
                (&s[..i], parse_list(inner)?)
            }
            None => (s, vec![]),
        };
        Ok(ProfileSpec { name: name.trim().to_string(), params, period: 2.0 * PI })
    }

    pub fn compact(&self) -> String {
        if self.params.is_empty() {
            self.name.clone()
        } else {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
            format!("{}({})", self.name, ps.join(","))
        }
    }

    pub fn build(&self) -> Result<GeneratingCurve> {
        catalog_profile_with_period(&self.name, &self.params, self.period)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidProfile(format!("bad number `{t}`"))))
        .collect()
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "params = {}", ps.join(", "))?;
        writeln!(f, "period = {}", self.period)
    }
}

impl FromStr for ProfileSpec {
    type Err = Error;

    /// Accepts either the key–value form or the compact form.
    fn from_str(s: &str) -> Result<Self> {
        if !s.contains('=') {
            return ProfileSpec::parse_compact(s);
        }
        let mut name = None;
        let mut params = vec![];
        let mut period = 2.0 * PI;
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidProfile(format!("expected `key = value`, got `{line}`")))?;
            match k.trim() {
                "name" => name = Some(v.trim().to_string()),
                "params" => params = parse_list(v)?,
                "period" => {
                    period = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidProfile(format!("bad period `{}`", v.trim())))?
                }
                other => return Err(Error::InvalidProfile(format!("unknown key `{other}`"))),
            }
        }
        let name = name.ok_or_else(|| Error::InvalidProfile("missing `name`".into()))?;
        Ok(ProfileSpec { name, params, period })
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
struct PotentialFns {
    v0: ScalarFn,
    dv0: ScalarFn,
    d2v0: ScalarFn,
}

#[derive(Debug)]
struct SampledData {
    a: TrigInterpolant,
    v0: TrigInterpolant,
}

#[derive(Clone)]
enum Source {
    Catalog(CatalogProfile),
    Potential(PotentialFns),
    Sampled(Arc<SampledData>),
}

/// Periodic positive profile `A(x)` with its derivatives.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct GeneratingCurve {
    period: f64,
    kind: CurveKind,
    source: Source,
    epsilon_floor: f64,
}

impl fmt::Debug for GeneratingCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            Source::Catalog(c) => format!("{c:?}"),
            Source::Potential(_) => "potential".to_string(),
            Source::Sampled(s) => format!("sampled(n = {})", s.a.len()),
        };
        f.debug_struct("GeneratingCurve")
            .field("period", &self.period)
            .field("kind", &self.kind)
            .field("source", &src)
            .field("epsilon_floor", &self.epsilon_floor)
            .finish()
    }
}

/// Builds a catalog profile on the standard period `2π`.
pub fn catalog_profile(name: &str, params: &[f64]) -> Result<GeneratingCurve> {
    catalog_profile_with_period(name, params, 2.0 * PI)
}

pub fn catalog_profile_with_period(name: &str, params: &[f64], period: f64) -> Result<GeneratingCurve> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidProfile(format!("period must be positive, got {period}")));
    }
    let shape = CatalogProfile::from_tag(name, params)?;
    shape.check(period)?;
    GeneratingCurve::from_catalog(shape, period)
}

/// Inverts `V0 = A⁻²`: builds the curve `A = v0^{−1/2}` with derivatives
/// from the chain rule.
pub fn construct_from_v0<F, G, H>(period: f64, v0: F, dv0: G, d2v0: H) -> Result<GeneratingCurve>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
    G: Fn(f64) -> f64 + Send + Sync + 'static,
    H: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidProfile(format!("period must be positive, got {period}")));
    }
    let mut vmax: f64 = 0.0;
    for j in 0..FLOOR_GRID {
        let x = period * j as f64 / FLOOR_GRID as f64;
        let v = v0(x);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositivePotential { x, value: v });
        }
        vmax = vmax.max(v);
    }
    let wrap_gap = (v0(0.0) - v0(period)).abs();
    if wrap_gap > 1e-12 * vmax {
        return Err(Error::InvalidProfile(format!(
            "v0 is not {period}-periodic: |v0(0) - v0(period)| = {wrap_gap:e}"
        )));
    }
    let fns = PotentialFns { v0: Arc::new(v0), dv0: Arc::new(dv0), d2v0: Arc::new(d2v0) };
    GeneratingCurve::finish(period, CurveKind::ClosedForm, Source::Potential(fns))
}

impl GeneratingCurve {
    pub fn from_catalog(shape: CatalogProfile, period: f64) -> Result<Self> {
        GeneratingCurve::finish(period, shape.kind(), Source::Catalog(shape))
    }

    /// Sampled curve on a uniform grid `x_j = j·period/n`, differentiated
    /// spectrally.
    pub fn from_samples(period: f64, a: &[f64]) -> Result<Self> {
        if a.len() < 16 {
            return Err(Error::InvalidProfile(format!("need at least 16 samples, got {}", a.len())));
        }
        if let Some((j, &v)) = a.iter().enumerate().find(|(_, &v)| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "A must be positive, A(x_{j}) = {v} at x = {}",
                period * j as f64 / a.len() as f64
            )));
        }
        let v0: Vec<f64> = a.iter().map(|v| v.powi(-2)).collect();
        let data = SampledData { a: TrigInterpolant::new(a, period), v0: TrigInterpolant::new(&v0, period) };
        GeneratingCurve::finish(period, CurveKind::Sampled, Source::Sampled(Arc::new(data)))
    }

    fn finish(period: f64, kind: CurveKind, source: Source) -> Result<Self> {
        let mut curve = GeneratingCurve { period, kind, source, epsilon_floor: 0.0 };
        let mut amin = f64::INFINITY;
        for j in 0..FLOOR_GRID {
            let x = period * j as f64 / FLOOR_GRID as f64;
            amin = amin.min(curve.a(x));
        }
        if !(amin > FLOOR_MARGIN) {
            return Err(Error::InvalidProfile(format!("A is not bounded away from 0 (min = {amin:e})")));
        }
        curve.epsilon_floor = amin - FLOOR_MARGIN;
        Ok(curve)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor
    }

    pub fn catalog(&self) -> Option<CatalogProfile> {
        match self.source {
            Source::Catalog(c) => Some(c),
            _ => None,
        }
    }

    pub fn spec(&self) -> Option<ProfileSpec> {
        self.catalog().map(|c| ProfileSpec { name: c.tag().to_string(), params: c.params(), period: self.period })
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.source, Source::Sampled(_))
    }

    /// Highest derivative order of `V0` available in closed form, or `None`
    /// for sampled curves (spectral derivatives of any order).
    pub fn exact_derivative_order(&self) -> Option<usize> {
        match self.source {
            Source::Catalog(_) => Some(MAX_JET_ORDER),
            Source::Potential(_) => Some(2),
            Source::Sampled(_) => None,
        }
    }

    fn u_jet(&self, x: f64, order: usize) -> Jet {
        let scale = 2.0 * PI / self.period;
        let mut u = (x * scale).rem_euclid(2.0 * PI);
        if u > PI {
            u -= 2.0 * PI;
        }
        let mut j = Jet::variable(u, order);
        if order >= 1 {
            j = j.scale(scale).offset(u - u * scale);
        }
        j
    }

    /// `V0 = A⁻²` expanded at `x` (catalog curves only).
    pub fn v0_jet(&self, x: f64, order: usize) -> Option<Jet> {
        match &self.source {
            Source::Catalog(c) => Some(c.v0_in_u(&self.u_jet(x, order), self.period)),
            _ => None,
        }
    }

    /// `[A, A', A'']` at `x`.
    pub fn a_derivs(&self, x: f64) -> [f64; 3] {
        match &self.source {
            Source::Catalog(c) => {
                let d = c.a_in_u(&self.u_jet(x, 2), self.period).derivatives();
                [d[0], d[1], d[2]]
            }
            Source::Potential(f) => {
                let v = (f.v0)(x);
                let dv = (f.dv0)(x);
                let d2v = (f.d2v0)(x);
                let a = v.powf(-0.5);
                let da = -0.5 * v.powf(-1.5) * dv;
                let d2a = 0.75 * v.powf(-2.5) * dv * dv - 0.5 * v.powf(-1.5) * d2v;
                [a, da, d2a]
            }
            Source::Sampled(s) => [s.a.eval(x), s.a.eval_derivative(x, 1), s.a.eval_derivative(x, 2)],
        }
    }

    pub fn a(&self, x: f64) -> f64 {
        match &self.source {
            Source::Catalog(c) => c.a_in_u(&self.u_jet(x, 0), self.period).value(),
            Source::Potential(f) => (f.v0)(x).powf(-0.5),
            Source::Sampled(s) => s.a.eval(x),
        }
    }

    pub fn v0(&self, x: f64) -> f64 {
        match &self.source {
            Source::Catalog(c) => c.v0_in_u(&self.u_jet(x, 0), self.period).value(),
            Source::Potential(f) => (f.v0)(x),
            Source::Sampled(s) => s.v0.eval(x),
        }
    }

    /// Derivatives `V0, V0', ..., V0^(order)` at `x`.
    ///
    /// Exact for catalog curves; spectral for sampled curves; for user
    /// potentials orders above two come from Richardson-extrapolated central
    /// differences of `v0''`.
    pub fn v0_derivs(&self, x: f64, order: usize) -> Vec<f64> {
        match &self.source {
            Source::Catalog(_) => self.v0_jet(x, order).expect("catalog").derivatives(),
            Source::Sampled(s) => (0..=order).map(|k| s.v0.eval_derivative(x, k as u32)).collect(),
            Source::Potential(f) => {
                let mut out = vec![(f.v0)(x)];
                if order >= 1 {
                    out.push((f.dv0)(x));
                }
                if order >= 2 {
                    out.push((f.d2v0)(x));
                }
                let d2 = f.d2v0.clone();
                for k in 3..=order {
                    out.push(richardson_derivative(&|t| d2(t), x, k - 2));
                }
                out
            }
        }
    }

    pub fn dv0(&self, x: f64) -> f64 {
        match &self.source {
            Source::Potential(f) => (f.dv0)(x),
            _ => self.v0_derivs(x, 1)[1],
        }
    }

    /// Grid samples `(x, A, A', A'')`.
    pub fn sample(&self, n: usize) -> Vec<[f64; 4]> {
        (0..n)
            .map(|j| {
                let x = self.period * j as f64 / n as f64;
                let [a, da, d2a] = self.a_derivs(x);
                [x, a, da, d2a]
            })
            .collect()
    }

    /// Sampled CSV with header `x,A,dA,d2A`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut s = String::from("x,A,dA,d2A\n");
        for [x, a, da, d2a] in self.sample(n) {
            s.push_str(&format!("{x:.17e},{a:.17e},{da:.17e},{d2a:.17e}\n"));
        }
        s
    }

    /// Reads the CSV written by [`GeneratingCurve::to_csv`]. Only the `A`
    /// column is used; derivatives are regenerated spectrally.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = vec![];
        let mut a = vec![];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with('x')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 2 {
                return Err(Error::InvalidProfile(format!("line {}: expected at least 2 columns", i + 1)));
            }
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidProfile(format!("line {}: bad number `{t}`", i + 1)))
            };
            xs.push(parse(cols[0])?);
            a.push(parse(cols[1])?);
        }
        if xs.len() < 16 {
            return Err(Error::InvalidProfile("too few samples".into()));
        }
        let dx = xs[1] - xs[0];
        if !(dx > 0.0) {
            return Err(Error::InvalidProfile("x column must be increasing".into()));
        }
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.max(1.0) {
                return Err(Error::InvalidProfile("x column must be uniformly spaced".into()));
            }
        }
        GeneratingCurve::from_samples(dx * xs.len() as f64, &a)
    }

    /// Checks the curve invariants on an `n`-point grid.
    pub fn validate(&self, n: usize) -> ValidationReport {
        let h = self.period / n as f64;
        let samples = self.sample(n);
        let amax = samples.iter().map(|s| s[1]).fold(0.0, f64::max);
        let amin = samples.iter().map(|s| s[1]).fold(f64::INFINITY, f64::min);
        let da_scale = samples.iter().map(|s| s[2].abs()).fold(0.0, f64::max).max(1e-3 * amax);
        let d2a_scale = samples.iter().map(|s| s[3].abs()).fold(0.0, f64::max).max(1e-3 * amax);
        let mut fd_err: f64 = 0.0;
        let mut fd2_err: f64 = 0.0;
        let mut period_err: f64 = 0.0;
        for (j, s) in samples.iter().enumerate() {
            let x = s[0];
            let fd = (self.a(x + h) - self.a(x - h)) / (2.0 * h);
            fd_err = fd_err.max((fd - s[2]).abs() / da_scale);
            let fd2 = (self.a_derivs(x + h)[1] - self.a_derivs(x - h)[1]) / (2.0 * h);
            fd2_err = fd2_err.max((fd2 - s[3]).abs() / d2a_scale);
            if j % 16 == 0 {
                period_err = period_err.max((s[1] - self.a(x + self.period)).abs() / amax);
            }
        }
        ValidationReport {
            grid: n,
            a_min: amin,
            a_max: amax,
            floor_ok: amin >= self.epsilon_floor && self.epsilon_floor > 0.0,
            periodicity_error: period_err,
            derivative_error: fd_err,
            second_derivative_error: fd2_err,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub grid: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub floor_ok: bool,
    pub periodicity_error: f64,
    /// Max relative deviation of centered differences of `A` from `A'`.
    pub derivative_error: f64,
    pub second_derivative_error: f64,
}

impl ValidationReport {
    pub fn passes(&self, fd_tol: f64) -> bool {
        self.floor_ok
            && self.periodicity_error <= 1e-12
            && self.derivative_error <= fd_tol
            && self.second_derivative_error <= fd_tol
    }
}

/// k-th derivative by Richardson extrapolation of central differences with
/// steps `2^{-j}`, `j = 4..=16`. Returns the extrapolant at the step where
/// successive tableau corrections stop decreasing.
pub fn richardson_derivative(f: &dyn Fn(f64) -> f64, x: f64, k: usize) -> f64 {
    if k == 0 {
        return f(x);
    }
    let steps: Vec<f64> = (4..=16).map(|j| 2f64.powi(-j)).collect();
    let raw: Vec<f64> = steps.iter().map(|&h| central_difference(f, x, k, h)).collect();
    // Richardson tableau on h², halving steps.
    let mut best = raw[0];
    let mut best_change = f64::INFINITY;
    let mut row = raw.clone();
    for level in 1..row.len().min(6) {
        let factor = 4f64.powi(level as i32);
        let next: Vec<f64> = row.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        for w in next.windows(2) {
            let change = (w[1] - w[0]).abs();
            if change < best_change {
                best_change = change;
                best = w[1];
            }
        }
        row = next;
    }
    best
}

fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, k: usize, h: f64) -> f64 {
    // Σ_i (−1)^i C(k,i) f(x + (k/2 − i) h) / h^k
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (k as f64 / 2.0 - i as f64) * h);
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    acc / h.powi(k as i32)
}

/// Spectral `(A', A'')` from samples, used by the spectrum module when a
/// sampled curve is discretized on its own grid.
pub fn spectral_a_derivatives(a: &[f64], period: f64) -> (Vec<f64>, Vec<f64>) {
    (fourier::spectral_derivative(a, period, 1), fourier::spectral_derivative(a, period, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_is_constant_one() {
        let c = catalog_profile("flat", &[]).unwrap();
        for &x in &[0.0, 1.0, 4.0] {
            assert_eq!(c.a_derivs(x), [1.0, 0.0, 0.0]);
        }
        assert_relative_eq!(c.epsilon_floor(), 1.0 - 1e-9, epsilon = 1e-15);
    }

    #[test]
    fn nondeg_potential_curvature_at_pi() {
        let c = catalog_profile("nondeg", &[]).unwrap();
        let d = c.v0_derivs(PI, 2);
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-14);
        assert!(d[1].abs() < 1e-14);
        assert_relative_eq!(d[2], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn power_max_series() {
        // 1 − ¾ sin⁴(x/2): fourth derivative at 0 is −¾·4!/2⁴ = −9/8.
        let c = catalog_profile("power-max", &[2.0]).unwrap();
        let d = c.v0_derivs(0.0, 4);
        assert_relative_eq!(d[0], 1.0);
        assert!(d[1].abs() < 1e-15 && d[2].abs() < 1e-15 && d[3].abs() < 1e-15);
        assert_relative_eq!(d[4], -9.0 / 8.0, epsilon = 1e-12);
        // nondegenerate minimum ¼ at π with V0'' = 3/4
        let m = c.v0_derivs(PI, 2);
        assert_relative_eq!(m[0], 0.25, epsilon = 1e-14);
        assert_relative_eq!(m[2], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn cylinder_is_flat_on_plateau() {
        let c = catalog_profile("cylinder", &[0.5, 2.0]).unwrap();
        for &x in &[-0.49, 0.0, 0.3, 0.5] {
            let d = c.v0_derivs(x, 6);
            assert_eq!(d[0], 1.0);
            assert!(d[1..].iter().all(|&v| v == 0.0));
        }
        assert!(c.dv0(0.6) < 0.0 && c.dv0(-0.6) > 0.0);
        assert_relative_eq!(c.v0(PI), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn parameters_out_of_range_are_rejected() {
        assert!(matches!(catalog_profile("power-max", &[1.0]), Err(Error::ParameterOutOfRange(_))));
        assert!(matches!(catalog_profile("cylinder", &[2.0, 2.0]), Err(Error::ParameterOutOfRange(_))));
        assert!(matches!(catalog_profile("gevrey-flat", &[0.5]), Err(Error::ParameterOutOfRange(_))));
        assert!(matches!(catalog_profile("inflection", &[1.5]), Err(Error::ParameterOutOfRange(_))));
        assert!(matches!(catalog_profile("torus", &[]), Err(Error::UnknownProfile(_))));
    }

    #[test]
    fn construct_from_v0_inverts() {
        let c = construct_from_v0(2.0 * PI, |_| 1.0, |_| 0.0, |_| 0.0).unwrap();
        assert_eq!(c.a(1.0), 1.0);
        let c = construct_from_v0(
            2.0 * PI,
            |x: f64| (2.0 + x.cos()).powi(-2),
            |x: f64| 2.0 * x.sin() * (2.0 + x.cos()).powi(-3),
            |x: f64| 2.0 * x.cos() * (2.0 + x.cos()).powi(-3) + 6.0 * x.sin().powi(2) * (2.0 + x.cos()).powi(-4),
        )
        .unwrap();
        for &x in &[0.0, 0.7, 2.0, PI] {
            let [a, da, d2a] = c.a_derivs(x);
            assert_relative_eq!(a, 2.0 + x.cos(), epsilon = 1e-13);
            assert_relative_eq!(da, -x.sin(), epsilon = 1e-12);
            assert_relative_eq!(d2a, -x.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn construct_from_v0_range_oracle() {
        // v0 with range [1/9, 1]; dense sampling at 2^16 points gives A in [1, 3].
        let c = construct_from_v0(
            2.0 * PI,
            |x: f64| (2.0 + x.cos()).powi(-2),
            |x: f64| 2.0 * x.sin() * (2.0 + x.cos()).powi(-3),
            |_| 0.0,
        )
        .unwrap();
        let mut amax: f64 = 0.0;
        let mut amin = f64::INFINITY;
        for j in 0..(1 << 16) {
            let a = c.a(2.0 * PI * j as f64 / 65536.0);
            amax = amax.max(a);
            amin = amin.min(a);
        }
        assert_relative_eq!(amin, 1.0, epsilon = 1e-12);
        assert_relative_eq!(amax, 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.epsilon_floor(), 1.0 - 1e-9, epsilon = 1e-12);
    }

    #[test]
    fn construct_from_v0_rejects_bad_input() {
        let err = construct_from_v0(2.0 * PI, |x: f64| x.cos(), |x: f64| -x.sin(), |x: f64| -x.cos()).unwrap_err();
        match err {
            Error::NonPositivePotential { x, .. } => assert!(x > 1.5 && x < 1.6),
            e => panic!("unexpected {e:?}"),
        }
        let err = construct_from_v0(5.0, |x: f64| 2.0 + x.sin(), |x: f64| x.cos(), |x: f64| -x.sin()).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(_)));
    }

    #[test]
    fn spec_text_roundtrip() {
        let spec = ProfileSpec::parse_compact("cylinder(0.5, 2)").unwrap();
        assert_eq!(spec.params, vec![0.5, 2.0]);
        let text = spec.to_string();
        let back: ProfileSpec = text.parse().unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.compact(), "cylinder(0.5,2)");
    }

    #[test]
    fn csv_roundtrip_through_samples() {
        let c = catalog_profile("nondeg", &[]).unwrap();
        let back = GeneratingCurve::from_csv(&c.to_csv(128)).unwrap();
        assert!(back.is_sampled());
        for &x in &[0.1, 1.3, 4.4] {
            let a = c.a_derivs(x);
            let b = back.a_derivs(x);
            for k in 0..3 {
                assert_relative_eq!(a[k], b[k], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn richardson_recovers_higher_derivatives() {
        let f = |x: f64| x.sin();
        assert_relative_eq!(richardson_derivative(&f, 0.4, 1), 0.4f64.cos(), epsilon = 1e-9);
        assert_relative_eq!(richardson_derivative(&f, 0.4, 2), -(0.4f64.sin()), epsilon = 1e-7);
        assert_relative_eq!(richardson_derivative(&f, 0.4, 3), -(0.4f64.cos()), epsilon = 1e-4);
    }

    #[test]
    fn non_standard_period_rescales_derivatives() {
        let c = catalog_profile_with_period("power-max", &[2.0], 4.0).unwrap();
        let c0 = catalog_profile("power-max", &[2.0]).unwrap();
        let s = 2.0 * PI / 4.0;
        let x = 0.37;
        let d = c.v0_derivs(x, 2);
        let d0 = c0.v0_derivs(x * s, 2);
        assert_relative_eq!(d[0], d0[0], epsilon = 1e-14);
        assert_relative_eq!(d[1], d0[1] * s, epsilon = 1e-13);
        assert_relative_eq!(d[2], d0[2] * s * s, epsilon = 1e-12);
    }
}
