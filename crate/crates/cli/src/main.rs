use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revlab::classify::classify_potential;
use revlab::config::RunConfig;
use revlab::error::Error;
use revlab::experiments::{band_mass, dichotomy_report, volume_weights, Measure, Verdict};
use revlab::geometry::{effective_potential, moment_map_csv, PhasePoint};
use revlab::profiles::{CatalogProfile, ProfileSpec};
use revlab::spectral::{surface_spectrum, Grid};
use revlab::verify::{element_rates, profile_families, run_acceptance, verify_profile};
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "revlab", version, about = "Spectral laboratory for surfaces of revolution")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Catalog profile as `name(p1,p2)` (overrides `[profile]`).
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Eigensolve grid size (overrides `grid.n`).
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    hmin: Option<f64>,
    #[arg(long, global = true)]
    hmax: Option<f64>,
    /// Band `a,b`; repeatable, replaces `experiments.bands`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    band: Vec<String>,
    /// Print the JSON artifact to stdout.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Print the CSV artifact to stdout.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Catalog listing, sampled curve and moment-map samples.
    Catalog,
    /// Critical elements of V0 with predicted exponents.
    Classify,
    /// Surface spectrum up to `sweep.lambda_max`.
    Spectrum {
        /// Also write the binary eigenvector dump.
        #[arg(long)]
        dump: bool,
    },
    /// Restricted inverse-norm sweep at each weakly unstable element.
    GapRate,
    /// Band masses of every computed surface mode.
    BandMass,
    /// Mass dichotomy reports for the profile's mode families.
    Dichotomy,
    /// Profile checks; with `--suite`, the full acceptance suite as well.
    VerifyAll {
        #[arg(long)]
        suite: bool,
    },
}

enum Failure {
    Config(String),
    Diagnostic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidProfile(_)
            | Error::UnknownProfile(_)
            | Error::ParameterOutOfRange(_)
            | Error::InvalidBand(_)
            | Error::InvalidGrid(_) => Failure::Config(e.to_string()),
            _ => Failure::Diagnostic(e.to_string()),
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &c.profile {
        let spec = ProfileSpec::parse_compact(s).map_err(|e| Failure::Config(format!("--profile: {e}")))?;
        cfg.profile.name = spec.name.clone();
        cfg.profile.params = spec.params.clone();
        cfg.profile.csv = None;
    }
    if let Some(n) = c.grid {
        cfg.grid.n = n;
    }
    if let Some(h) = c.hmin {
        cfg.sweep.h_min = h;
    }
    if let Some(h) = c.hmax {
        cfg.sweep.h_max = h;
    }
    if !c.band.is_empty() {
        cfg.experiments.bands = c
            .band
            .iter()
            .map(|s| {
                let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| {
                    Failure::Config(format!("--band expects `a,b`, got `{s}`"))
                })?;
                match v[..] {
                    [a, b] => Ok([a, b]),
                    _ => Err(Failure::Config(format!("--band expects `a,b`, got `{s}`"))),
                }
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Sink<'a> {
    dir: &'a Path,
    hash: String,
    json: bool,
    csv: bool,
}

impl Sink<'_> {
    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        fs::create_dir_all(self.dir).map_err(|e| Failure::Diagnostic(format!("{}: {e}", self.dir.display())))?;
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let dst = self.dir.join(name);
        let io = |e: std::io::Error| Failure::Diagnostic(format!("{}: {e}", dst.display()));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, &dst).map_err(io)
    }

    fn json(&self, name: &str, kind: &str, data: Value) -> Result<(), Failure> {
        let doc = json!({ "tool": "revlab", "version": VERSION, "config_hash": self.hash, "kind": kind, "data": data });
        let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
        if self.json {
            print!("{text}");
        }
        self.write(name, text.as_bytes())
    }

    fn csv(&self, name: &str, body: &str) -> Result<(), Failure> {
        let text = format!("# revlab {VERSION}\n# config_hash {}\n{body}", self.hash);
        if self.csv {
            print!("{text}");
        }
        self.write(name, text.as_bytes())
    }

    fn quiet(&self) -> bool {
        self.json || self.csv
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let cfg = load_config(&cli.common)?;
    let sink = Sink { dir: &cfg.output.dir, hash: cfg.hash(), json: cli.common.json, csv: cli.common.csv };
    let curve = cfg.curve()?;
    let pot = effective_potential(&curve);
    let period = curve.period();
    let say = |s: String| {
        if !sink.quiet() {
            println!("{s}");
        }
    };

    match cli.cmd {
        Cmd::Catalog => {
            let entries: Vec<Value> = CatalogProfile::defaults()
                .iter()
                .map(|c| {
                    let curve = revlab::profiles::catalog_profile(c.tag(), &c.params()).expect("catalog");
                    let v = curve.validate(1 << 14);
                    let p = effective_potential(&curve);
                    json!({
                        "name": c.tag(),
                        "params": c.params(),
                        "spec": curve.spec().map(|s| s.compact()),
                        "a_range": [v.a_min, v.a_max],
                        "v0_range": [p.v0_range().0, p.v0_range().1],
                        "validation": v,
                    })
                })
                .collect();
            sink.json("catalog.json", "catalog", Value::Array(entries))?;
            sink.csv("profile.csv", &curve.to_csv(1024))?;
            let (lo, hi) = pot.v0_range();
            let pts: Vec<PhasePoint> = (0..64)
                .flat_map(|i| {
                    (0..9).map(move |j| PhasePoint {
                        x: period * i as f64 / 64.0,
                        xi: -1.0 + 0.25 * j as f64,
                        eta: 1.0,
                    })
                })
                .collect();
            sink.csv("moment_map.csv", &moment_map_csv(&pot, &pts))?;
            say(format!("catalog: {} profiles; V0 of the configured profile in [{lo:.4}, {hi:.4}]", CatalogProfile::defaults().len()));
            Ok(true)
        }
        Cmd::Classify => {
            let c = classify_potential(&pot, &cfg.classify)?;
            let report = c.report();
            sink.json("classify.json", "classification", serde_json::to_value(&report).expect("json"))?;
            for e in &report {
                say(format!(
                    "{:<28} [{:.6}, {:.6}] level {:.6} exponent {}",
                    e.taxonomy,
                    e.interval.0,
                    e.interval.1,
                    e.level,
                    e.predicted_exponent_rational.clone().unwrap_or_else(|| "-".into())
                ));
            }
            Ok(true)
        }
        Cmd::Spectrum { dump } => {
            let grid = Grid::new(cfg.grid.n, period)?;
            let spec = surface_spectrum(&pot, cfg.sweep.k_max, cfg.sweep.lambda_max, grid, cfg.grid.scheme)?;
            sink.csv("spectrum.csv", &spec.to_csv())?;
            if dump {
                let mut bytes = Vec::new();
                spec.write_eigenvectors(&mut bytes).expect("in-memory write");
                sink.write("modes.bin", &bytes)?;
            }
            say(format!("spectrum: {} modes on n = {}", spec.modes.len(), grid.n()));
            if spec.resolution_warning {
                return Err(Failure::Diagnostic(format!(
                    "grid n = {} under-resolves lambda_max = {}",
                    grid.n(),
                    cfg.sweep.lambda_max
                )));
            }
            Ok(true)
        }
        Cmd::GapRate => {
            let c = classify_potential(&pot, &cfg.classify)?;
            let rates = element_rates(&cfg, &pot, &c)?;
            let mut ok = true;
            for (i, (r, s)) in rates.iter().enumerate() {
                sink.csv(&format!("gap_rate_{i}.csv"), &s.to_csv())?;
                ok &= r.verdict != Verdict::Fail;
                say(format!(
                    "{:<28} level {:.4}: exponent {:.4} (predicted {}) {:?}",
                    r.taxonomy,
                    r.level,
                    r.exponent,
                    r.predicted.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
                    r.verdict
                ));
            }
            let data: Vec<_> = rates.iter().map(|(r, _)| r).collect();
            sink.json("gap_rate.json", "rate-fits", serde_json::to_value(data).expect("json"))?;
            Ok(ok)
        }
        Cmd::BandMass => {
            let grid = Grid::new(cfg.grid.n, period)?;
            let spec = surface_spectrum(&pot, cfg.sweep.k_max, cfg.sweep.lambda_max, grid, cfg.grid.scheme)?;
            let w = volume_weights(&pot, &grid);
            let mut body = String::from("k,lambda,band,mass_flat,mass_vol\n");
            for band in cfg.bands() {
                band.check(&grid)?;
                for m in &spec.modes {
                    let f = band_mass(&m.phi, &grid, &band, Measure::Flat, None)?;
                    let v = band_mass(&m.phi, &grid, &band, Measure::Volume, Some(&w))?;
                    body.push_str(&format!("{},{:.15e},\"{}\",{:.15e},{:.15e}\n", m.k, m.lambda(), band, f, v));
                }
            }
            sink.csv("band_mass.csv", &body)?;
            say(format!("band-mass: {} modes x {} bands", spec.modes.len(), cfg.bands().len()));
            Ok(true)
        }
        Cmd::Dichotomy => {
            let c = classify_potential(&pot, &cfg.classify)?;
            let opts = cfg.dichotomy_options();
            let mut reports = Vec::new();
            for fam in profile_families(&cfg, &pot, &c)? {
                for band in cfg.bands() {
                    let r = dichotomy_report(&fam, &band, &pot, &opts)?;
                    say(format!("{:<16} {:<22} {:?} {:?}", r.family, r.band.to_string(), r.branch, r.verdict));
                    reports.push(r);
                }
            }
            let ok = reports.iter().all(|r| r.verdict != Verdict::Fail);
            sink.json("dichotomy.json", "dichotomy", serde_json::to_value(&reports).expect("json"))?;
            Ok(ok)
        }
        Cmd::VerifyAll { suite } => {
            let v = verify_profile(&cfg)?;
            let mut ok = v.pass();
            for f in &v.failures {
                say(format!("FAIL {f}"));
            }
            let mut data = json!({ "profile": v, "pass": ok });
            if suite {
                let results = run_acceptance();
                for r in &results {
                    say(r.line());
                }
                ok &= results.iter().all(|r| r.pass);
                data["acceptance"] = serde_json::to_value(&results).expect("json");
                data["pass"] = json!(ok);
            }
            sink.json("verify.json", "verification", data)?;
            say(format!("verify-all: {}", if ok { "PASS" } else { "FAIL" }));
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Diagnostic(m)) => {
            eprintln!("diagnostic: {m}");
            ExitCode::from(3)
        }
    }
}
