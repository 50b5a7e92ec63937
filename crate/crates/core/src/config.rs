//! Run-configuration files.
//!
//! The format is TOML restricted to flat sections of key/value pairs. Unknown
//! sections and keys are errors. A complete file:
//!
//! ```toml
//! [potential]
//! kind = "double_well"          # or "polynomial"
//! coeffs = [0.25, 0.0, -0.5, 0.0, 0.25]   # F, ascending powers (polynomial only)
//! gamma = [-1.0, 1.0]
//!
//! [grid]
//! J = 256
//! length = 1.0
//!
//! [scheme]
//! kind = "semi_implicit"        # "explicit", "convex_splitting"
//! epsilon = 0.01
//! dt = "auto"                   # or a number; "auto" resolves to dt_max
//! steps = 10000
//! record_every = 1
//!
//! [initial]
//! kind = "random_uniform"       # "sine_wave", "tanh_front"
//! seed = 42
//!
//! [output]
//! path = "out"
//!
//! [sweep]                       # only read by `sweep`
//! dt = [0.05, 0.1, 0.25, 0.5]   # or lo/hi/count for a geometric grid
//! steps = 1000
//!
//! [converge]                    # only read by `converge`
//! final_time = 0.1
//! ladder = [[1e-2, 0.001953125], [5e-3, 0.001953125]]   # (dt, dx) pairs
//! reference = [1.953125e-5, 0.001953125]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiment::{ConvergenceConfig, DtChoice, RunConfig, Rung, SweepConfig};
use crate::potential::{PotentialKind, PotentialSpec};
use crate::scheme::{GridSpec, InitialCondition, NewtonParams, SchemeKind};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    potential: PotentialSection,
    grid: GridSection,
    scheme: SchemeSection,
    initial: InitialCondition,
    #[serde(default)]
    output: OutputSection,
    sweep: Option<SweepSection>,
    converge: Option<ConvergeSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSection {
    kind: String,
    coeffs: Option<Vec<f64>>,
    gamma: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(rename = "J")]
    points: usize,
    length: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DtField {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeSection {
    kind: SchemeKind,
    epsilon: f64,
    dt: DtField,
    steps: u64,
    #[serde(default = "default_record_every")]
    record_every: u64,
    newton_tol: Option<f64>,
    newton_max_iters: Option<usize>,
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    dt: Option<Vec<f64>>,
    lo: Option<f64>,
    hi: Option<f64>,
    count: Option<usize>,
    steps: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergeSection {
    final_time: f64,
    ladder: Vec<[f64; 2]>,
    reference: [f64; 2],
}

/// A parsed configuration file with overrides applied.
#[derive(Debug, Clone)]
pub struct Config {
    file: ConfigFile,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides::<&str>(path, &[])
    }

    pub fn load_with_overrides<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides::<&str>(text, &[])
    }

    /// Overrides are `section.key=value`; a bare `key=value` is accepted when
    /// exactly one section already defines `key`. Later overrides win.
    pub fn parse_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov.as_ref())?;
        }
        let file: ConfigFile = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        Ok(Self { file })
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let sec = &self.file.potential;
        let kind =
            match sec.kind.as_str() {
                "double_well" => {
                    if sec.coeffs.is_some() {
                        return Err(Error::config(
                            "potential.coeffs is only valid for kind = \"polynomial\"",
                        ));
                    }
                    PotentialKind::DoubleWell
                }
                "polynomial" => PotentialKind::Polynomial(sec.coeffs.clone().ok_or_else(|| {
                    Error::config("potential.coeffs is required for a polynomial")
                })?),
                other => return Err(Error::config(format!("unknown potential.kind {other:?}"))),
            };
        let [lo, hi] = match (&kind, sec.gamma) {
            (_, Some(g)) => g,
            (PotentialKind::DoubleWell, None) => [-1.0, 1.0],
            (PotentialKind::Polynomial(_), None) => {
                return Err(Error::config(
                    "potential.gamma is required for a polynomial",
                ))
            }
        };
        PotentialSpec::new(kind, lo, hi).map_err(|e| Error::config(e.to_string()))
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let f = &self.file;
        let grid = GridSpec::new(f.grid.points, f.grid.length)
            .map_err(|e| Error::config(e.to_string()))?;
        let dt = match &f.scheme.dt {
            DtField::Value(v) => DtChoice::Fixed(*v),
            DtField::Keyword(k) if k == "auto" => DtChoice::Auto,
            DtField::Keyword(k) => {
                return Err(Error::config(format!(
                    "scheme.dt must be a number or \"auto\", got {k:?}"
                )))
            }
        };
        let defaults = NewtonParams::default();
        let cfg = RunConfig {
            potential: self.potential()?,
            grid,
            scheme: f.scheme.kind,
            epsilon: f.scheme.epsilon,
            dt,
            steps: f.scheme.steps,
            record_every: f.scheme.record_every,
            initial: f.initial,
            output: f.output.path.clone(),
            newton: NewtonParams {
                tol: f.scheme.newton_tol.unwrap_or(defaults.tol),
                max_iters: f.scheme.newton_max_iters.unwrap_or(defaults.max_iters),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let base = self.run_config()?;
        let sec = self
            .file
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("missing [sweep] section"))?;
        let dt_grid = match (&sec.dt, sec.lo, sec.hi, sec.count) {
            (Some(list), None, None, None) => list.clone(),
            (None, Some(lo), Some(hi), Some(count)) => geometric_grid(lo, hi, count)?,
            _ => {
                return Err(Error::config(
                    "[sweep] needs either dt = [...] or all of lo, hi, count",
                ))
            }
        };
        let steps = sec.steps.unwrap_or(base.steps);
        let cfg = SweepConfig {
            base,
            dt_grid,
            steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn convergence_config(&self) -> Result<ConvergenceConfig> {
        let base = self.run_config()?;
        let sec = self
            .file
            .converge
            .as_ref()
            .ok_or_else(|| Error::config("missing [converge] section"))?;
        let rung = |[dt, dx]: [f64; 2]| Rung { dt, dx };
        let cfg = ConvergenceConfig {
            base,
            final_time: sec.final_time,
            ladder: sec.ladder.iter().copied().map(rung).collect(),
            reference: rung(sec.reference),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) || (count == 1 && hi != lo) {
        return Err(Error::config(format!(
            "geometric dt grid needs 0 < lo <= hi and count >= 1, got lo={lo} hi={hi} count={count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    let mut grid: Vec<f64> = (0..count).map(|k| lo * ratio.powi(k as i32)).collect();
    grid[count - 1] = hi;
    Ok(grid)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());

    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s.to_string(), f.to_string()),
        None => {
            let owners: Vec<&String> = table
                .iter()
                .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key)))
                .map(|(s, _)| s)
                .collect();
            match owners.as_slice() {
                [only] => ((*only).clone(), key.to_string()),
                [] => {
                    return Err(Error::config(format!(
                        "override key {key:?} matches no section"
                    )))
                }
                _ => {
                    return Err(Error::config(format!(
                        "override key {key:?} is ambiguous; qualify it as section.{key}"
                    )))
                }
            }
        }
    };
    if field.contains('.') || field.is_empty() || section.is_empty() {
        return Err(Error::config(format!(
            "override key {key:?} must be section.key"
        )));
    }
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| Value::Table(Table::new()));
    let sec = entry
        .as_table_mut()
        .ok_or_else(|| Error::config(format!("{section} is not a section")))?;
    sec.insert(field, value);
    Ok(())
}
