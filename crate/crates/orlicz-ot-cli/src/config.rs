//! Declarative TOML configuration for the CLI: problem files, sweep files,
//! norm queries, and the file-backed measure/cost variants.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use orlicz_ot::experiments::{CouplingRule, ProblemTemplate, Schedule, ScheduleEntry};
use orlicz_ot::grid::{CostSpec, MeasureSpec};
use orlicz_ot::solver::{SolveMode, SolverConfig};
use orlicz_ot::young::RegularizerSpec;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError(format!("io: {e}"))
    }
}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError(format!("toml: {e}"))
    }
}

impl From<orlicz_ot::Error> for ConfigError {
    fn from(e: orlicz_ot::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn default_scale() -> f64 {
    1.0
}

/// Measure description; the `cells` variant points at a CSV of `index,mass`
/// rows relative to the config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureConfig {
    Lebesgue {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Atom {
        at: f64,
        mass: f64,
    },
    Mixture {
        parts: Vec<MeasureConfig>,
    },
    Cells {
        file: PathBuf,
    },
}

impl MeasureConfig {
    pub fn resolve(&self, base: &Path) -> ConfigResult<MeasureSpec> {
        Ok(match self {
            MeasureConfig::Lebesgue { scale } => MeasureSpec::Lebesgue { scale: *scale },
            MeasureConfig::Atom { at, mass } => MeasureSpec::Atom { at: *at, mass: *mass },
            MeasureConfig::Mixture { parts } => MeasureSpec::Mixture {
                parts: parts.iter().map(|p| p.resolve(base)).collect::<ConfigResult<_>>()?,
            },
            MeasureConfig::Cells { file } => {
                MeasureSpec::Cells { masses: read_indexed_csv(&base.join(file))? }
            }
        })
    }
}

/// `index,value` rows, in index order, comments and a header line allowed.
pub fn read_indexed_csv(path: &Path) -> ConfigResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let idx = parts.next().unwrap_or("").trim();
        let val = parts.next().unwrap_or("").trim();
        if idx.eq_ignore_ascii_case("index") {
            continue;
        }
        let idx: usize =
            idx.parse().map_err(|_| ConfigError(format!("bad index {idx:?} in {line:?}")))?;
        let val: f64 =
            val.parse().map_err(|_| ConfigError(format!("bad value {val:?} in {line:?}")))?;
        rows.push((idx, val));
    }
    rows.sort_by_key(|(i, _)| *i);
    for (expect, (i, _)) in rows.iter().enumerate() {
        if *i != expect {
            return Err(ConfigError(format!("cell indices must be 0..n, missing {expect}")));
        }
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostConfig {
    Zero,
    SqDist,
    AbsDist,
    /// CSV of `i,j,value` rows covering a full n1 x n2 matrix.
    Table { file: PathBuf },
}

impl CostConfig {
    pub fn resolve(&self, base: &Path) -> ConfigResult<CostSpec> {
        Ok(match self {
            CostConfig::Zero => CostSpec::Zero,
            CostConfig::SqDist => CostSpec::SqDist,
            CostConfig::AbsDist => CostSpec::AbsDist,
            CostConfig::Table { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
                let mut triples: Vec<(usize, usize, f64)> = Vec::new();
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') || line.starts_with('i') {
                        continue;
                    }
                    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                    if cols.len() != 3 {
                        return Err(ConfigError(format!("bad cost row {line:?}")));
                    }
                    triples.push((
                        cols[0].parse().map_err(|_| ConfigError(format!("bad i in {line:?}")))?,
                        cols[1].parse().map_err(|_| ConfigError(format!("bad j in {line:?}")))?,
                        cols[2]
                            .parse()
                            .map_err(|_| ConfigError(format!("bad value in {line:?}")))?,
                    ));
                }
                let n1 = triples.iter().map(|t| t.0).max().map_or(0, |m| m + 1);
                let n2 = triples.iter().map(|t| t.1).max().map_or(0, |m| m + 1);
                if triples.len() != n1 * n2 {
                    return Err(ConfigError(format!(
                        "cost table has {} rows for a {n1}x{n2} matrix",
                        triples.len()
                    )));
                }
                let mut entries = vec![f64::NAN; n1 * n2];
                for (i, j, v) in triples {
                    entries[i * n2 + j] = v;
                }
                CostSpec::Table { entries, n1, n2 }
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct SolverSection {
    pub tol_marginal: Option<f64>,
    pub tol_root: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub mode: Option<String>,
}

pub fn parse_mode(s: &str) -> ConfigResult<SolveMode> {
    match s {
        "auto" => Ok(SolveMode::Auto),
        "generic" => Ok(SolveMode::Generic),
        "entropy_closed_form" => Ok(SolveMode::EntropyClosedForm),
        other => Err(ConfigError(format!(
            "unknown solver mode {other:?} (auto | generic | entropy_closed_form | exact)"
        ))),
    }
}

impl SolverSection {
    /// Applies the numeric knobs; the mode string is resolved separately so
    /// the `exact` pseudo-mode can bypass the regularized solver entirely.
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(t) = self.tol_marginal {
            cfg.tol_marginal = t;
        }
        if let Some(t) = self.tol_root {
            cfg.tol_root = t;
        }
        if let Some(m) = self.max_sweeps {
            cfg.max_sweeps = m;
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct DomainSection {
    pub axis1: (f64, f64),
    pub axis2: (f64, f64),
}

/// One declarative problem file.
#[derive(Clone, Debug, Deserialize)]
pub struct ProblemConfig {
    pub level: u32,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSection,
    pub mu1: MeasureConfig,
    pub mu2: MeasureConfig,
    pub lambda1: MeasureConfig,
    pub lambda2: MeasureConfig,
    pub cost: CostConfig,
    pub regularizer: RegularizerSpec,
    pub solver: Option<SolverSection>,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> ConfigResult<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        let cfg: ProblemConfig = toml::from_str(&text)?;
        Ok((cfg, text))
    }

    pub fn template(&self, base: &Path) -> ConfigResult<ProblemTemplate> {
        Ok(ProblemTemplate {
            dom1: self.domain.axis1,
            dom2: self.domain.axis2,
            mu1: self.mu1.resolve(base)?,
            mu2: self.mu2.resolve(base)?,
            lambda1: self.lambda1.resolve(base)?,
            lambda2: self.lambda2.resolve(base)?,
            cost: self.cost.resolve(base)?,
            regularizer: self.regularizer.clone(),
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct SweepEntryConfig {
    pub k: u32,
    pub gamma: f64,
    pub delta: Option<f64>,
}

/// Sweep description: a template problem file plus an inline or CSV schedule.
#[derive(Clone, Debug, Deserialize)]
pub struct SweepConfig {
    pub rule: CouplingRule,
    pub template: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub entries: Vec<SweepEntryConfig>,
    pub schedule_csv: Option<PathBuf>,
    pub solver: Option<SolverSection>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> ConfigResult<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        let cfg: SweepConfig = toml::from_str(&text)?;
        Ok((cfg, text))
    }

    pub fn schedule(&self, base: &Path) -> ConfigResult<Schedule> {
        let mut entries: Vec<ScheduleEntry> = self
            .entries
            .iter()
            .map(|e| ScheduleEntry { level: e.k, gamma: e.gamma, delta: e.delta })
            .collect();
        if let Some(csv) = &self.schedule_csv {
            let path = base.join(csv);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with('k') {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() < 2 {
                    return Err(ConfigError(format!("bad schedule row {line:?}")));
                }
                entries.push(ScheduleEntry {
                    level: cols[0]
                        .parse()
                        .map_err(|_| ConfigError(format!("bad level in {line:?}")))?,
                    gamma: cols[1]
                        .parse()
                        .map_err(|_| ConfigError(format!("bad gamma in {line:?}")))?,
                    delta: match cols.get(2) {
                        Some(s) if !s.is_empty() => Some(
                            s.parse()
                                .map_err(|_| ConfigError(format!("bad delta in {line:?}")))?,
                        ),
                        _ => None,
                    },
                });
            }
        }
        Ok(Schedule::new(self.rule, entries)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionConfig {
    Constant { value: f64 },
    Cells { file: PathBuf },
}

/// Configuration of a Luxemburg-norm query.
#[derive(Clone, Debug, Deserialize)]
pub struct NormConfig {
    pub domain: (f64, f64),
    pub level: u32,
    #[serde(default = "default_scale")]
    pub bound: f64,
    #[serde(default)]
    pub seed: u64,
    pub measure: MeasureConfig,
    pub function: FunctionConfig,
    pub regularizer: RegularizerSpec,
}

impl NormConfig {
    pub fn load(path: &Path) -> ConfigResult<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        let cfg: NormConfig = toml::from_str(&text)?;
        Ok((cfg, text))
    }
}
