//! Config-file schema: strict JSON in, validated domain objects out.
//!
//! Parsing is strict twice over: serde rejects unknown keys at every
//! level (typos fail loudly instead of silently using defaults), and the
//! conversion into domain objects revalidates through the same
//! constructors the library uses, so a config can never smuggle in a
//! state the API would refuse. Big integers travel as decimal strings
//! because JSON numbers stop being exact at 2^53.

use crate::construction::{build_tower, SpacerRule, TowerSequence};
use crate::ornstein::{EnsembleConfig, SpacerDistribution, StagePlan};
use crate::trigpoly::GridPolicy;
use crate::{Error, Result};
use num_bigint::BigUint;
use serde::Deserialize;
use std::path::Path;

fn default_height_bit_cap() -> u64 {
    4096
}

fn default_grid_cap_log2() -> u32 {
    24
}

fn default_tolerance() -> f64 {
    1e-6
}

/// Top-level run configuration, one file per invocation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub depth: usize,
    #[serde(default = "default_height_bit_cap")]
    pub height_bit_cap: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid_cap_log2")]
    pub grid_cap_log2: u32,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub riesz: Option<RieszParams>,
    #[serde(default)]
    pub bourgain: Option<BourgainParams>,
    #[serde(default)]
    pub clt: Option<CltParams>,
    #[serde(default)]
    pub theta: Option<ThetaParams>,
    #[serde(default)]
    pub words: Option<WordsParams>,
    #[serde(default)]
    pub ornstein: Option<OrnsteinParams>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config parse failed: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        // Catch structural mistakes before any computation starts; the
        // numeric objects revalidate themselves on construction.
        GridPolicy::new(self.grid_cap_log2, self.tolerance)?;
        self.family.to_rule()?;
        if let Some(o) = &self.ornstein {
            o.to_ensemble(self.seed)?;
        }
        Ok(())
    }

    pub fn policy(&self) -> Result<GridPolicy> {
        GridPolicy::new(self.grid_cap_log2, self.tolerance)
    }

    pub fn build_tower(&self) -> Result<TowerSequence> {
        build_tower(&self.family.to_rule()?, self.depth, self.height_bit_cap)
    }
}

/// Spacer-rule selector; `rule` names the family, the remaining keys are
/// that family's parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Per-stage spacer lists, decimal strings.
    Explicit { stages: Vec<Vec<String>> },
    ZeroSpacers { columns: Vec<usize> },
    Geometric { scale: String },
    Staircase { base_columns: usize },
}

fn parse_biguint(text: &str, key: &str) -> Result<BigUint> {
    text.parse::<BigUint>()
        .map_err(|_| Error::Config(format!("key {key}: expected a decimal integer >= 0, got {text:?}")))
}

impl FamilyConfig {
    pub fn to_rule(&self) -> Result<SpacerRule> {
        match self {
            FamilyConfig::Explicit { stages } => {
                let mut parsed = Vec::with_capacity(stages.len());
                for (k, row) in stages.iter().enumerate() {
                    let mut spacers = Vec::with_capacity(row.len());
                    for (i, s) in row.iter().enumerate() {
                        spacers.push(parse_biguint(s, &format!("family.stages[{k}][{i}]"))?);
                    }
                    parsed.push(spacers);
                }
                Ok(SpacerRule::Explicit { stages: parsed })
            }
            FamilyConfig::ZeroSpacers { columns } => {
                Ok(SpacerRule::ZeroSpacers { columns: columns.clone() })
            }
            FamilyConfig::Geometric { scale } => {
                Ok(SpacerRule::Geometric { scale: parse_biguint(scale, "family.scale")? })
            }
            FamilyConfig::Staircase { base_columns } => {
                Ok(SpacerRule::Staircase { base_columns: *base_columns })
            }
        }
    }
}

/// Parameters of the `riesz` subcommand: partial-product masses plus an
/// L1 estimate over a stage selection.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszParams {
    /// Largest partial product to check; defaults to the tower depth.
    #[serde(default)]
    pub max_partial: Option<usize>,
    /// Stages of the L1 product; defaults to `1..=max_partial`.
    #[serde(default)]
    pub selection: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BourgainParams {
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Inclusive stage window the greedy may draw from; defaults to the
    /// whole tower.
    #[serde(default)]
    pub window_lo: Option<usize>,
    #[serde(default)]
    pub window_hi: Option<usize>,
}

fn default_budget() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltParams {
    pub stage: usize,
    /// Grid exponent for the pushforward law; defaults to the stage's
    /// exactness grid under the cap.
    #[serde(default)]
    pub grid_log2: Option<u32>,
    /// Restriction arcs as [start, end) fractions of the circle;
    /// defaults to the full circle.
    #[serde(default)]
    pub arcs: Option<Vec<(f64, f64)>>,
    /// Tail threshold x for the deviation comparison; skipped if absent.
    #[serde(default)]
    pub tail_x: Option<f64>,
    #[serde(default = "default_csv_rows")]
    pub max_csv_rows: usize,
}

fn default_csv_rows() -> usize {
    4096
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaParams {
    pub stage: usize,
    pub x: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordsParams {
    pub stage: usize,
}

/// Offset distribution selector for ensemble configs.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum XiConfig {
    /// Uniform on `{-radius, ..., radius}`.
    Uniform { radius: u64 },
    PointMass { value: i64 },
    /// Explicit pmf table.
    Table { support: Vec<i64>, probs: Vec<f64> },
}

impl XiConfig {
    pub fn to_distribution(&self) -> Result<SpacerDistribution> {
        match self {
            XiConfig::Uniform { radius } => Ok(SpacerDistribution::uniform(*radius)),
            XiConfig::PointMass { value } => Ok(SpacerDistribution::point_mass(*value)),
            XiConfig::Table { support, probs } => {
                SpacerDistribution::new(support.clone(), probs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub p: usize,
    pub t: u64,
    #[serde(default)]
    pub top: u64,
    pub xi: XiConfig,
}

/// Parameters of the `ornstein` subcommand. Stage plans come either as
/// an explicit `plans` list or as one `constant` plan repeated `depth`
/// times; exactly one of the two forms must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrnsteinParams {
    #[serde(default)]
    pub plans: Option<Vec<PlanConfig>>,
    #[serde(default)]
    pub constant: Option<PlanConfig>,
    #[serde(default = "default_ensemble_depth")]
    pub depth: usize,
    /// Stage the estimators analyze.
    #[serde(default)]
    pub stage: usize,
    #[serde(default = "default_gap_samples")]
    pub gap_samples: usize,
    #[serde(default = "default_clt_samples")]
    pub clt_samples: usize,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
}

fn default_ensemble_depth() -> usize {
    1
}

fn default_gap_samples() -> usize {
    1000
}

fn default_clt_samples() -> usize {
    10_000
}

fn default_t0() -> f64 {
    1.0
}

fn default_histogram_bins() -> usize {
    41
}

impl OrnsteinParams {
    pub fn to_ensemble(&self, seed: u64) -> Result<EnsembleConfig> {
        let plans: Vec<StagePlan> = match (&self.plans, &self.constant) {
            (Some(list), None) => list
                .iter()
                .map(|p| {
                    Ok(StagePlan { p: p.p, t: p.t, top: p.top, xi: p.xi.to_distribution()? })
                })
                .collect::<Result<_>>()?,
            (None, Some(c)) => {
                let xi = c.xi.to_distribution()?;
                (0..self.depth)
                    .map(|_| StagePlan { p: c.p, t: c.t, top: c.top, xi: xi.clone() })
                    .collect()
            }
            _ => {
                return Err(Error::Config(
                    "key ornstein: exactly one of `plans` or `constant` must be given".into(),
                ))
            }
        };
        EnsembleConfig::new(plans, seed)
    }
}
