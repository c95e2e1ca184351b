//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::PathBuf;

use convexdp::bermudan::{LowerSampling, SweepAxis, SweepRequest};
use convexdp::{BoundKind, Grid, PutSpec};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MASS: f64 = 0.999_999_999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Table,
    SweepN,
    SweepM,
    Boundary,
    Dump,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Table => "table",
            Experiment::SweepN => "sweep-n",
            Experiment::SweepM => "sweep-m",
            Experiment::Boundary => "boundary",
            Experiment::Dump => "dump",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when given.
    pub experiment: Option<Experiment>,
    /// Overridden by `--out`.
    pub output_dir: Option<PathBuf>,
    pub put: PutSection,
    pub grid: GridSection,
    pub sampling: SamplingSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub induction: InductionSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutSection {
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    pub expiry: f64,
    pub exercise_dates: usize,
    pub spots: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKindConfig {
    LocalAverage,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    /// Sampling behind the lower bound; the upper bound always uses
    /// extreme points.
    #[serde(default = "default_kind")]
    pub kind: SamplingKindConfig,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mass")]
    pub truncation_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundConfig {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub values: Vec<usize>,
    pub bound: BoundConfig,
    pub spot: f64,
    #[serde(default)]
    pub allow_unnested: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InductionSection {
    #[serde(default)]
    pub single_projection: bool,
}

fn default_kind() -> SamplingKindConfig {
    SamplingKindConfig::LocalAverage
}

fn default_mass() -> f64 {
    DEFAULT_MASS
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Checks everything that can be checked before any numerical work.
    pub fn validate(&self, experiment: Experiment) -> Result<(), String> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(format!(
                    "config is for experiment `{}` but `{}` was requested",
                    e.as_str(),
                    experiment.as_str()
                ));
            }
        }
        self.put_spec()
            .validate()
            .map_err(|e| format!("[put] {e}"))?;
        self.grid().map_err(|e| format!("[grid] {e}"))?;
        let s = &self.sampling;
        if s.n == 0 {
            return Err("[sampling] n: must be at least 1".into());
        }
        if s.kind == SamplingKindConfig::MonteCarlo && !s.n.is_multiple_of(2) {
            return Err(format!(
                "[sampling] n: monte_carlo needs an even size, got {}",
                s.n
            ));
        }
        if !(s.truncation_mass > 0.0 && s.truncation_mass < 1.0) {
            return Err(format!(
                "[sampling] truncation_mass: must lie in (0, 1), got {}",
                s.truncation_mass
            ));
        }
        if matches!(experiment, Experiment::SweepN | Experiment::SweepM) {
            let sweep = self
                .sweep
                .as_ref()
                .ok_or_else(|| format!("missing [sweep] section for `{}`", experiment.as_str()))?;
            if sweep.values.is_empty() {
                return Err("[sweep] values: must not be empty".into());
            }
            if sweep.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err("[sweep] values: must be strictly increasing".into());
            }
            if !(sweep.spot.is_finite() && sweep.spot > 0.0) {
                return Err(format!(
                    "[sweep] spot: must be positive, got {}",
                    sweep.spot
                ));
            }
        }
        Ok(())
    }

    pub fn put_spec(&self) -> PutSpec {
        let p = &self.put;
        PutSpec {
            strike: p.strike,
            rate: p.rate,
            vol: p.vol,
            expiry: p.expiry,
            exercise_dates: p.exercise_dates,
            spots: p.spots.clone(),
        }
    }

    pub fn grid(&self) -> convexdp::Result<Grid> {
        Grid::uniform(self.grid.lo, self.grid.hi, self.grid.points)
    }

    pub fn lower_sampling(&self) -> LowerSampling {
        match self.sampling.kind {
            SamplingKindConfig::LocalAverage => LowerSampling::LocalAverage,
            SamplingKindConfig::MonteCarlo => LowerSampling::MonteCarlo {
                seed: self.sampling.seed,
            },
        }
    }

    /// Only meaningful after [`RunConfig::validate`] accepted a sweep.
    pub fn sweep_request(&self, axis: SweepAxis) -> SweepRequest {
        let sweep = self.sweep.as_ref().expect("validated");
        SweepRequest {
            axis,
            values: sweep.values.clone(),
            bound: match sweep.bound {
                BoundConfig::Lower => BoundKind::Lower,
                BoundConfig::Upper => BoundKind::Upper,
            },
            grid_lo: self.grid.lo,
            grid_hi: self.grid.hi,
            m: self.grid.points,
            n: self.sampling.n,
            mass: self.sampling.truncation_mass,
            spot: sweep.spot,
            allow_unnested: sweep.allow_unnested,
        }
    }
}
