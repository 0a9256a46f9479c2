//! Experiment configuration files.
//!
//! A config is a flat JSON object; unknown keys are rejected. Fields that a
//! kind does not use are ignored, fields it needs are checked by
//! [`ExperimentConfig::validate`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stula_core::potentials::by_id;
use stula_core::{ChainConfig, GridSpec, InitLaw, PotentialSpec, Scheme};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Sample,
    LambdaSweep,
    BetaSweepSampling,
    SpectrumSweep,
    Validate,
    ExcessRiskVsBeta,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Sample => "sample",
            Kind::LambdaSweep => "lambda_sweep",
            Kind::BetaSweepSampling => "beta_sweep_sampling",
            Kind::SpectrumSweep => "spectrum_sweep",
            Kind::Validate => "validate",
            Kind::ExcessRiskVsBeta => "excess_risk_vs_beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Kl,
    Tv,
    W2,
    ExcessRisk,
}

/// Box and resolution of a reference grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_cells: Vec<usize>,
}

impl GridConfig {
    pub fn to_spec(&self) -> CliResult<GridSpec> {
        GridSpec::new(self.lower.clone(), self.upper.clone(), self.n_cells.clone())
            .map_err(|e| CliError::field("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub potential: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Output path prefix; files are `<prefix>.json`, `<prefix>_*.csv`.
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitLaw>,
    #[serde(default)]
    pub allow_large_step: bool,

    /// Stepsizes of a lambda sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Inverse temperatures of beta sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Continuous time `n·λ` simulated per chain in sweeps; the step count
    /// of each run is `horizon / λ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Fraction of the horizon discarded before collecting (sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_fraction: Option<f64>,
    /// Time between collected draws (sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin_time: Option<f64>,
    /// Number of law snapshots for KL traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_points: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<Metric>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projections: Option<usize>,

    /// Eigenvalue count of spectrum sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eigen: Option<usize>,

    /// Sampling budget and radius of assumption checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

pub const DEFAULT_EIGEN_COUNT: usize = 6;
pub const DEFAULT_PROJECTIONS: usize = 64;

fn need<T: Clone>(v: &Option<T>, name: &'static str, kind: Kind) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::field(name, format!("required for kind `{}`", kind.as_str())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(CliError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Canonical JSON: field order fixed by the struct, absent options
    /// omitted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn potential_spec(&self) -> CliResult<PotentialSpec> {
        by_id(&self.potential, self.dim).map_err(|e| CliError::field("potential", e.to_string()))
    }

    pub fn seed(&self) -> CliResult<u64> {
        match self.seed {
            None => Err(CliError::field("seed", "an explicit seed is required")),
            Some(0) => Err(CliError::field("seed", "seed 0 is reserved; choose a nonzero seed")),
            Some(s) => Ok(s),
        }
    }

    pub fn grid_spec(&self) -> CliResult<GridSpec> {
        need(&self.grid, "grid", self.kind)?.to_spec()
    }

    fn init_for(&self, p: &PotentialSpec) -> InitLaw {
        self.init.clone().unwrap_or(InitLaw::Point {
            x0: vec![0.0; p.dim()],
        })
    }

    /// Chain config for a single sampling run.
    pub fn chain_config(&self, p: &PotentialSpec) -> CliResult<ChainConfig> {
        let k = self.kind;
        let n_steps = need(&self.n_steps, "n_steps", k)?;
        let mut c = ChainConfig::new(
            self.scheme.unwrap_or(Scheme::Stula),
            need(&self.beta, "beta", k)?,
            need(&self.lambda, "lambda", k)?,
            n_steps,
            need(&self.n_chains, "n_chains", k)?,
            self.seed()?,
            self.init_for(p),
        );
        if let Some(b) = self.burn_in {
            c.burn_in = b;
        }
        if let Some(t) = self.thin {
            c.thin = t;
        }
        c.allow_large_step = self.allow_large_step;
        c.validate(p).map_err(CliError::from_core)?;
        Ok(c)
    }

    /// Chain config for one point of a sweep, with step counts derived from
    /// the continuous-time horizon.
    pub fn sweep_chain_config(&self, p: &PotentialSpec, beta: f64, lambda: f64) -> CliResult<ChainConfig> {
        let k = self.kind;
        let horizon = need(&self.horizon, "horizon", k)?;
        let n_steps = (horizon / lambda).round() as usize;
        let burn = self.burn_in_fraction.unwrap_or(0.5);
        let thin = match self.thin_time {
            Some(t) => ((t / lambda).round() as usize).max(1),
            None => 1,
        };
        let mut c = ChainConfig::new(
            self.scheme.unwrap_or(Scheme::Stula),
            beta,
            lambda,
            n_steps,
            need(&self.n_chains, "n_chains", k)?,
            self.seed()?,
            self.init_for(p),
        )
        .with_burn_in((burn * n_steps as f64).round() as usize)
        .with_thin(thin);
        c.allow_large_step = self.allow_large_step;
        c.validate(p).map_err(CliError::from_core)?;
        Ok(c)
    }

    pub fn metrics(&self) -> Vec<Metric> {
        self.metrics.clone().unwrap_or_else(|| vec![Metric::Kl, Metric::Tv, Metric::W2])
    }

    /// Kind-specific checks that do not need to run anything.
    pub fn validate(&self) -> CliResult<()> {
        let p = self.potential_spec()?;
        if self.output.as_os_str().is_empty() {
            return Err(CliError::field("output", "must not be empty"));
        }
        if let Some(f) = self.burn_in_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(CliError::field("burn_in_fraction", "must lie in [0, 1)"));
            }
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::field("horizon", "must be positive"));
            }
        }
        match self.kind {
            Kind::Sample => {
                self.chain_config(&p)?;
            }
            Kind::LambdaSweep => {
                let lambdas = need(&self.lambdas, "lambdas", self.kind)?;
                if lambdas.len() < 2 {
                    return Err(CliError::field("lambdas", "a lambda sweep needs at least 2 stepsizes"));
                }
                let beta = need(&self.beta, "beta", self.kind)?;
                for &l in &lambdas {
                    self.sweep_chain_config(&p, beta, l)
                        .map_err(|e| e.rename("lambdas"))?;
                }
                self.grid_spec()?;
            }
            Kind::BetaSweepSampling | Kind::ExcessRiskVsBeta => {
                let betas = need(&self.betas, "betas", self.kind)?;
                if betas.is_empty() {
                    return Err(CliError::field("betas", "must not be empty"));
                }
                let lambda = need(&self.lambda, "lambda", self.kind)?;
                for &b in &betas {
                    self.sweep_chain_config(&p, b, lambda).map_err(|e| e.rename("betas"))?;
                }
                if self.kind == Kind::BetaSweepSampling {
                    self.grid_spec()?;
                } else if p.known_minimum().is_none() {
                    return Err(CliError::field(
                        "potential",
                        format!("`{}` has no known minimum; excess risk is undefined", p.id()),
                    ));
                }
            }
            Kind::SpectrumSweep => {
                let betas = need(&self.betas, "betas", self.kind)?;
                if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0)) {
                    return Err(CliError::field("betas", "need positive inverse temperatures"));
                }
                let g = self.grid_spec()?;
                if g.dim() != p.dim() {
                    return Err(CliError::field("grid", "dimension does not match the potential"));
                }
            }
            Kind::Validate => {
                if self.n_samples.is_some_and(|n| n < 1000) {
                    return Err(CliError::field("n_samples", "need at least 1000"));
                }
                self.seed()?;
            }
        }
        Ok(())
    }
}
