//! Tamed Langevin updates (sTULA) with ULA and classic TULA baselines, and
//! seeded multi-chain execution.

mod chains;
mod lemmas;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{dot, pow_abs, PotentialSpec};

pub use chains::{run_chains, simulate, SampleBatch, Snapshot};
pub use lemmas::{verify_drift_lemmas, verify_drift_lemmas_at_default_steps};

/// Chains whose norm exceeds this are treated as diverged.
pub const DIVERGENCE_RADIUS: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Split tamed ULA: only `f = h − a·x` is tamed.
    Stula,
    /// Plain unadjusted Langevin.
    Ula,
    /// Classic tamed ULA with drift `h / (1 + λ|h|)`.
    Tula,
}

/// Initial law of every chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum InitLaw {
    Point { x0: Vec<f64> },
    Gaussian { mean: Vec<f64>, scale: f64 },
}

impl InitLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitLaw::Point { x0 } => x0.len(),
            InitLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// `E|θ₀|²`.
    pub fn second_moment(&self) -> f64 {
        match self {
            InitLaw::Point { x0 } => dot(x0, x0),
            InitLaw::Gaussian { mean, scale } => dot(mean, mean) + mean.len() as f64 * scale * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    pub lambda: f64,
    pub n_steps: usize,
    pub n_chains: usize,
    /// Iterations discarded before collection.
    pub burn_in: usize,
    /// Collect every `thin`-th post-burn-in state.
    pub thin: usize,
    pub seed: u64,
    pub init: InitLaw,
    pub scheme: Scheme,
    /// Skip the `λ ≤ λ_max` guard for sTULA.
    #[serde(default)]
    pub allow_large_step: bool,
}

impl ChainConfig {
    /// Config with `burn_in = n_steps / 2` and `thin = 1`.
    pub fn new(
        scheme: Scheme,
        beta: f64,
        lambda: f64,
        n_steps: usize,
        n_chains: usize,
        seed: u64,
        init: InitLaw,
    ) -> Self {
        Self {
            beta,
            lambda,
            n_steps,
            n_chains,
            burn_in: n_steps / 2,
            thin: 1,
            seed,
            init,
            scheme,
            allow_large_step: false,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    /// Number of collected states per chain.
    pub fn draws_per_chain(&self) -> usize {
        (self.n_steps - self.burn_in.min(self.n_steps)) / self.thin.max(1)
    }

    /// Validates the config against a potential.
    pub fn validate(&self, p: &PotentialSpec) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", format!("must be positive, got {}", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.n_chains == 0 {
            return Err(Error::param("n_chains", "must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::param("thin", "must be at least 1"));
        }
        if self.burn_in > self.n_steps {
            return Err(Error::param(
                "burn_in",
                format!("{} exceeds n_steps = {}", self.burn_in, self.n_steps),
            ));
        }
        if self.init.dim() != p.dim() {
            return Err(Error::param(
                "init",
                format!("dimension {} does not match potential dimension {}", self.init.dim(), p.dim()),
            ));
        }
        match &self.init {
            InitLaw::Point { x0 } if x0.iter().any(|v| !v.is_finite()) => {
                return Err(Error::param("init", "non-finite starting point"));
            }
            InitLaw::Gaussian { mean, scale }
                if mean.iter().any(|v| !v.is_finite()) || !(*scale >= 0.0 && scale.is_finite()) =>
            {
                return Err(Error::param("init", "need finite mean and scale >= 0"));
            }
            _ => {}
        }
        if p.is_non_confining() {
            return Err(Error::InvalidInput(format!(
                "potential `{}` is non-confining and cannot be sampled",
                p.id()
            )));
        }
        if self.scheme == Scheme::Stula {
            let lmax = lambda_max(p)?;
            if self.lambda > lmax && !self.allow_large_step {
                return Err(Error::StepsizeTooLarge {
                    lambda: self.lambda,
                    lambda_max: lmax,
                });
            }
        }
        Ok(())
    }
}

/// Largest admissible sTULA stepsize,
/// `min{1, 1/(4(2a + 4L)²), 1/(4a)}`.
pub fn lambda_max(p: &PotentialSpec) -> Result<f64> {
    let a = p.require_dissipativity()?.a;
    Ok(lambda_max_from(a, p.growth().coefficient))
}

pub fn lambda_max_from(a: f64, l_coef: f64) -> f64 {
    let k = 2.0 * a + 4.0 * l_coef;
    1f64.min(1.0 / (4.0 * k * k)).min(1.0 / (4.0 * a))
}

/// Bound on `sup_n E|θ̄_n|²` for sTULA:
/// `E|θ₀|² + 2(2C_h² + 2d/β + 2b)/a` with `C_h = L + a`.
pub fn second_moment_bound(p: &PotentialSpec, beta: f64, init_second_moment: f64) -> Result<f64> {
    let d = p.require_dissipativity()?;
    let c_h = p.growth().coefficient + d.a;
    Ok(init_second_moment + 2.0 * (2.0 * c_h * c_h + 2.0 * p.dim() as f64 / beta + 2.0 * d.b) / d.a)
}

/// Precomputed drift for one scheme and stepsize.
#[derive(Clone)]
pub(crate) struct Drift<'a> {
    p: &'a PotentialSpec,
    scheme: Scheme,
    a: f64,
    two_l: f64,
    sqrt_lambda: f64,
    lambda: f64,
}

impl<'a> Drift<'a> {
    pub(crate) fn new(p: &'a PotentialSpec, scheme: Scheme, lambda: f64) -> Result<Self> {
        let a = match scheme {
            Scheme::Stula => p.require_dissipativity()?.a,
            _ => 0.0,
        };
        Ok(Self {
            p,
            scheme,
            a,
            two_l: 2.0 * p.growth().exponent,
            sqrt_lambda: lambda.sqrt(),
            lambda,
        })
    }

    /// Writes the scheme's drift at `x` into `out`.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.p.gradient_into(x, out);
        match self.scheme {
            Scheme::Ula => {}
            Scheme::Stula => {
                let r = dot(x, x).sqrt();
                let damp = 1.0 / (1.0 + self.sqrt_lambda * pow_abs(r, self.two_l));
                for (o, xi) in out.iter_mut().zip(x) {
                    let ax = self.a * xi;
                    *o = ax + (*o - ax) * damp;
                }
            }
            Scheme::Tula => {
                let n = dot(out, out).sqrt();
                let damp = 1.0 / (1.0 + self.lambda * n);
                out.iter_mut().for_each(|o| *o *= damp);
            }
        }
    }
}

/// `h_λ(x) = a·x + (h(x) − a·x) / (1 + √λ |x|^{2l})` with `(a, l)` from the
/// potential's metadata.
pub fn tamed_drift(p: &PotentialSpec, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    drift(p, Scheme::Stula, lambda, x)
}

/// Drift used by `scheme` at stepsize `lambda`.
pub fn drift(p: &PotentialSpec, scheme: Scheme, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    p.eval(x)?;
    let mut out = vec![0.0; x.len()];
    Drift::new(p, scheme, lambda)?.eval(x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { x: x.to_vec() });
    }
    Ok(out)
}

/// Result of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    /// False when the new state is non-finite or beyond [`DIVERGENCE_RADIUS`].
    pub finite: bool,
}

#[inline]
pub(crate) fn is_diverged(x: &[f64]) -> bool {
    let r2 = dot(x, x);
    !(r2.is_finite() && r2 <= DIVERGENCE_RADIUS * DIVERGENCE_RADIUS)
}

/// One update `θ' = θ − λ·drift(θ) + √(2λ/β)·ξ`.
pub fn step(
    scheme: Scheme,
    p: &PotentialSpec,
    beta: f64,
    lambda: f64,
    state: &[f64],
    noise: &[f64],
) -> Result<Step> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    if state.len() != p.dim() || noise.len() != p.dim() {
        return Err(Error::InvalidInput(format!(
            "state/noise length ({}, {}) does not match dimension {}",
            state.len(),
            noise.len(),
            p.dim()
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite state {state:?}")));
    }
    let kernel = Drift::new(p, scheme, lambda)?;
    let mut out = vec![0.0; state.len()];
    kernel.eval(state, &mut out);
    let sigma = (2.0 * lambda / beta).sqrt();
    for ((o, s), z) in out.iter_mut().zip(state).zip(noise) {
        *o = s - lambda * *o + sigma * z;
    }
    let finite = !is_diverged(&out);
    Ok(Step { state: out, finite })
}
