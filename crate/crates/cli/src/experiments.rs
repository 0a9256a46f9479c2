//! Experiment drivers. Each returns plain data; writing files is left to
//! the runner.

use rayon::prelude::*;
use serde::Serialize;
use stula_core::isoperimetry::{
    check_c_assumptions, discretize_generator, find_critical_points, linear_fit, morse_report,
    spectral_gap, CAssumptionReport, CriticalPointSearch, MorseReport, SeedGrid,
};
use stula_core::potentials::{
    verify_convexity_at_infinity, verify_dissipativity, verify_growth, verify_local_lipschitz,
    CheckReport,
};
use stula_core::reference::{
    excess_risk, excess_risk_quadrature, grid_reference, kl_divergence, sliced_w2, tv_distance, w2_1d,
    Histogram, W2Target,
};
use stula_core::sampler::{
    lambda_max, second_moment_bound, simulate, verify_drift_lemmas_at_default_steps,
};
use stula_core::{
    ChainConfig, GridDensity, GridSpec, MetricReport, PotentialSpec, SampleBatch, SpectrumResult,
};

use crate::config::Metric;
use crate::error::{CliError, CliResult};

/// Relative change between the trailing two 10% windows below which a run
/// counts as plateaued.
pub const PLATEAU_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub max_second_moment: f64,
    pub final_second_moment: f64,
    pub final_fourth_moment: f64,
    /// Uniform-in-time bound on the second moment for sTULA, when the
    /// potential declares dissipativity.
    pub second_moment_bound: Option<f64>,
    pub diverged_chains: usize,
    pub first_nonfinite_step: Option<usize>,
}

impl MomentSummary {
    pub fn from_batch(p: &PotentialSpec, cfg: &ChainConfig, b: &SampleBatch) -> Self {
        let finite = |v: &&f64| v.is_finite();
        Self {
            max_second_moment: b.second_moment.iter().filter(finite).fold(0.0, |m, v| m.max(*v)),
            final_second_moment: *b.second_moment.last().unwrap_or(&f64::NAN),
            final_fourth_moment: *b.fourth_moment.last().unwrap_or(&f64::NAN),
            second_moment_bound: second_moment_bound(p, cfg.beta, cfg.init.second_moment()).ok(),
            diverged_chains: b.diverged_chains,
            first_nonfinite_step: b.first_nonfinite_step,
        }
    }
}

/// Distances of a sample set to the grid reference plus the excess risk.
pub fn sample_metrics(
    p: &PotentialSpec,
    samples: &[f64],
    reference: Option<&GridDensity>,
    metrics: &[Metric],
    projections: usize,
    seed: u64,
) -> CliResult<Vec<MetricReport>> {
    let mut out = Vec::new();
    let d = p.dim();
    for m in metrics {
        match m {
            Metric::Kl | Metric::Tv => {
                let g = reference.ok_or_else(|| CliError::field("grid", "KL/TV need a reference grid"))?;
                let h = Histogram::from_samples(&g.grid, samples)?;
                out.push(if *m == Metric::Kl {
                    kl_divergence(&h, g)?
                } else {
                    tv_distance(&h, g)?
                });
            }
            Metric::W2 => {
                let g = reference.ok_or_else(|| CliError::field("grid", "W2 needs a reference grid"))?;
                if d == 1 {
                    out.push(w2_1d(samples, W2Target::Grid(g))?);
                } else {
                    let n = samples.len() / d;
                    let exact = g.sample(n, seed);
                    out.push(sliced_w2(samples, &exact, d, projections, seed)?);
                }
            }
            Metric::ExcessRisk => out.push(excess_risk(samples, p)?),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    #[serde(skip)]
    pub batch: SampleBatch,
    pub n_draws: usize,
    pub metrics: Vec<MetricReport>,
    pub moments: MomentSummary,
}

pub fn run_sample(
    p: &PotentialSpec,
    cfg: &ChainConfig,
    grid: Option<&GridSpec>,
    metrics: &[Metric],
    projections: usize,
) -> CliResult<SampleOutcome> {
    let batch = simulate(p, cfg, &[])?;
    if batch.diverged_chains == cfg.n_chains {
        return Err(CliError::from_core(stula_core::Error::Diverged {
            first_nonfinite_step: batch.first_nonfinite_step.unwrap_or(0),
        }));
    }
    let reference = grid.map(|g| grid_reference(p, cfg.beta, g)).transpose()?;
    let samples = finite_rows(&batch);
    let metrics = sample_metrics(p, &samples, reference.as_ref(), metrics, projections, cfg.seed)?;
    let moments = MomentSummary::from_batch(p, cfg, &batch);
    Ok(SampleOutcome {
        n_draws: samples.len() / p.dim(),
        batch,
        metrics,
        moments,
    })
}

/// Draws of surviving chains only.
fn finite_rows(b: &SampleBatch) -> Vec<f64> {
    if !b.diverged {
        return b.samples.clone();
    }
    b.rows()
        .filter(|r| r.iter().all(|v| v.is_finite()))
        .flatten()
        .copied()
        .collect()
}

/// Draws collected at iterations in `[from, to)`, pooled over chains.
fn window(cfg: &ChainConfig, b: &SampleBatch, from: usize, to: usize) -> Vec<f64> {
    let per = cfg.draws_per_chain();
    let d = b.dim;
    let mut out = Vec::new();
    if per == 0 {
        return out;
    }
    for chain in b.samples.chunks_exact(per * d) {
        for (j, row) in chain.chunks_exact(d).enumerate() {
            let it = cfg.burn_in + (j + 1) * cfg.thin;
            if it >= from && it < to {
                out.extend_from_slice(row);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `−slope` of `log(KL − plateau)` against `n·λ`.
    pub rate: f64,
    pub plateau: f64,
    pub points_used: usize,
    /// False when no decaying segment above three times the plateau exists.
    pub ok: bool,
}

/// Exponential decay rate of a KL trace given as `(time, kl)` pairs.
///
/// The plateau is the mean of the trailing 10% of the trace; the fit uses
/// the leading run of points above three times the plateau.
pub fn kl_decay_rate_fit(trace: &[(f64, f64)]) -> RateFit {
    let fail = |plateau| RateFit {
        rate: f64::NAN,
        plateau,
        points_used: 0,
        ok: false,
    };
    if trace.len() < 4 {
        return fail(f64::NAN);
    }
    let tail = (trace.len() / 10).max(1);
    let plateau = trace[trace.len() - tail..].iter().map(|p| p.1).sum::<f64>() / tail as f64;
    let seg: Vec<(f64, f64)> = trace
        .iter()
        .take_while(|p| p.1 > 3.0 * plateau)
        .map(|&(t, kl)| (t, (kl - plateau).ln()))
        .collect();
    if seg.len() < 3 || !(plateau >= 0.0) {
        return fail(plateau);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = seg.iter().copied().unzip();
    let (slope, _) = linear_fit(&x, &y);
    RateFit {
        rate: -slope,
        plateau,
        points_used: seg.len(),
        ok: slope.is_finite() && slope < 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: usize,
    pub time: f64,
    pub kl: f64,
    pub tv: f64,
}

/// KL/TV of the cross-chain law at `points` evenly spaced iterations
/// (including step 0) against the reference.
pub fn kl_trace(
    p: &PotentialSpec,
    cfg: &ChainConfig,
    reference: &GridDensity,
    points: usize,
) -> CliResult<(Vec<TracePoint>, SampleBatch)> {
    let points = points.max(2);
    let mut cps: Vec<usize> = (0..points)
        .map(|i| (i as f64 * cfg.n_steps as f64 / (points - 1) as f64).round() as usize)
        .collect();
    cps.dedup();
    let batch = simulate(p, cfg, &cps)?;
    let mut trace = Vec::with_capacity(cps.len());
    for snap in &batch.snapshots {
        let live: Vec<f64> = snap
            .states
            .chunks_exact(p.dim())
            .filter(|r| r.iter().all(|v| v.is_finite()))
            .flatten()
            .copied()
            .collect();
        let h = Histogram::from_samples(&reference.grid, &live)?;
        trace.push(TracePoint {
            step: snap.step,
            time: snap.step as f64 * cfg.lambda,
            kl: kl_divergence(&h, reference)?.value,
            tv: tv_distance(&h, reference)?.value,
        });
    }
    Ok((trace, batch))
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub n_steps: usize,
    pub n_draws: usize,
    pub plateau_kl: f64,
    pub plateau_tv: f64,
    pub empty_bins: usize,
    /// KL of the last and second-to-last 10% windows.
    pub window_kl: (f64, f64),
    pub plateaued: bool,
    /// Fitted decay rate and the horizon criterion `n·λ·rate ≥ 5`, when a
    /// trace was requested.
    pub fitted_rate: Option<f64>,
    pub horizon_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub kl_ratio: f64,
    pub tv_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaSweep {
    pub beta: f64,
    pub rows: Vec<LambdaRow>,
    pub ratios: Vec<RatioRow>,
}

/// Runs sTULA at each stepsize over the same continuous-time horizon and
/// records the plateau distances.
pub fn lambda_sweep(
    p: &PotentialSpec,
    configs: &[ChainConfig],
    grid: &GridSpec,
    trace_points: Option<usize>,
) -> CliResult<LambdaSweep> {
    if configs.len() < 2 {
        return Err(CliError::field("lambdas", "a lambda sweep needs at least 2 stepsizes"));
    }
    let beta = configs[0].beta;
    let lmax = lambda_max(p)?;
    let reference = grid_reference(p, beta, grid)?;
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        if cfg.lambda > lmax && !cfg.allow_large_step {
            return Err(CliError::from_core(stula_core::Error::StepsizeTooLarge {
                lambda: cfg.lambda,
                lambda_max: lmax,
            }));
        }
        let (batch, fitted_rate) = match trace_points {
            Some(k) => {
                let (trace, batch) = kl_trace(p, cfg, &reference, k)?;
                let pts: Vec<(f64, f64)> = trace.iter().map(|t| (t.time, t.kl)).collect();
                let fit = kl_decay_rate_fit(&pts);
                (batch, fit.ok.then_some(fit.rate))
            }
            None => (simulate(p, cfg, &[])?, None),
        };
        let pooled = finite_rows(&batch);
        let h = Histogram::from_samples(grid, &pooled)?;
        let kl = kl_divergence(&h, &reference)?;
        let tv = tv_distance(&h, &reference)?;
        let n = cfg.n_steps;
        let w_last = window(cfg, &batch, n - n / 10, n + 1);
        let w_prev = window(cfg, &batch, n - 2 * (n / 10), n - n / 10);
        let kl_of = |s: &[f64]| -> CliResult<f64> {
            Ok(kl_divergence(&Histogram::from_samples(grid, s)?, &reference)?.value)
        };
        let (k_last, k_prev) = (kl_of(&w_last)?, kl_of(&w_prev)?);
        let plateaued = ((k_last - k_prev) / k_prev).abs() < PLATEAU_TOLERANCE;
        rows.push(LambdaRow {
            lambda: cfg.lambda,
            n_steps: n,
            n_draws: pooled.len() / p.dim(),
            plateau_kl: kl.value,
            plateau_tv: tv.value,
            empty_bins: kl.empty_bins.unwrap_or(0),
            window_kl: (k_last, k_prev),
            plateaued,
            fitted_rate,
            horizon_ok: fitted_rate.map(|r| n as f64 * cfg.lambda * r >= 5.0),
        });
    }
    let ratios = rows
        .windows(2)
        .map(|w| RatioRow {
            lambda_a: w[0].lambda,
            lambda_b: w[1].lambda,
            kl_ratio: w[0].plateau_kl / w[1].plateau_kl,
            tv_ratio: w[0].plateau_tv / w[1].plateau_tv,
        })
        .collect();
    Ok(LambdaSweep { beta, rows, ratios })
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaSamplingRow {
    pub beta: f64,
    pub lambda: f64,
    pub n_chains: usize,
    pub fit: RateFit,
    pub final_kl: f64,
    pub final_tv: f64,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

/// KL decay traces and fitted rates across inverse temperatures.
pub fn beta_sweep_sampling(
    p: &PotentialSpec,
    configs: &[ChainConfig],
    grid: &GridSpec,
    trace_points: usize,
) -> CliResult<Vec<BetaSamplingRow>> {
    configs
        .iter()
        .map(|cfg| {
            let reference = grid_reference(p, cfg.beta, grid)?;
            let (trace, _) = kl_trace(p, cfg, &reference, trace_points)?;
            let pts: Vec<(f64, f64)> = trace.iter().map(|t| (t.time, t.kl)).collect();
            let last = trace.last().cloned().expect("at least two trace points");
            Ok(BetaSamplingRow {
                beta: cfg.beta,
                lambda: cfg.lambda,
                n_chains: cfg.n_chains,
                fit: kl_decay_rate_fit(&pts),
                final_kl: last.kl,
                final_tv: last.tv,
                trace,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub beta: f64,
    pub lambda: f64,
    pub n_draws: usize,
    pub excess_risk: f64,
    /// Standard error from the spread of per-chain means.
    pub std_error: f64,
    /// `∫u dπ_β − u*` on the reference grid, when one is configured.
    pub quadrature: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
    /// Least-squares slope of `log(excess risk)` against `log β`.
    pub log_log_slope: f64,
    /// Every consecutive increase is within one combined standard error.
    pub non_increasing_within_se: bool,
}

pub fn excess_risk_vs_beta(
    p: &PotentialSpec,
    configs: &[ChainConfig],
    grid: Option<&GridSpec>,
) -> CliResult<RiskTable> {
    let u_star = p
        .known_minimum()
        .ok_or_else(|| {
            CliError::from_core(stula_core::Error::MissingMetadata {
                potential: p.id().to_string(),
                field: "known_minimum",
            })
        })?
        .value;
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let batch = simulate(p, cfg, &[])?;
        let d = p.dim();
        let per = cfg.draws_per_chain();
        let mut chain_means = Vec::new();
        if per > 0 {
            for chain in batch.samples.chunks_exact(per * d) {
                if chain.iter().all(|v| v.is_finite()) {
                    let s: f64 = chain.chunks_exact(d).map(|x| p.objective().value(x)).sum();
                    chain_means.push(s / per as f64 - u_star);
                }
            }
        }
        let m = chain_means.len() as f64;
        if chain_means.len() < 2 {
            return Err(CliError::field("n_chains", "need at least 2 surviving chains with draws"));
        }
        let mean = chain_means.iter().sum::<f64>() / m;
        let var = chain_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let quadrature = match grid {
            Some(g) if d <= 2 => Some(excess_risk_quadrature(&grid_reference(p, cfg.beta, g)?, p)?),
            _ => None,
        };
        rows.push(RiskRow {
            beta: cfg.beta,
            lambda: cfg.lambda,
            n_draws: chain_means.len() * per,
            excess_risk: mean,
            std_error: (var / m).sqrt(),
            quadrature,
        });
    }
    let non_increasing_within_se = rows.windows(2).all(|w| {
        w[1].excess_risk - w[0].excess_risk <= (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt()
    });
    let log_log_slope = if rows.len() >= 2 && rows.iter().all(|r| r.excess_risk > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.beta.ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.excess_risk.ln()).collect();
        linear_fit(&x, &y).0
    } else {
        f64::NAN
    };
    Ok(RiskTable {
        rows,
        log_log_slope,
        non_increasing_within_se,
    })
}

/// Spectral gaps at each inverse temperature; sweep points run in parallel
/// and are returned in input order.
pub fn spectrum_sweep(
    p: &PotentialSpec,
    betas: &[f64],
    grid: &GridSpec,
    k: usize,
) -> CliResult<Vec<SpectrumResult>> {
    betas
        .par_iter()
        .map(|&beta| {
            let op = discretize_generator(p, beta, grid)?;
            Ok(spectral_gap(&op, k)?)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: String,
    /// Stepsize for drift checks.
    pub lambda: Option<f64>,
    pub holds: bool,
    pub worst_margin: f64,
    pub n_tested: usize,
    pub evidence: &'static str,
}

impl CheckRow {
    fn new(r: &CheckReport, lambda: Option<f64>) -> Self {
        Self {
            check: r.check.clone(),
            lambda,
            holds: r.holds,
            worst_margin: r.worst_margin,
            n_tested: r.n_tested,
            evidence: r.evidence,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub potential: String,
    pub checks: Vec<CheckRow>,
    pub lambda_max: Option<f64>,
    pub c_assumptions: Option<CAssumptionReport>,
    pub critical_points: Option<CriticalPointSearch>,
    pub morse: Option<MorseReport>,
    pub all_hold: bool,
}

pub const DEFAULT_VALIDATION_SAMPLES: usize = 10_000;
pub const DEFAULT_VALIDATION_RADIUS: f64 = 10.0;

/// Runs every applicable assumption and drift check on a potential.
pub fn validate(p: &PotentialSpec, n_samples: usize, radius: f64, seed: u64) -> CliResult<ValidationReport> {
    let mut checks = Vec::new();
    checks.push(CheckRow::new(&verify_growth(p, n_samples, radius, seed)?, None));
    let ll = verify_local_lipschitz(p, n_samples, radius, seed)?;
    checks.push(CheckRow {
        check: ll.check,
        lambda: None,
        holds: ll.holds,
        worst_margin: ll.worst_margin,
        n_tested: ll.n_tested,
        evidence: ll.evidence,
    });
    let mut lmax = None;
    if let Some(d) = p.dissipativity() {
        checks.push(CheckRow::new(&verify_dissipativity(p, d, n_samples, radius, seed)?, None));
        lmax = Some(lambda_max(p)?);
        for (lambda, reps) in verify_drift_lemmas_at_default_steps(p, n_samples, radius, seed)? {
            checks.extend(reps.iter().map(|r| CheckRow::new(r, Some(lambda))));
        }
    }
    if let Some(c) = p.convexity_at_infinity() {
        let r = verify_convexity_at_infinity(p, c, n_samples, radius, seed)?;
        checks.push(CheckRow {
            check: r.check,
            lambda: None,
            holds: r.holds,
            worst_margin: r.worst_margin,
            n_tested: r.n_tested,
            evidence: r.evidence,
        });
    }
    let c_assumptions = Some(check_c_assumptions(p, n_samples.max(1000), radius, seed)?);
    let (critical_points, morse) = if p.dim() <= 3 {
        let reach = radius.min(10.0);
        let per_axis = match p.dim() {
            1 => 41,
            2 => 21,
            _ => 9,
        };
        let search = find_critical_points(p, &SeedGrid::cube(p.dim(), -reach, reach, per_axis), 1e-10)?;
        let morse = if search.points.is_empty() {
            None
        } else {
            Some(morse_report(&search.points)?)
        };
        (Some(search), morse)
    } else {
        (None, None)
    };
    let all_hold = checks.iter().all(|c| c.holds);
    Ok(ValidationReport {
        potential: p.id().to_string(),
        checks,
        lambda_max: lmax,
        c_assumptions,
        critical_points,
        morse,
        all_hold,
    })
}
