//! Dispatches a config to its experiment and writes the outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use stula_core::reference::grid_reference;

use crate::config::{ExperimentConfig, Kind, DEFAULT_EIGEN_COUNT, DEFAULT_PROJECTIONS};
use crate::error::{CliError, CliResult};
use crate::experiments::{self, DEFAULT_VALIDATION_RADIUS, DEFAULT_VALIDATION_SAMPLES};
use crate::record::{headers, sibling, write_file, Cell, ResultRecord, Table, Timing};

/// Directory that replaces the directory part of every output prefix.
pub const OUTPUT_DIR_ENV: &str = "STULA_OUTPUT_DIR";

/// Rows kept in the moments CSV.
const MOMENT_ROWS: usize = 1000;

#[derive(Debug)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub record_path: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunOutput {
    pub fn file(&self, suffix: &str) -> Option<&Path> {
        self.files
            .iter()
            .find(|p| p.to_string_lossy().ends_with(suffix))
            .map(PathBuf::as_path)
    }
}

pub fn resolve_prefix(output: &Path, out_dir: Option<&Path>) -> PathBuf {
    match (out_dir, output.file_name()) {
        (Some(d), Some(name)) => d.join(name),
        _ => output.to_path_buf(),
    }
}

/// Output directory override from the environment, if set and non-empty.
pub fn env_output_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

pub fn run_file(path: &Path, out_dir: Option<&Path>) -> CliResult<RunOutput> {
    run(&ExperimentConfig::load(path)?, out_dir)
}

struct Writer {
    prefix: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn table(&mut self, suffix: &str, t: &Table) -> CliResult<()> {
        let path = sibling(&self.prefix, suffix);
        t.write(&path)?;
        self.files.push(path);
        Ok(())
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("result serializes")
}

/// Runs the experiment, then writes its CSV tables, `<prefix>.json` and
/// `<prefix>.timing.json`.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> CliResult<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let p = cfg.potential_spec()?;
    let mut w = Writer {
        prefix: resolve_prefix(&cfg.output, out_dir),
        files: Vec::new(),
    };
    let mut rec = ResultRecord::new(cfg);
    let projections = cfg.projections.unwrap_or(DEFAULT_PROJECTIONS);

    match cfg.kind {
        Kind::Sample => {
            let chain = cfg.chain_config(&p)?;
            let grid = cfg.grid.as_ref().map(|g| g.to_spec()).transpose()?;
            let out = experiments::run_sample(&p, &chain, grid.as_ref(), &cfg.metrics(), projections)?;
            let mut t = Table::new(headers::SAMPLE_METRICS);
            for m in &out.metrics {
                t.push(vec![
                    m.metric.as_str().into(),
                    m.value.into(),
                    m.estimator.as_str().into(),
                    m.sample_counts.first().copied().into(),
                    m.empty_bins.into(),
                    m.std_error.into(),
                ]);
            }
            w.table("_metrics.csv", &t)?;
            let b = &out.batch;
            let n = b.second_moment.len() - 1;
            let stride = n.div_ceil(MOMENT_ROWS).max(1);
            let mut t = Table::new(headers::MOMENTS);
            for k in (0..=n).step_by(stride).chain((n % stride != 0).then_some(n)) {
                t.push(vec![k.into(), b.second_moment[k].into(), b.fourth_moment[k].into()]);
            }
            w.table("_moments.csv", &t)?;
            rec.result = serde_json::json!({ "n_draws": out.n_draws });
            rec.metrics = out.metrics;
            rec.moments = Some(out.moments);
        }
        Kind::LambdaSweep => {
            let beta = cfg.beta.expect("validated");
            let lambdas = cfg.lambdas.as_ref().expect("validated");
            let configs = lambdas
                .iter()
                .map(|&l| cfg.sweep_chain_config(&p, beta, l))
                .collect::<CliResult<Vec<_>>>()?;
            let sweep = experiments::lambda_sweep(&p, &configs, &cfg.grid_spec()?, cfg.trace_points)?;
            let mut t = Table::new(headers::LAMBDA_SWEEP);
            for r in &sweep.rows {
                t.push(vec![
                    r.lambda.into(),
                    r.n_steps.into(),
                    r.n_draws.into(),
                    r.plateau_kl.into(),
                    r.plateau_tv.into(),
                    r.empty_bins.into(),
                    r.window_kl.0.into(),
                    r.window_kl.1.into(),
                    r.plateaued.into(),
                    r.fitted_rate.into(),
                    r.horizon_ok.into(),
                ]);
            }
            w.table("_lambda_sweep.csv", &t)?;
            let mut t = Table::new(headers::LAMBDA_RATIOS);
            for r in &sweep.ratios {
                t.push(vec![r.lambda_a.into(), r.lambda_b.into(), r.kl_ratio.into(), r.tv_ratio.into()]);
            }
            w.table("_lambda_ratios.csv", &t)?;
            rec.result = to_value(&sweep);
        }
        Kind::BetaSweepSampling => {
            let lambda = cfg.lambda.expect("validated");
            let configs = cfg
                .betas
                .as_ref()
                .expect("validated")
                .iter()
                .map(|&b| cfg.sweep_chain_config(&p, b, lambda))
                .collect::<CliResult<Vec<_>>>()?;
            let rows = experiments::beta_sweep_sampling(&p, &configs, &cfg.grid_spec()?, cfg.trace_points.unwrap_or(100))?;
            let mut t = Table::new(headers::BETA_SAMPLING);
            let mut tr = Table::new(headers::KL_TRACE);
            for r in &rows {
                t.push(vec![
                    r.beta.into(),
                    r.lambda.into(),
                    r.n_chains.into(),
                    r.fit.rate.into(),
                    r.fit.plateau.into(),
                    r.fit.points_used.into(),
                    r.fit.ok.into(),
                    r.final_kl.into(),
                    r.final_tv.into(),
                ]);
                for p in &r.trace {
                    tr.push(vec![r.beta.into(), p.step.into(), p.time.into(), p.kl.into(), p.tv.into()]);
                }
            }
            w.table("_beta_sampling.csv", &t)?;
            w.table("_kl_trace.csv", &tr)?;
            rec.result = to_value(&rows);
        }
        Kind::ExcessRiskVsBeta => {
            let lambda = cfg.lambda.expect("validated");
            let configs = cfg
                .betas
                .as_ref()
                .expect("validated")
                .iter()
                .map(|&b| cfg.sweep_chain_config(&p, b, lambda))
                .collect::<CliResult<Vec<_>>>()?;
            let grid = cfg.grid.as_ref().map(|g| g.to_spec()).transpose()?;
            let table = experiments::excess_risk_vs_beta(&p, &configs, grid.as_ref())?;
            let mut t = Table::new(headers::EXCESS_RISK);
            for r in &table.rows {
                t.push(vec![
                    r.beta.into(),
                    r.lambda.into(),
                    r.n_draws.into(),
                    r.excess_risk.into(),
                    r.std_error.into(),
                    r.quadrature.into(),
                ]);
            }
            w.table("_excess_risk.csv", &t)?;
            rec.result = to_value(&table);
        }
        Kind::SpectrumSweep => {
            let k = cfg.n_eigen.unwrap_or(DEFAULT_EIGEN_COUNT);
            let betas = cfg.betas.as_ref().expect("validated");
            let res = experiments::spectrum_sweep(&p, betas, &cfg.grid_spec()?, k)?;
            let mut t = Table::new(&headers::spectrum(k));
            for r in &res {
                let mut row: Vec<Cell> = vec![r.beta.into(), r.grid.total_cells().into(), r.gap.into()];
                row.extend((0..k).map(|i| r.eigenvalues.get(i).copied().into()));
                row.push(r.converged.into());
                t.push(row);
            }
            w.table("_spectrum.csv", &t)?;
            rec.result = to_value(&res);
        }
        Kind::Validate => {
            let report = experiments::validate(
                &p,
                cfg.n_samples.unwrap_or(DEFAULT_VALIDATION_SAMPLES),
                cfg.radius.unwrap_or(DEFAULT_VALIDATION_RADIUS),
                cfg.seed()?,
            )?;
            let mut t = Table::new(headers::VALIDATE);
            for c in &report.checks {
                t.push(vec![
                    c.check.as_str().into(),
                    c.lambda.into(),
                    c.holds.into(),
                    c.worst_margin.into(),
                    c.n_tested.into(),
                    c.evidence.into(),
                ]);
            }
            w.table("_checks.csv", &t)?;
            rec.result = to_value(&report);
        }
    }

    if cfg.kind == Kind::Sample {
        if let (Some(g), Some(beta)) = (&cfg.grid, cfg.beta) {
            if p.dim() == 1 {
                let density = grid_reference(&p, beta, &g.to_spec()?)?;
                let path = sibling(&w.prefix, "_reference.csv");
                let mut buf = Vec::new();
                density.write_csv(&mut buf).map_err(|e| CliError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                write_file(&path, &buf)?;
                w.files.push(path);
            }
        }
    }

    rec.files = w
        .files
        .iter()
        .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let record_path = sibling(&w.prefix, ".json");
    write_file(&record_path, rec.to_json().as_bytes())?;
    let secs = start.elapsed().as_secs_f64();
    let timing = Timing {
        config_hash: rec.config_hash.clone(),
        wall_clock_seconds: secs,
        threads: rayon::current_num_threads(),
    };
    write_file(
        &sibling(&w.prefix, ".timing.json"),
        serde_json::to_string_pretty(&timing).expect("timing serializes").as_bytes(),
    )?;
    Ok(RunOutput {
        record: rec,
        record_path,
        files: w.files,
        wall_clock_seconds: secs,
    })
}

/// Config for the `validate` subcommand.
pub fn validate_config(
    potential: &str,
    dim: Option<usize>,
    seed: u64,
    n_samples: Option<usize>,
    radius: Option<f64>,
    output: PathBuf,
) -> CliResult<ExperimentConfig> {
    let mut v = serde_json::json!({
        "kind": "validate",
        "potential": potential,
        "output": output,
        "seed": seed,
    });
    let o = v.as_object_mut().expect("object");
    if let Some(d) = dim {
        o.insert("dim".into(), d.into());
    }
    if let Some(n) = n_samples {
        o.insert("n_samples".into(), n.into());
    }
    if let Some(r) = radius {
        o.insert("radius".into(), r.into());
    }
    ExperimentConfig::from_json(&v.to_string())
}
