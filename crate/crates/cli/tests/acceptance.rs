//! Acceptance criteria. Every test prints one `PASS`/`FAIL` line with the
//! measured quantity, its tolerance and the runtime against its budget.
//! Tests hold a shared lock so that runtimes are measured one at a time.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stula_cli::{run, ExperimentConfig};
use stula_core::isoperimetry::{classify, find_critical_points, morse_report, Classification, SeedGrid};
use stula_core::potentials::{
    by_id, double_well, example1, example2, quadratic, quartic, Dissipativity, Growth, LocalLipschitz, Objective,
    Regularity, CATALOG_IDS,
};
use stula_core::reference::{grid_reference, kl_divergence, tv_distance, w2_1d, Histogram, W2Target};
use stula_core::rng::{chain_rng, fill_normal, uniform_in_ball};
use stula_core::sampler::{
    lambda_max, second_moment_bound, simulate, tamed_drift, verify_drift_lemmas_at_default_steps,
};
use stula_core::{ChainConfig, GridSpec, InitLaw, PotentialSpec, Scheme};

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, ok: bool, detail: &str, start: Instant, budget_s: u64) {
    let elapsed = start.elapsed();
    let in_budget = elapsed <= Duration::from_secs(budget_s);
    let pass = ok && in_budget;
    let _ = writeln!(
        std::io::stdout().lock(),
        "[criterion {id:02}] {} {name}: {detail}; runtime {:.2} s (budget {budget_s} s{})",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        if in_budget { "" } else { ", exceeded" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn run_json(cfg: Value, dir: &Path) -> (stula_cli::RunOutput, Value) {
    let cfg = ExperimentConfig::from_json(&cfg.to_string()).expect("config");
    let out = run(&cfg, Some(dir)).expect("run");
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&out.record_path).unwrap()).unwrap();
    (out, rec)
}

fn normal_draws(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_normal(&mut chain_rng(seed, 0), &mut v);
    v.iter_mut().for_each(|x| *x = mean + sd * *x);
    v
}

/// `u(x) = (x − c)²/2`.
struct Shifted(f64);

impl Objective for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] - self.0).powi(2)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - self.0;
    }
}

fn shifted_normal(c: f64) -> PotentialSpec {
    PotentialSpec::new(
        format!("shifted:{c}"),
        1,
        Arc::new(Shifted(c)),
        Regularity {
            growth: Growth {
                coefficient: 1.0 + c.abs(),
                exponent: 0.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: 1.0,
                exponent: 1.0,
            },
            dissipativity: Some(Dissipativity { a: 0.5, b: c * c / 2.0 }),
        },
    )
    .unwrap()
}

#[test]
fn criterion_01_drift_inequalities() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut n_checks = 0;
    for id in CATALOG_IDS {
        let p = by_id(id, None).unwrap();
        if p.dissipativity().is_none() {
            continue;
        }
        for (lambda, reps) in verify_drift_lemmas_at_default_steps(&p, 100_000, 10.0, 2024).unwrap() {
            for r in reps {
                assert!(r.n_tested >= 100_000);
                n_checks += 1;
                if r.worst_margin < worst {
                    worst = r.worst_margin;
                    worst_at = format!("{id} {} lambda={lambda:.3e}", r.check);
                }
            }
        }
    }
    verdict(
        1,
        "drift inequality suite",
        worst >= -1e-9 && n_checks > 0,
        &format!("{n_checks} checks on 1e5 points, worst margin {worst:.3e} ({worst_at}), need >= -1e-9"),
        start,
        10,
    );
}

#[test]
fn criterion_02_linear_transparency() {
    let _g = serial();
    let start = Instant::now();
    let p = quadratic(3);
    let lambda = 0.005;
    let mut rng = chain_rng(7, 0);
    let mut max_diff: f64 = 0.0;
    for _ in 0..10_000 {
        let x = uniform_in_ball(&mut rng, 3, 10.0);
        let h = p.gradient(&x).unwrap();
        let hl = tamed_drift(&p, lambda, &x).unwrap();
        for (a, b) in h.iter().zip(&hl) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    let init = InitLaw::Gaussian {
        mean: vec![1.0, -1.0, 0.5],
        scale: 2.0,
    };
    let cfg = ChainConfig::new(Scheme::Stula, 2.0, lambda, 20_000, 16, 99, init);
    let a = simulate(&p, &cfg, &[]).unwrap();
    let b = simulate(&p, &ChainConfig { scheme: Scheme::Ula, ..cfg }, &[]).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let identical = bits(&a.samples) == bits(&b.samples) && bits(&a.second_moment) == bits(&b.second_moment);
    verdict(
        2,
        "linear transparency",
        max_diff == 0.0 && identical,
        &format!("max |h_lambda - h| = {max_diff:e} on 1e4 points; stula and ula chains byte-identical: {identical}"),
        start,
        5,
    );
}

#[test]
fn criterion_03_moment_uniformity() {
    let _g = serial();
    let start = Instant::now();
    let p = double_well();
    let bound = second_moment_bound(&p, 1.0, 0.0).unwrap();
    let n = 1_000_000;
    let cfg = ChainConfig::new(Scheme::Stula, 1.0, 0.002, n, 64, 31, InitLaw::Point { x0: vec![0.0] }).with_burn_in(n);
    let b = simulate(&p, &cfg, &[]).unwrap();
    let max_cross = b.second_moment.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut acc = 0.0;
    let mut max_running: f64 = 0.0;
    for (k, v) in b.second_moment.iter().enumerate() {
        acc += v;
        max_running = max_running.max(acc / (k + 1) as f64);
    }
    let ok = !b.diverged && (bound - 44.0).abs() < 0.5 && max_cross <= 44.0 && max_running <= 44.0;
    verdict(
        3,
        "moment uniformity",
        ok,
        &format!(
            "bound C2 = {bound:.4} (expected 44); max over n of chain-mean |theta_n|^2 = {max_cross:.4}, of its running mean = {max_running:.4}"
        ),
        start,
        120,
    );
}

#[test]
fn criterion_04_taming_necessity() {
    let _g = serial();
    let start = Instant::now();
    let p = quartic();
    let init = InitLaw::Point { x0: vec![10.0] };
    let ula = ChainConfig::new(Scheme::Ula, 1.0, 0.1, 10, 1, 5, init.clone()).with_burn_in(10);
    let blown = simulate(&p, &ula, &[]).unwrap().first_nonfinite_step;
    let lmax = lambda_max(&p).unwrap();
    let n = 1_000_000;
    let stula = ChainConfig::new(Scheme::Stula, 1.0, lmax, n, 8, 5, init).with_burn_in(n);
    let s = simulate(&p, &stula, &[]).unwrap();
    let finite = !s.diverged && s.second_moment.iter().all(|v| v.is_finite());
    verdict(
        4,
        "taming necessity",
        blown.is_some_and(|k| k <= 10) && finite,
        &format!(
            "ULA (lambda 0.1) first non-finite step {blown:?}, need <= 10; sTULA (lambda {lmax:.5}) finite over 1e6 steps: {finite}"
        ),
        start,
        60,
    );
}

#[test]
fn criterion_05_sampling_accuracy() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, rec) = run_json(
        json!({
            "kind": "sample", "potential": "double_well", "output": "c05", "seed": 11,
            "beta": 1.0, "lambda": 0.001, "n_steps": 205_000, "n_chains": 1000,
            "burn_in": 5000, "thin": 200,
            "init": {"kind": "gaussian", "mean": [0.0], "scale": 1.0},
            "metrics": ["kl", "tv"],
            "grid": {"lower": [-4.0], "upper": [4.0], "n_cells": [512]}
        }),
        dir.path(),
    );
    let metric = |name: &str| {
        rec["metrics"]
            .as_array()
            .unwrap()
            .iter()
            .find(|m| m["metric"] == name)
            .unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    let draws = rec["result"]["n_draws"].as_u64().unwrap();
    let (kl, tv) = (metric("kl"), metric("tv"));
    verdict(
        5,
        "sampling accuracy",
        draws == 1_000_000 && tv <= 0.05 && kl <= 0.01,
        &format!("{draws} draws, TV = {tv:.5} (<= 0.05), KL = {kl:.5} (<= 0.01)"),
        start,
        120,
    );
}

#[test]
fn criterion_06_linear_plateau() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, rec) = run_json(
        json!({
            "kind": "lambda_sweep", "potential": "double_well", "output": "c06", "seed": 12,
            "beta": 1.0, "lambdas": [0.002, 0.001], "horizon": 300.0,
            "burn_in_fraction": 0.05, "thin_time": 0.1, "n_chains": 1000, "trace_points": 1500,
            "init": {"kind": "point", "x0": [0.0]},
            "grid": {"lower": [-4.0], "upper": [4.0], "n_cells": [64]}
        }),
        dir.path(),
    );
    let rows = rec["result"]["rows"].as_array().unwrap();
    let ratio = rec["result"]["ratios"][0]["kl_ratio"].as_f64().unwrap();
    let plateaus: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "lambda {}: KL {:.3e} (plateaued {}, horizon ok {})",
                r["lambda"], r["plateau_kl"].as_f64().unwrap(), r["plateaued"], r["horizon_ok"]
            )
        })
        .collect();
    verdict(
        6,
        "O(lambda) plateau",
        (1.3..=3.0).contains(&ratio),
        &format!("plateau KL ratio {ratio:.4} in [1.3, 3.0]; {}", plateaus.join("; ")),
        start,
        300,
    );
}

#[test]
fn criterion_07_kl_decay_rate() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, rec) = run_json(
        json!({
            "kind": "beta_sweep_sampling", "potential": "quadratic", "output": "c07", "seed": 13,
            "betas": [1.0], "lambda": 0.005, "horizon": 8.0, "n_chains": 100_000, "trace_points": 81,
            "init": {"kind": "point", "x0": [3.0]},
            "grid": {"lower": [-8.0], "upper": [8.0], "n_cells": [128]}
        }),
        dir.path(),
    );
    let fit = &rec["result"][0]["fit"];
    let rate = fit["rate"].as_f64().unwrap_or(f64::NAN);
    let ok = fit["ok"] == true && rate >= 1.0 && (rate / 1.5 - 1.0).abs() <= 0.3;
    verdict(
        7,
        "KL decay rate vs Gaussian LSI constant",
        ok,
        &format!("fitted rate {rate:.4} from {} points, need within 30% of 1.5", fit["points_used"]),
        start,
        60,
    );
}

#[test]
fn criterion_08_spectral_gaps() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let sweep = |id: &str, betas: &[f64], lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let (_, rec) = run_json(
            json!({
                "kind": "spectrum_sweep", "potential": id, "output": format!("c08_{id}"), "seed": 1,
                "betas": betas, "grid": {"lower": [lo], "upper": [hi], "n_cells": [2048]}
            }),
            dir.path(),
        );
        rec["result"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| (r["beta"].as_f64().unwrap(), r["gap"].as_f64().unwrap()))
            .collect()
    };
    let quad = sweep("quadratic", &[1.0, 10.0, 50.0], -8.0, 8.0);
    let a = quad.iter().all(|(_, g)| (g - 1.0).abs() <= 0.05);
    let dw_betas = [4.0, 8.0, 12.0, 16.0, 20.0];
    let dw = sweep("double_well", &dw_betas, -3.0, 3.0);
    let logs: Vec<f64> = dw.iter().map(|(_, g)| g.ln()).collect();
    let (slope, _) = stula_core::isoperimetry::linear_fit(&dw_betas, &logs);
    let b = (slope + 0.25).abs() <= 0.3 * 0.25;
    let e2 = sweep("example2_xmarginal", &[5.0, 10.0, 20.0, 50.0], -8.0, 8.0);
    let (gmin, gmax) = e2.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, g)| (lo.min(*g), hi.max(*g)));
    let c = gmax / gmin <= 3.0;
    let q: Vec<String> = quad.iter().map(|(b, g)| format!("{b}:{g:.4}")).collect();
    verdict(
        8,
        "spectral gap beta-dependence",
        a && b && c,
        &format!(
            "(a) quadratic gaps [{}] within 1 +- 5%: {a}; (b) double-well log-gap slope {slope:.4} vs -0.25 +- 30%: {b}; (c) example2_xmarginal gap ratio {:.3} <= 3: {c}",
            q.join(", "),
            gmax / gmin
        ),
        start,
        120,
    );
}

#[test]
fn criterion_09_critical_points() {
    let _g = serial();
    let start = Instant::now();
    let e1 = find_critical_points(&example1(), &SeedGrid::cube(2, -6.0, 6.0, 25), 1e-10).unwrap();
    let near = |x: &[f64], y: [f64; 2]| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    let saddle = e1.points.iter().find(|c| near(&c.location, [-1.0, 2.5]) < 1e-6);
    let minimum = e1.points.iter().find(|c| near(&c.location, [3.0, -1.5]) < 1e-6);
    let e1_ok = e1.points.len() == 2
        && saddle.is_some_and(|c| c.classification == Classification::Saddle)
        && minimum.is_some_and(|c| c.classification == Classification::Minimum);

    let s8 = 8f64.sqrt();
    let eig_err = match (saddle, minimum) {
        (Some(s), Some(m)) => {
            let want = [-s8, s8, 4.0 - s8, 4.0 + s8];
            let got = [
                s.hessian_eigenvalues[0],
                s.hessian_eigenvalues[1],
                m.hessian_eigenvalues[0],
                m.hessian_eigenvalues[1],
            ];
            want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        }
        _ => f64::INFINITY,
    };
    let l_star = morse_report(&e1.points).map(|m| m.l_star).unwrap_or(f64::NAN);
    let morse_ok = eig_err <= 1e-3 && (l_star - (4.0 - s8)).abs() <= 1e-3;

    let e2 = find_critical_points(&example2(), &SeedGrid::cube(2, -5.0, 5.0, 21), 1e-10).unwrap();
    let e2_min = e2.points.first().map(|c| c.location.clone()).unwrap_or_default();
    let e2_dist = if e2_min.len() == 2 { near(&e2_min, [2.5567, 1.0]) } else { f64::INFINITY };
    let e2_class = classify(&example2(), &e2_min, 1e-4).map(|c| c.classification).ok();
    let e2_ok = e2.points.len() == 1 && e2_class == Some(Classification::Minimum) && e2_dist <= 1e-3;
    verdict(
        9,
        "critical-point geometry",
        e1_ok && morse_ok && e2_ok,
        &format!(
            "example1: {} points, saddle/minimum as expected: {e1_ok}; Hessian eigenvalue error {eig_err:.2e}, l* = {l_star:.6}: {morse_ok}; example2: {} points, minimum at ({:.6}, {:.6}), distance {e2_dist:.3e} to (2.5567, 1), need <= 1e-3: {e2_ok}",
            e1.points.len(),
            e2.points.len(),
            e2_min.first().unwrap_or(&f64::NAN),
            e2_min.get(1).unwrap_or(&f64::NAN)
        ),
        start,
        5,
    );
}

#[test]
fn criterion_10_metric_estimators() {
    let _g = serial();
    let start = Instant::now();
    let grid = GridSpec::cube(1, -10.0, 10.0, 4096).unwrap();
    let a = grid_reference(&shifted_normal(0.0), 1.0, &grid).unwrap();
    let b = grid_reference(&shifted_normal(0.5), 1.0, &grid).unwrap();
    let tv = tv_distance(&b, &a).unwrap().value;

    let h = Histogram::from_samples(&grid, &normal_draws(1.0, 1.0, 1_000_000, 21)).unwrap();
    let kl = kl_divergence(&h, &a).unwrap().value;

    let x = normal_draws(0.0, 1.0, 1_000_000, 22);
    let y = normal_draws(0.0, 2.0, 1_000_000, 23);
    let w2 = w2_1d(&x, W2Target::Samples(&y)).unwrap().value;
    let ok = (tv - 0.19741).abs() <= 1e-3 && (kl - 0.5).abs() <= 0.05 && (w2 - 1.0).abs() <= 0.02;
    verdict(
        10,
        "metric estimators",
        ok,
        &format!(
            "TV(N(0,1), N(0.5,1)) = {tv:.5} (0.19741 +- 1e-3); KL(N(1,1) | N(0,1)) = {kl:.4} (0.5 +- 0.05); W2(N(0,1), N(0,4)) = {w2:.4} (1 +- 2%)"
        ),
        start,
        60,
    );
}

#[test]
fn criterion_11_excess_risk() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, quad) = run_json(
        json!({
            "kind": "excess_risk_vs_beta", "potential": "quadratic", "dim": 2, "output": "c11_quadratic",
            "seed": 41, "betas": [10.0], "lambda": 0.005, "horizon": 50.0, "burn_in_fraction": 0.2,
            "thin_time": 0.05, "n_chains": 200
        }),
        dir.path(),
    );
    let q = quad["result"]["rows"][0]["excess_risk"].as_f64().unwrap();
    let q_ok = (q / 0.1 - 1.0).abs() <= 0.1;
    let (_, e2) = run_json(
        json!({
            "kind": "excess_risk_vs_beta", "potential": "example2", "output": "c11_example2",
            "seed": 15, "betas": [2.0, 5.0, 10.0, 20.0], "lambda": 0.0005, "horizon": 50.0,
            "burn_in_fraction": 0.2, "thin_time": 0.05, "n_chains": 200,
            "init": {"kind": "point", "x0": [2.5, 1.0]}
        }),
        dir.path(),
    );
    let rows: Vec<String> = e2["result"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            format!(
                "beta {}: {:.4} +- {:.4}",
                r["beta"],
                r["excess_risk"].as_f64().unwrap(),
                r["std_error"].as_f64().unwrap()
            )
        })
        .collect();
    let mono = e2["result"]["non_increasing_within_se"] == true;
    verdict(
        11,
        "excess risk",
        q_ok && mono,
        &format!(
            "quadratic d=2, beta=10: {q:.5} vs d/(2 beta) = 0.1 +- 10%: {q_ok}; example2 non-increasing within 1 SE: {mono} [{}]",
            rows.join(", ")
        ),
        start,
        180,
    );
}

fn digest_outputs(out: &stula_cli::RunOutput) -> Vec<(String, String)> {
    let mut files = out.files.clone();
    files.push(out.record_path.clone());
    files
        .iter()
        .map(|f| {
            let h = Sha256::digest(std::fs::read(f).unwrap());
            (
                f.file_name().unwrap().to_string_lossy().into_owned(),
                h.iter().map(|b| format!("{b:02x}")).collect(),
            )
        })
        .collect()
}

#[test]
fn criterion_12_determinism() {
    let _g = serial();
    let start = Instant::now();
    let cfg = json!({
        "kind": "sample", "potential": "double_well", "output": "c12", "seed": 5,
        "beta": 2.0, "lambda": 0.002, "n_steps": 20_000, "n_chains": 37,
        "init": {"kind": "gaussian", "mean": [0.5], "scale": 1.0},
        "metrics": ["kl", "tv", "w2", "excess_risk"],
        "grid": {"lower": [-3.0], "upper": [3.0], "n_cells": [256]}
    });
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (o1, r1) = run_json(cfg.clone(), d1.path());
    let (o2, _) = run_json(cfg, d2.path());
    // re-run from the config echo of the first record
    let (o3, _) = run_json(r1["config"].clone(), d3.path());
    let (h1, h2, h3) = (digest_outputs(&o1), digest_outputs(&o2), digest_outputs(&o3));
    let ok = h1 == h2 && h1 == h3;
    verdict(
        12,
        "determinism",
        ok,
        &format!("{} output files hashed across two runs and a re-run from the config echo; identical: {ok}", h1.len()),
        start,
        60,
    );
}
