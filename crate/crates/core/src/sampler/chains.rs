use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_diverged, ChainConfig, Drift, InitLaw};
use crate::error::{Error, Result};
use crate::potentials::{dot, PotentialSpec};
use crate::rng::{chain_rng, fill_normal};

/// Chain states at one iteration, chain-major (`n_chains × dim`). Diverged
/// chains contribute NaN rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub states: Vec<f64>,
}

/// Output of a multi-chain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub dim: usize,
    /// Collected states, one row of length `dim` per draw, chain-major.
    /// Rows a chain did not reach before diverging are NaN.
    pub samples: Vec<f64>,
    /// Mean of `|θ_n|²` over chains still alive at step `n`, `n = 0..=N`.
    pub second_moment: Vec<f64>,
    /// Mean of `|θ_n|⁴` over chains still alive at step `n`.
    pub fourth_moment: Vec<f64>,
    pub diverged: bool,
    pub diverged_chains: usize,
    pub first_nonfinite_step: Option<usize>,
    pub snapshots: Vec<Snapshot>,
}

impl SampleBatch {
    pub fn n_draws(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    /// Coordinate `axis` of every draw.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.rows().map(|r| r[axis]).collect()
    }
}

/// Chains simulated together on one thread. Fixed, so the reduction order
/// never depends on the thread count.
const GROUP: usize = 8;

struct GroupOutput {
    /// Per chain, in chain order.
    samples: Vec<Vec<f64>>,
    /// Sums over the group's live chains, `n + 1` entries.
    second: Vec<f64>,
    fourth: Vec<f64>,
    /// Per chain: first step at which it left the finite region.
    diverged_at: Vec<Option<usize>>,
    /// Per checkpoint, `group_len × dim`.
    snapshots: Vec<Vec<f64>>,
}

fn draw_init<R: Rng>(init: &InitLaw, rng: &mut R, out: &mut [f64]) {
    match init {
        InitLaw::Point { x0 } => out.copy_from_slice(x0),
        InitLaw::Gaussian { mean, scale } => {
            fill_normal(rng, out);
            for (o, m) in out.iter_mut().zip(mean) {
                *o = m + scale * *o;
            }
        }
    }
}

fn run_group(
    p: &PotentialSpec,
    cfg: &ChainConfig,
    kernel: &Drift<'_>,
    chains: std::ops::Range<usize>,
    checkpoints: &[usize],
) -> GroupOutput {
    let d = p.dim();
    let m = chains.len();
    let mut rngs: Vec<_> = chains.clone().map(|c| chain_rng(cfg.seed, c as u64)).collect();
    let mut x = vec![0.0; m * d];
    for (rng, xc) in rngs.iter_mut().zip(x.chunks_exact_mut(d)) {
        draw_init(&cfg.init, rng, xc);
    }
    let mut drift = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut alive = vec![true; m];
    let mut diverged_at = vec![None; m];

    let n = cfg.n_steps;
    let mut second = vec![0.0; n + 1];
    let mut fourth = vec![0.0; n + 1];
    let mut samples: Vec<Vec<f64>> = (0..m)
        .map(|_| Vec::with_capacity(cfg.draws_per_chain() * d))
        .collect();
    let mut snapshots = vec![vec![f64::NAN; m * d]; checkpoints.len()];
    let mut next_cp = 0;
    let sigma = (2.0 * cfg.lambda / cfg.beta).sqrt();
    let lambda = cfg.lambda;
    let mut n_alive = m;

    for it in 0..=n {
        let collect = it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0;
        let (mut s2, mut s4) = (0.0, 0.0);
        for c in 0..m {
            if !alive[c] {
                continue;
            }
            let xc = &mut x[c * d..(c + 1) * d];
            if it > 0 {
                kernel.eval(xc, &mut drift);
                fill_normal(&mut rngs[c], &mut noise);
                for i in 0..d {
                    xc[i] += -lambda * drift[i] + sigma * noise[i];
                }
                if is_diverged(xc) {
                    alive[c] = false;
                    diverged_at[c] = Some(it);
                    n_alive -= 1;
                    continue;
                }
            }
            let r2 = dot(xc, xc);
            s2 += r2;
            s4 += r2 * r2;
            if collect {
                samples[c].extend_from_slice(xc);
            }
        }
        second[it] = s2;
        fourth[it] = s4;
        while next_cp < checkpoints.len() && checkpoints[next_cp] == it {
            for c in (0..m).filter(|&c| alive[c]) {
                snapshots[next_cp][c * d..(c + 1) * d].copy_from_slice(&x[c * d..(c + 1) * d]);
            }
            next_cp += 1;
        }
        if n_alive == 0 {
            break;
        }
    }
    GroupOutput {
        samples,
        second,
        fourth,
        diverged_at,
        snapshots,
    }
}

/// Runs every chain and keeps the batch even when all chains diverge.
///
/// `checkpoints` (ascending iteration indices) select steps at which the
/// full cross-chain state is recorded.
pub fn simulate(p: &PotentialSpec, cfg: &ChainConfig, checkpoints: &[usize]) -> Result<SampleBatch> {
    cfg.validate(p)?;
    if checkpoints.windows(2).any(|w| w[0] > w[1]) || checkpoints.iter().any(|&c| c > cfg.n_steps) {
        return Err(Error::param("checkpoints", "must be ascending and at most n_steps"));
    }
    let kernel = Drift::new(p, cfg.scheme, cfg.lambda)?;
    let d = p.dim();
    let n = cfg.n_steps;

    let mut second_sum = vec![0.0; n + 1];
    let mut fourth_sum = vec![0.0; n + 1];
    // deaths[k]: chains that diverged at step k
    let mut deaths = vec![0usize; n + 1];
    let per = cfg.draws_per_chain();
    let mut samples = Vec::with_capacity(cfg.n_chains * per * d);
    let mut snapshots: Vec<Snapshot> = checkpoints
        .iter()
        .map(|&step| Snapshot {
            step,
            states: Vec::with_capacity(cfg.n_chains * d),
        })
        .collect();
    let mut diverged_chains = 0;
    let mut first_nonfinite: Option<usize> = None;

    let n_groups = cfg.n_chains.div_ceil(GROUP);
    // a few groups per thread in flight; reduction is in group order
    let batch = rayon::current_num_threads().max(1) * 2;
    let mut g0 = 0;
    while g0 < n_groups {
        let g1 = (g0 + batch).min(n_groups);
        let outs: Vec<GroupOutput> = (g0..g1)
            .into_par_iter()
            .map(|g| {
                let range = g * GROUP..((g + 1) * GROUP).min(cfg.n_chains);
                run_group(p, cfg, &kernel, range, checkpoints)
            })
            .collect();
        for out in outs {
            for (acc, v) in second_sum.iter_mut().zip(&out.second) {
                *acc += v;
            }
            for (acc, v) in fourth_sum.iter_mut().zip(&out.fourth) {
                *acc += v;
            }
            for s in &out.samples {
                samples.extend_from_slice(s);
                samples.resize(samples.len() + per * d - s.len(), f64::NAN);
            }
            for (snap, s) in snapshots.iter_mut().zip(&out.snapshots) {
                snap.states.extend_from_slice(s);
            }
            for at in out.diverged_at.into_iter().flatten() {
                diverged_chains += 1;
                deaths[at] += 1;
                first_nonfinite = Some(first_nonfinite.map_or(at, |f: usize| f.min(at)));
            }
        }
        g0 = g1;
    }

    let mut remaining = cfg.n_chains;
    let survivors: Vec<usize> = deaths
        .iter()
        .map(|k| {
            remaining -= k;
            remaining
        })
        .collect();
    let mean = |sum: Vec<f64>| -> Vec<f64> {
        sum.into_iter()
            .zip(&survivors)
            .map(|(s, &k)| if k > 0 { s / k as f64 } else { f64::NAN })
            .collect()
    };

    Ok(SampleBatch {
        dim: d,
        samples,
        second_moment: mean(second_sum),
        fourth_moment: mean(fourth_sum),
        diverged: diverged_chains > 0,
        diverged_chains,
        first_nonfinite_step: first_nonfinite,
        snapshots,
    })
}

/// Runs `cfg.n_chains` chains for `cfg.n_steps` iterations.
///
/// Bit-for-bit reproducible for a fixed seed and chain count. Fails only if
/// every chain diverged.
pub fn run_chains(p: &PotentialSpec, cfg: &ChainConfig) -> Result<SampleBatch> {
    let batch = simulate(p, cfg, &[])?;
    if batch.diverged_chains == cfg.n_chains {
        return Err(Error::Diverged {
            first_nonfinite_step: batch.first_nonfinite_step.unwrap_or(0),
        });
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::super::{Scheme, ChainConfig, InitLaw};
    use super::*;
    use crate::potentials::{double_well, quadratic, quartic};

    fn cfg(scheme: Scheme, lambda: f64, n: usize, m: usize, init: InitLaw) -> ChainConfig {
        ChainConfig::new(scheme, 1.0, lambda, n, m, 42, init)
    }

    #[test]
    fn shapes_and_determinism() {
        let p = double_well();
        let c = cfg(Scheme::Stula, 0.002, 1000, 5, InitLaw::Point { x0: vec![0.5] }).with_thin(7);
        let a = run_chains(&p, &c).unwrap();
        let b = run_chains(&p, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.second_moment.len(), 1001);
        assert_eq!(a.n_draws(), 5 * (500 / 7));
        assert!(!a.diverged);
        assert!(a.samples.iter().all(|v| v.is_finite()));
        assert_eq!(a.second_moment[0], 0.25);
    }

    #[test]
    fn chain_streams_do_not_depend_on_count() {
        // chain k sees the same stream whether 3 or 9 chains run
        let p = double_well();
        let c3 = cfg(Scheme::Stula, 0.002, 200, 3, InitLaw::Gaussian { mean: vec![0.0], scale: 1.0 })
            .with_burn_in(0);
        let mut c9 = c3.clone();
        c9.n_chains = 9;
        let a = run_chains(&p, &c3).unwrap();
        let b = run_chains(&p, &c9).unwrap();
        assert_eq!(a.samples[..], b.samples[..a.samples.len()]);
    }

    #[test]
    fn guard_rejects_large_stula_step() {
        let p = double_well();
        let mut c = cfg(Scheme::Stula, 0.01, 10, 1, InitLaw::Point { x0: vec![0.0] });
        assert!(matches!(run_chains(&p, &c), Err(Error::StepsizeTooLarge { .. })));
        c.allow_large_step = true;
        assert!(run_chains(&p, &c).is_ok());
        c.scheme = Scheme::Ula;
        c.allow_large_step = false;
        assert!(run_chains(&p, &c).is_ok());
    }

    #[test]
    fn ula_diverges_on_quartic() {
        let p = quartic();
        let c = cfg(Scheme::Ula, 0.1, 50, 4, InitLaw::Point { x0: vec![10.0] });
        match run_chains(&p, &c) {
            Err(Error::Diverged { first_nonfinite_step }) => assert_eq!(first_nonfinite_step, 6),
            other => panic!("{other:?}"),
        }
        let batch = simulate(&p, &c, &[]).unwrap();
        assert!(batch.diverged);
        assert_eq!(batch.diverged_chains, 4);
        assert!(batch.second_moment.last().unwrap().is_nan());
    }

    #[test]
    fn snapshots_capture_all_chains() {
        let p = quadratic(2);
        let c = cfg(Scheme::Ula, 0.01, 100, 6, InitLaw::Point { x0: vec![1.0, 2.0] });
        let b = simulate(&p, &c, &[0, 50, 100]).unwrap();
        assert_eq!(b.snapshots.len(), 3);
        assert_eq!(b.snapshots[0].states, [1.0, 2.0].repeat(6));
        assert!(b.snapshots[2].states.len() == 12);
    }

    #[test]
    fn rejects_mismatched_init() {
        let p = quadratic(2);
        let c = cfg(Scheme::Ula, 0.01, 10, 1, InitLaw::Point { x0: vec![1.0] });
        assert!(run_chains(&p, &c).is_err());
    }
}
