//! Sampling-based verifiers for the declared regularity constants. They
//! produce evidence on finitely many points, never proofs.

use rand::Rng;
use serde::Serialize;

use super::{dot, norm, pow_abs, ConvexityAtInfinity, Dissipativity, PotentialSpec};
use crate::error::{Error, Result};
use crate::rng::{chain_rng, uniform_in_ball};

pub const EVIDENCE_LABEL: &str = "sampled evidence";

/// Outcome of a pointwise inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub holds: bool,
    /// Minimum over tested points of (right side − left side) or the
    /// analogous slack, so that negative means violated.
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub n_tested: usize,
    pub evidence: &'static str,
}

/// Outcome of a pairwise inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct PairCheckReport {
    pub check: String,
    pub holds: bool,
    pub worst_margin: f64,
    pub witness: (Vec<f64>, Vec<f64>),
    pub n_tested: usize,
    pub evidence: &'static str,
}

/// Uniform samples in the ball plus a deterministic radial grid along every
/// coordinate axis.
pub(crate) fn test_points(dim: usize, n_samples: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = chain_rng(seed, 0);
    let mut pts: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| uniform_in_ball(&mut rng, dim, radius))
        .collect();
    const RADIAL: usize = 200;
    for axis in 0..dim {
        for sign in [-1.0, 1.0] {
            for i in 0..=RADIAL {
                let mut x = vec![0.0; dim];
                x[axis] = sign * radius * i as f64 / RADIAL as f64;
                pts.push(x);
            }
        }
    }
    pts
}

fn test_pairs(dim: usize, n_pairs: usize, radius: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = chain_rng(seed, 1);
    (0..n_pairs)
        .map(|i| {
            let x = uniform_in_ball(&mut rng, dim, radius);
            let y = if i % 2 == 0 {
                uniform_in_ball(&mut rng, dim, radius)
            } else {
                // nearby partner to probe the local modulus
                let scale = 1e-3 * (1.0 + norm(&x)) * rng.random::<f64>();
                let dir = uniform_in_ball(&mut rng, dim, 1.0);
                x.iter().zip(&dir).map(|(a, b)| a + scale * b).collect()
            };
            (x, y)
        })
        .collect()
}

fn check_sampling_args(n: usize, radius: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    Ok(())
}

pub(crate) fn pointwise(
    p: &PotentialSpec,
    name: &str,
    n_samples: usize,
    radius: f64,
    seed: u64,
    margin: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<CheckReport> {
    check_sampling_args(n_samples, radius)?;
    let pts = test_points(p.dim(), n_samples, radius, seed);
    let mut worst = f64::INFINITY;
    let mut witness = vec![0.0; p.dim()];
    for x in &pts {
        let (_, h) = p.eval(x)?;
        let m = margin(x, &h);
        if m < worst {
            worst = m;
            witness.clone_from(x);
        }
    }
    Ok(CheckReport {
        check: name.to_string(),
        holds: worst >= 0.0,
        worst_margin: worst,
        witness,
        n_tested: pts.len(),
        evidence: EVIDENCE_LABEL,
    })
}

fn pairwise(
    p: &PotentialSpec,
    name: &str,
    pairs: &[(Vec<f64>, Vec<f64>)],
    margin: impl Fn(&[f64], &[f64], &[f64], &[f64]) -> f64,
) -> Result<PairCheckReport> {
    let mut worst = f64::INFINITY;
    let mut witness = (vec![0.0; p.dim()], vec![0.0; p.dim()]);
    for (x, y) in pairs {
        let (_, hx) = p.eval(x)?;
        let (_, hy) = p.eval(y)?;
        let m = margin(x, y, &hx, &hy);
        if m < worst {
            worst = m;
            witness = (x.clone(), y.clone());
        }
    }
    Ok(PairCheckReport {
        check: name.to_string(),
        holds: worst >= 0.0,
        worst_margin: worst,
        witness,
        n_tested: pairs.len(),
        evidence: EVIDENCE_LABEL,
    })
}

/// Checks `⟨h(x), x⟩ ≥ a|x|² − b` for the claimed `(a, b)`.
pub fn verify_dissipativity(
    p: &PotentialSpec,
    claim: Dissipativity,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<CheckReport> {
    pointwise(p, "dissipativity", n_samples, radius, seed, |x, h| {
        dot(h, x) - claim.a * dot(x, x) + claim.b
    })
}

/// Checks the declared drift growth `|h(x)| ≤ L(1 + |x|^{2l})`.
pub fn verify_growth(
    p: &PotentialSpec,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<CheckReport> {
    let g = p.growth();
    pointwise(p, "growth", n_samples, radius, seed, |x, h| {
        g.coefficient * (1.0 + pow_abs(norm(x), 2.0 * g.exponent)) - norm(h)
    })
}

/// Checks the declared polynomial Lipschitz bound on sampled pairs.
pub fn verify_local_lipschitz(
    p: &PotentialSpec,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<PairCheckReport> {
    check_sampling_args(n_pairs, radius)?;
    let ll = p.local_lipschitz();
    let pairs = test_pairs(p.dim(), n_pairs, radius, seed);
    pairwise(p, "local_lipschitz", &pairs, |x, y, hx, hy| {
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dh: Vec<f64> = hx.iter().zip(hy).map(|(a, b)| a - b).collect();
        ll.coefficient * pow_abs(1.0 + norm(x) + norm(y), ll.exponent) * norm(&dx) - norm(&dh)
    })
}

/// Checks convexity at infinity,
/// `⟨h(x) − h(y), x − y⟩ ≥ (c1(|x|^{2r} + |y|^{2r}) − c2(|x|^l + |y|^l) − c3)|x − y|²`,
/// on sampled pairs in the ball of the given radius.
pub fn verify_convexity_at_infinity(
    p: &PotentialSpec,
    c: ConvexityAtInfinity,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<PairCheckReport> {
    check_sampling_args(n_pairs, radius)?;
    for (name, v) in [("c1", c.c1), ("c2", c.c2), ("c3", c.c3), ("r", c.r), ("l", c.l)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    if 2.0 * c.r <= c.l {
        return Err(Error::param(
            "r",
            format!("need 2r > l, got r = {}, l = {}", c.r, c.l),
        ));
    }
    let mut pairs = test_pairs(p.dim(), n_pairs, radius, seed);
    // coincident pairs: both sides vanish
    let mut rng = chain_rng(seed, 2);
    let x = uniform_in_ball(&mut rng, p.dim(), radius);
    pairs.push((x.clone(), x));
    pairwise(p, "convexity_at_infinity", &pairs, |x, y, hx, hy| {
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dh: Vec<f64> = hx.iter().zip(hy).map(|(a, b)| a - b).collect();
        let (nx, ny) = (norm(x), norm(y));
        let coef = c.c1 * (pow_abs(nx, 2.0 * c.r) + pow_abs(ny, 2.0 * c.r))
            - c.c2 * (pow_abs(nx, c.l) + pow_abs(ny, c.l))
            - c.c3;
        dot(&dh, &dx) - coef * dot(&dx, &dx)
    })
}
