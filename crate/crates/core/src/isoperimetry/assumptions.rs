use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{norm, PotentialSpec, EVIDENCE_LABEL};
use crate::rng::{chain_rng, unit_vector};

/// Sampled estimates of the Hessian lower bound `K`, the ratio constant `C′`
/// in `‖∇²u‖ ≤ C′(1+|h|)` and the gradient floor `c_H` on the sphere of
/// radius `R`.
#[derive(Debug, Clone, Serialize)]
pub struct CAssumptionReport {
    pub k_estimate: f64,
    pub c_prime_estimate: f64,
    pub c_h: f64,
    pub r: f64,
    /// Point attaining the smallest Hessian eigenvalue.
    pub k_witness: Vec<f64>,
    pub n_tested: usize,
    pub evidence: &'static str,
}

pub fn check_c_assumptions(p: &PotentialSpec, n_samples: usize, radius: f64, seed: u64) -> Result<CAssumptionReport> {
    if n_samples < 1000 {
        return Err(Error::param("n_samples", "need at least 1000 samples"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", "must be positive and finite"));
    }
    let d = p.dim();
    let pts = crate::potentials::test_points(d, n_samples, radius, seed);
    let mut min_eig = f64::INFINITY;
    let mut k_witness = vec![0.0; d];
    let mut c_prime: f64 = 0.0;
    for x in &pts {
        let hess = p.hessian_at(x)?;
        let eig = SymmetricEigen::new(hess).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let op_norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if lo < min_eig {
            min_eig = lo;
            k_witness.clone_from(x);
        }
        let h = norm(&p.gradient(x)?);
        c_prime = c_prime.max(op_norm / (1.0 + h));
    }

    let mut rng = chain_rng(seed, 2);
    let sphere: Vec<Vec<f64>> = if d == 1 {
        vec![vec![-radius], vec![radius]]
    } else {
        (0..n_samples)
            .map(|_| unit_vector(&mut rng, d).into_iter().map(|v| v * radius).collect())
            .collect()
    };
    let mut c_h = f64::INFINITY;
    for x in &sphere {
        c_h = c_h.min(norm(&p.gradient(x)?));
    }

    Ok(CAssumptionReport {
        k_estimate: (-min_eig).max(0.0),
        c_prime_estimate: c_prime,
        c_h,
        r: radius,
        k_witness,
        n_tested: pts.len() + sphere.len(),
        evidence: EVIDENCE_LABEL,
    })
}
