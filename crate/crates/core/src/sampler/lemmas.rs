//! Pointwise checks of the tamed drift against its growth, dissipativity and
//! taming-error bounds.

use super::lambda_max;
use crate::error::{Error, Result};
use crate::potentials::{dot, norm, pointwise, pow_abs, CheckReport, PotentialSpec};

fn tamed(a: f64, two_l: f64, lambda: f64, x: &[f64], h: &[f64]) -> Vec<f64> {
    let damp = 1.0 / (1.0 + lambda.sqrt() * pow_abs(norm(x), two_l));
    x.iter().zip(h).map(|(xi, hi)| a * xi + (hi - a * xi) * damp).collect()
}

/// `|h_λ(x)| ≤ a|x| + (L + a)/√λ`, `⟨h_λ(x), x⟩ ≥ (a/2)|x|² − b` and
/// `|h_λ(x) − h(x)| ≤ √λ(|h(x)| + a|x|)|x|^{2l}` on sampled points.
pub fn verify_drift_lemmas(
    p: &PotentialSpec,
    lambda: f64,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", format!("need 0 < lambda < 1, got {lambda}")));
    }
    let d = p.require_dissipativity()?;
    let g = p.growth();
    let two_l = 2.0 * g.exponent;
    let c_h = g.coefficient + d.a;
    let growth = pointwise(p, "drift_growth", n_samples, radius, seed, |x, h| {
        let hl = tamed(d.a, two_l, lambda, x, h);
        d.a * norm(x) + c_h / lambda.sqrt() - norm(&hl)
    })?;
    let diss = pointwise(p, "preserved_dissipativity", n_samples, radius, seed, |x, h| {
        let hl = tamed(d.a, two_l, lambda, x, h);
        dot(&hl, x) - (0.5 * d.a * dot(x, x) - d.b)
    })?;
    let taming = pointwise(p, "taming_error", n_samples, radius, seed, |x, h| {
        let hl = tamed(d.a, two_l, lambda, x, h);
        let diff: Vec<f64> = hl.iter().zip(h).map(|(a, b)| a - b).collect();
        lambda.sqrt() * (norm(h) + d.a * norm(x)) * pow_abs(norm(x), two_l) - norm(&diff)
            + 1e-12 * (norm(h) + d.a * norm(x))
    })?;
    Ok(vec![growth, diss, taming])
}

/// [`verify_drift_lemmas`] at `λ_max`, `λ_max/10` and `λ_max/100`.
pub fn verify_drift_lemmas_at_default_steps(
    p: &PotentialSpec,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<(f64, Vec<CheckReport>)>> {
    let lmax = lambda_max(p)?.min(0.999);
    [lmax, lmax / 10.0, lmax / 100.0]
        .into_iter()
        .map(|l| verify_drift_lemmas(p, l, n_samples, radius, seed).map(|r| (l, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{double_well, example1, quadratic};
    use crate::sampler::tamed_drift;

    #[test]
    fn matches_the_sampler_drift() {
        let p = double_well();
        let h = p.gradient(&[2.0]).unwrap();
        assert_eq!(tamed(1.0, 3.0, 0.01, &[2.0], &h), tamed_drift(&p, 0.01, &[2.0]).unwrap());
    }

    #[test]
    fn lemmas_hold() {
        for p in [quadratic(2), double_well()] {
            for (_, reps) in verify_drift_lemmas_at_default_steps(&p, 2000, 10.0, 1).unwrap() {
                assert!(reps.iter().all(|r| r.holds), "{reps:?}");
            }
        }
        assert!(verify_drift_lemmas(&example1(), 0.001, 10, 1.0, 1).is_err());
        assert!(verify_drift_lemmas(&quadratic(1), 0.0, 10, 1.0, 1).is_err());
    }
}
