use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    dot, pow_abs, ConvexityAtInfinity, Dissipativity, Growth, LocalLipschitz, Objective,
    PotentialSpec, Regularity,
};
use crate::error::{Error, Result};

struct Regularized {
    base: Arc<dyn Objective>,
    eta: f64,
    r: f64,
}

impl Objective for Regularized {
    fn value(&self, x: &[f64]) -> f64 {
        let r2 = dot(x, x);
        self.base.value(x) + self.eta * pow_abs(r2, self.r + 1.0)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.base.gradient(x, out);
        let r2 = dot(x, x);
        let coef = 2.0 * self.eta * (self.r + 1.0) * pow_abs(r2, self.r);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += coef * xi;
        }
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let mut h = self.base.hessian(x)?;
        let d = x.len();
        let r2 = dot(x, x);
        let c = 2.0 * self.eta * (self.r + 1.0);
        let iso = c * pow_abs(r2, self.r);
        let radial = if r2 > 0.0 {
            c * 2.0 * self.r * pow_abs(r2, self.r - 1.0)
        } else {
            0.0
        };
        for i in 0..d {
            h[(i, i)] += iso;
            for j in 0..d {
                h[(i, j)] += radial * x[i] * x[j];
            }
        }
        Some(h)
    }

    fn kinks(&self, axis: usize) -> &[f64] {
        self.base.kinks(axis)
    }
}

/// Adds the high-order term `η|x|^{2r+2}` to `g`.
///
/// The result carries convexity-at-infinity constants
/// `(c1, c2, c3) = (η(r+1), L, L)` where `L(1 + |x|^l + |y|^l)` bounds the
/// Lipschitz modulus of `∇g` (converted from `g`'s declared polynomial
/// Lipschitz pair). A warning is logged when `r ≤ l/2`.
pub fn regularize(g: &PotentialSpec, eta: f64, r: f64) -> Result<PotentialSpec> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", format!("must be positive, got {eta}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("must be positive, got {r}")));
    }
    let base = g.regularity();
    let ll = base.local_lipschitz;
    // (1 + s + t)^p ≤ 3^{max(p−1, 0)} (1 + s^p + t^p)
    let lemma_l = ll.exponent;
    let lemma_coef = ll.coefficient * 3f64.powf((ll.exponent - 1.0).max(0.0));
    if r <= lemma_l / 2.0 {
        log::warn!(
            "regularize({}): r = {r} does not exceed l/2 = {}; convexity at infinity is not guaranteed",
            g.id(),
            lemma_l / 2.0
        );
    }

    let power_coef = 2.0 * eta * (r + 1.0);
    let growth_exp = base.growth.exponent.max(r + 0.5);
    // |x|^{2l_g} ≤ 1 + |x|^{2l}, |x|^{2r+1} ≤ 1 + |x|^{2l}
    let growth = Growth {
        coefficient: 2.0 * base.growth.coefficient + power_coef,
        exponent: growth_exp,
    };
    let local_lipschitz = LocalLipschitz {
        coefficient: ll.coefficient + power_coef * (2.0 * r + 1.0),
        exponent: ll.exponent.max(2.0 * r),
    };
    let dissipativity = base
        .dissipativity
        .or_else(|| derived_dissipativity(base.growth, power_coef, r));

    let objective = Arc::new(Regularized {
        base: g.objective().clone(),
        eta,
        r,
    });
    let mut spec = PotentialSpec::new(
        format!("regularized:{}:{}:{}", g.id(), eta, r),
        g.dim(),
        objective,
        Regularity {
            growth,
            local_lipschitz,
            dissipativity,
        },
    )?
    .with_convexity_at_infinity(ConvexityAtInfinity {
        c1: eta * (r + 1.0),
        c2: lemma_coef,
        c3: lemma_coef,
        r,
        l: lemma_l,
    });
    if g.is_non_confining() && dissipativity.is_none() {
        spec = spec.non_confining();
    }
    Ok(spec)
}

/// When `g` is not dissipative, use `⟨∇g, x⟩ ≥ −L(1 + |x|^{2l})|x|` and the
/// dominating power term to find `b` for `a = 1`. Requires `2r + 2 > 2l + 1`.
fn derived_dissipativity(growth: Growth, power_coef: f64, r: f64) -> Option<Dissipativity> {
    if 2.0 * r + 2.0 <= 2.0 * growth.exponent + 1.0 {
        return None;
    }
    let deficit = |t: f64| {
        t * t + growth.coefficient * (1.0 + t.powf(2.0 * growth.exponent)) * t
            - power_coef * t.powf(2.0 * r + 2.0)
    };
    // the deficit is eventually decreasing; scan until it goes negative for good
    let mut hi = 1.0;
    while deficit(hi) > -1.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let n = 100_000;
    let sup = (0..=n)
        .map(|i| deficit(hi * i as f64 / n as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    Some(Dissipativity {
        a: 1.0,
        b: sup.max(0.0) * 1.01 + 1e-6,
    })
}
