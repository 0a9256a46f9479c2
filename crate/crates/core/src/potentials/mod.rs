//! Target potentials `u` with their gradient `h = ∇u`, declared regularity
//! constants and sampling-based assumption checkers.

mod catalog;
mod checks;
mod regularize;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use catalog::{
    by_id, double_well, example1, example2, example2_xmarginal, quadratic, quartic, zero,
    CATALOG_IDS,
};
pub(crate) use checks::{pointwise, test_points};
pub use checks::{
    verify_convexity_at_infinity, verify_dissipativity, verify_growth, verify_local_lipschitz,
    CheckReport, PairCheckReport, EVIDENCE_LABEL,
};
pub use regularize::regularize;

/// A differentiable objective on `R^d`.
///
/// Implementations must be pure: repeated calls with the same input return the
/// same output, and no interior mutability is allowed.
pub trait Objective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇u(x)` into `out` (same length as `x`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Analytic Hessian, when the objective provides one.
    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Coordinate values along `axis` across which the gradient is only
    /// piecewise smooth. Finite-difference stencils never straddle them.
    fn kinks(&self, _axis: usize) -> &[f64] {
        &[]
    }
}

/// A1 drift growth: `|h(x)| ≤ L (1 + |x|^{2l})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub coefficient: f64,
    pub exponent: f64,
}

/// A2 polynomial Lipschitz bound: `|h(x) − h(y)| ≤ L' (1 + |x| + |y|)^{l'} |x − y|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLipschitz {
    pub coefficient: f64,
    pub exponent: f64,
}

/// A3 dissipativity: `⟨h(x), x⟩ ≥ a |x|² − b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipativity {
    pub a: f64,
    pub b: f64,
}

/// Constants of the convexity-at-infinity inequality
/// `⟨h(x) − h(y), x − y⟩ ≥ (c1(|x|^{2r} + |y|^{2r}) − c2(|x|^l + |y|^l) − c3)|x − y|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityAtInfinity {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownMinimum {
    pub location: Vec<f64>,
    pub value: f64,
}

/// Regularity constants declared alongside a potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub growth: Growth,
    pub local_lipschitz: LocalLipschitz,
    pub dissipativity: Option<Dissipativity>,
}

/// A target potential together with its declared metadata. Immutable once
/// built and cheap to clone.
#[derive(Clone)]
pub struct PotentialSpec {
    id: String,
    dim: usize,
    objective: Arc<dyn Objective>,
    regularity: Regularity,
    known_minimum: Option<KnownMinimum>,
    convexity_at_infinity: Option<ConvexityAtInfinity>,
    non_confining: bool,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("regularity", &self.regularity)
            .field("known_minimum", &self.known_minimum)
            .field("convexity_at_infinity", &self.convexity_at_infinity)
            .field("non_confining", &self.non_confining)
            .finish()
    }
}

impl PotentialSpec {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        objective: Arc<dyn Objective>,
        regularity: Regularity,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let Regularity {
            growth,
            local_lipschitz,
            dissipativity,
        } = regularity;
        for (name, v) in [
            ("growth.coefficient", growth.coefficient),
            ("growth.exponent", growth.exponent),
            ("local_lipschitz.coefficient", local_lipschitz.coefficient),
            ("local_lipschitz.exponent", local_lipschitz.exponent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(d) = dissipativity {
            if !(d.a > 0.0 && d.b >= 0.0 && d.a.is_finite() && d.b.is_finite()) {
                return Err(Error::param(
                    "dissipativity",
                    format!("need a > 0 and b >= 0, got ({}, {})", d.a, d.b),
                ));
            }
        }
        Ok(Self {
            id: id.into(),
            dim,
            objective,
            regularity,
            known_minimum: None,
            convexity_at_infinity: None,
            non_confining: false,
        })
    }

    pub fn with_known_minimum(mut self, location: Vec<f64>, value: f64) -> Self {
        debug_assert_eq!(location.len(), self.dim);
        self.known_minimum = Some(KnownMinimum { location, value });
        self
    }

    pub fn with_convexity_at_infinity(mut self, c: ConvexityAtInfinity) -> Self {
        self.convexity_at_infinity = Some(c);
        self
    }

    /// Marks a potential whose Gibbs measure cannot be normalized; such
    /// potentials are rejected as sampling targets.
    pub fn non_confining(mut self) -> Self {
        self.non_confining = true;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn regularity(&self) -> &Regularity {
        &self.regularity
    }

    pub fn growth(&self) -> Growth {
        self.regularity.growth
    }

    pub fn local_lipschitz(&self) -> LocalLipschitz {
        self.regularity.local_lipschitz
    }

    pub fn dissipativity(&self) -> Option<Dissipativity> {
        self.regularity.dissipativity
    }

    /// Dissipativity constants, or a missing-metadata error.
    pub fn require_dissipativity(&self) -> Result<Dissipativity> {
        self.regularity
            .dissipativity
            .ok_or_else(|| Error::MissingMetadata {
                potential: self.id.clone(),
                field: "dissipativity",
            })
    }

    pub fn known_minimum(&self) -> Option<&KnownMinimum> {
        self.known_minimum.as_ref()
    }

    pub fn convexity_at_infinity(&self) -> Option<ConvexityAtInfinity> {
        self.convexity_at_infinity
    }

    pub fn is_non_confining(&self) -> bool {
        self.non_confining
    }

    pub fn has_analytic_hessian(&self) -> bool {
        let origin = vec![0.0; self.dim];
        self.objective.hessian(&origin).is_some()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has length {}, potential `{}` has dimension {}",
                x.len(),
                self.id,
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {x:?}")));
        }
        Ok(())
    }

    /// Returns `(u(x), h(x))`.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let value = self.objective.value(x);
        let mut grad = vec![0.0; self.dim];
        self.objective.gradient(x, &mut grad);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Overflow { x: x.to_vec() });
        }
        Ok((value, grad))
    }

    /// Checked potential value.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let v = self.objective.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { x: x.to_vec() })
        }
    }

    /// Checked gradient.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x).map(|(_, g)| g)
    }

    /// Unchecked gradient for inner loops.
    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.objective.gradient(x, out);
    }

    /// Hessian of `u` at `x`: analytic when available, otherwise central
    /// differences of `h` (one-sided next to declared kinks). Always
    /// symmetrized.
    pub fn hessian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let mut hess = match self.objective.hessian(x) {
            Some(m) => m,
            None => self.fd_hessian(x),
        };
        let t = hess.transpose();
        hess = (hess + t) * 0.5;
        if hess.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { x: x.to_vec() });
        }
        Ok(hess)
    }

    /// Finite-difference Hessian built from gradient evaluations.
    pub fn fd_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let eps3 = f64::EPSILON.cbrt();
        let mut m = DMatrix::zeros(d, d);
        let mut probe = x.to_vec();
        let mut g0 = vec![0.0; d];
        let mut g1 = vec![0.0; d];
        let mut g2 = vec![0.0; d];
        for j in 0..d {
            let step = eps3 * (1.0 + x[j].abs());
            let near_kink = self
                .objective
                .kinks(j)
                .iter()
                .find(|&&k| (x[j] - k).abs() < 2.0 * step)
                .copied();
            match near_kink {
                None => {
                    probe[j] = x[j] + step;
                    self.objective.gradient(&probe, &mut g1);
                    probe[j] = x[j] - step;
                    self.objective.gradient(&probe, &mut g2);
                    for i in 0..d {
                        m[(i, j)] = (g1[i] - g2[i]) / (2.0 * step);
                    }
                }
                Some(k) => {
                    // second-order one-sided stencil on the side away from the kink
                    let dir = if x[j] >= k { 1.0 } else { -1.0 };
                    self.objective.gradient(x, &mut g0);
                    probe[j] = x[j] + dir * step;
                    self.objective.gradient(&probe, &mut g1);
                    probe[j] = x[j] + dir * 2.0 * step;
                    self.objective.gradient(&probe, &mut g2);
                    for i in 0..d {
                        m[(i, j)] = dir * (-3.0 * g0[i] + 4.0 * g1[i] - g2[i]) / (2.0 * step);
                    }
                }
            }
            probe[j] = x[j];
        }
        m
    }
}

/// `|x|` for a slice.
#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `r^p` for `r ≥ 0`, with an integer fast path.
#[inline]
pub fn pow_abs(r: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() < 64.0 {
        r.powi(p as i32)
    } else {
        r.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_rejects_bad_points() {
        let p = double_well();
        assert!(matches!(p.eval(&[0.0, 1.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(p.eval(&[f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(p.eval(&[1e200]), Err(Error::Overflow { .. })));
    }

    #[test]
    fn eval_examples() {
        let (v, g) = double_well().eval(&[0.0]).unwrap();
        assert_eq!((v, g[0]), (0.0, 0.0));

        let (_, g) = example1().eval(&[-1.0, 2.5]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);

        let (_, g) = example2().eval(&[2.5557, 1.0]).unwrap();
        assert!(norm(&g) <= 1e-2, "{g:?}");
    }

    #[test]
    fn hessian_examples() {
        let h = example1().hessian_at(&[3.0, -1.5]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[6.0, 2.0, 2.0, 2.0]));

        let h = double_well().hessian_at(&[0.0]).unwrap();
        assert_eq!(h[(0, 0)], -1.0);

        let h = quadratic(3).hessian_at(&[0.3, -2.0, 7.0]).unwrap();
        assert_eq!(h, DMatrix::identity(3, 3));
    }

    #[test]
    fn fd_hessian_tracks_analytic() {
        for p in [double_well(), example1(), quadratic(2), quartic()] {
            for i in 0..20 {
                let x: Vec<f64> = (0..p.dim())
                    .map(|k| ((i * 7 + k * 3) as f64 * 0.37).sin() * 3.0)
                    .collect();
                let exact = p.objective().hessian(&x).unwrap();
                let fd = p.fd_hessian(&x);
                for (a, b) in exact.iter().zip(fd.iter()) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "{} {a} {b}", p.id());
                }
            }
        }
    }

    #[test]
    fn fd_hessian_near_kink_is_one_sided() {
        // u_xx = 5(|x|-1)^4 - 2 outside, -2 inside; the kink is at |x| = 1.
        let p = example2();
        let h_out = p.hessian_at(&[1.0 + 1e-7, 0.0]).unwrap();
        let h_in = p.hessian_at(&[1.0 - 1e-7, 0.0]).unwrap();
        assert_relative_eq!(h_out[(0, 0)], -2.0, epsilon = 1e-4);
        assert_relative_eq!(h_in[(0, 0)], -2.0, epsilon = 1e-4);
        let h = p.hessian_at(&[2.5567, 1.0]).unwrap();
        assert_relative_eq!(h[(0, 0)], 5.0 * 1.5567f64.powi(4) - 2.0, max_relative = 1e-5);
        assert_relative_eq!(h[(1, 1)], 1.0, max_relative = 1e-6);
    }

    #[test]
    fn pow_abs_fast_path_matches_powf() {
        for r in [0.0, 0.5, 1.0, 3.7] {
            for p in [0.0, 1.0, 2.0, 3.0, 1.5, 2.5] {
                assert_relative_eq!(pow_abs(r, p), r.powf(p), max_relative = 1e-14);
            }
        }
    }
}
