use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    dot, regularize, Dissipativity, Growth, LocalLipschitz, Objective, PotentialSpec, Regularity,
};
use crate::error::{Error, Result};

/// Ids accepted by [`by_id`], besides the `regularized:<id>:<eta>:<r>` form.
pub const CATALOG_IDS: &[&str] = &[
    "quadratic",
    "double_well",
    "quartic",
    "example1",
    "example2",
    "example2_xmarginal",
    "zero",
];

/// Resolves a catalog id. `dim` applies to the dimension-generic entries
/// (`quadratic`, `zero`) and defaults to 1; fixed-dimension entries reject a
/// mismatching `dim`.
pub fn by_id(id: &str, dim: Option<usize>) -> Result<PotentialSpec> {
    if let Some(rest) = id.strip_prefix("regularized:") {
        let mut parts = rest.rsplitn(3, ':');
        let r = parts.next();
        let eta = parts.next();
        let inner = parts.next();
        let (Some(inner), Some(eta), Some(r)) = (inner, eta, r) else {
            return Err(Error::UnknownPotential(id.to_string()));
        };
        let eta: f64 = eta
            .parse()
            .map_err(|_| Error::param("eta", format!("cannot parse `{eta}` in `{id}`")))?;
        let r: f64 = r
            .parse()
            .map_err(|_| Error::param("r", format!("cannot parse `{r}` in `{id}`")))?;
        let base = by_id(inner, dim)?;
        return regularize(&base, eta, r);
    }
    let p = match id {
        "quadratic" => quadratic(dim.unwrap_or(1)),
        "zero" => zero(dim.unwrap_or(1)),
        "double_well" => double_well(),
        "quartic" => quartic(),
        "example1" => example1(),
        "example2" => example2(),
        "example2_xmarginal" => example2_xmarginal(),
        _ => return Err(Error::UnknownPotential(id.to_string())),
    };
    if let Some(d) = dim {
        if d != p.dim() {
            return Err(Error::param(
                "dim",
                format!("`{id}` has fixed dimension {}, got {d}", p.dim()),
            ));
        }
    }
    Ok(p)
}

struct Quadratic;

impl Objective for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(x.len(), x.len()))
    }
}

/// `u(x) = |x|²/2`.
pub fn quadratic(dim: usize) -> PotentialSpec {
    PotentialSpec::new(
        "quadratic",
        dim.max(1),
        Arc::new(Quadratic),
        Regularity {
            growth: Growth {
                coefficient: 1.0,
                exponent: 0.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: 1.0,
                exponent: 1.0,
            },
            dissipativity: Some(Dissipativity { a: 1.0, b: 0.0 }),
        },
    )
    .expect("static constants")
    .with_known_minimum(vec![0.0; dim.max(1)], 0.0)
}

struct Zero;

impl Objective for Zero {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }
}

/// The constant potential `u ≡ 0`. Only usable on bounded boxes.
pub fn zero(dim: usize) -> PotentialSpec {
    PotentialSpec::new(
        "zero",
        dim.max(1),
        Arc::new(Zero),
        Regularity {
            growth: Growth {
                coefficient: 1.0,
                exponent: 0.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: 1.0,
                exponent: 1.0,
            },
            dissipativity: None,
        },
    )
    .expect("static constants")
    .non_confining()
}

struct DoubleWell;

impl Objective for DoubleWell {
    fn value(&self, x: &[f64]) -> f64 {
        let x2 = x[0] * x[0];
        0.25 * x2 * x2 - 0.5 * x2
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] * x[0] * x[0] - x[0];
    }
    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 3.0 * x[0] * x[0] - 1.0))
    }
}

/// `u(x) = x⁴/4 − x²/2` on the real line; minima at ±1, barrier 1/4.
pub fn double_well() -> PotentialSpec {
    PotentialSpec::new(
        "double_well",
        1,
        Arc::new(DoubleWell),
        Regularity {
            // |x³ − x| ≤ 2(1 + |x|³)
            growth: Growth {
                coefficient: 2.0,
                exponent: 1.5,
            },
            // |x² + xy + y² − 1| ≤ (1 + |x| + |y|)²
            local_lipschitz: LocalLipschitz {
                coefficient: 1.0,
                exponent: 2.0,
            },
            // x⁴ − x² ≥ x² − 1
            dissipativity: Some(Dissipativity { a: 1.0, b: 1.0 }),
        },
    )
    .expect("static constants")
    .with_known_minimum(vec![1.0], -0.25)
}

struct Quartic;

impl Objective for Quartic {
    fn value(&self, x: &[f64]) -> f64 {
        let x2 = x[0] * x[0];
        0.25 * x2 * x2
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] * x[0] * x[0];
    }
    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 3.0 * x[0] * x[0]))
    }
}

/// `u(x) = x⁴/4`, the classic example on which plain ULA diverges.
pub fn quartic() -> PotentialSpec {
    PotentialSpec::new(
        "quartic",
        1,
        Arc::new(Quartic),
        Regularity {
            growth: Growth {
                coefficient: 1.0,
                exponent: 1.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: 1.0,
                exponent: 2.0,
            },
            // x⁴ − x² + 1/4 = (x² − 1/2)²
            dissipativity: Some(Dissipativity { a: 1.0, b: 0.25 }),
        },
    )
    .expect("static constants")
    .with_known_minimum(vec![0.0], 0.0)
}

struct Example1;

impl Objective for Example1 {
    fn value(&self, v: &[f64]) -> f64 {
        let (x, y) = (v[0], v[1]);
        x * x * x / 3.0 + y * y + 2.0 * x * y - 6.0 * x - 3.0 * y + 4.0
    }
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        let (x, y) = (v[0], v[1]);
        out[0] = x * x + 2.0 * y - 6.0;
        out[1] = 2.0 * y + 2.0 * x - 3.0;
    }
    fn hessian(&self, v: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[2.0 * v[0], 2.0, 2.0, 2.0]))
    }
}

/// `g(x, y) = x³/3 + y² + 2xy − 6x − 3y + 4`: one saddle at (−1, 5/2), one
/// local minimum at (3, −3/2). The cubic term makes `e^{−βg}`
/// non-normalizable, so this entry is for critical-point analysis only.
pub fn example1() -> PotentialSpec {
    PotentialSpec::new(
        "example1",
        2,
        Arc::new(Example1),
        Regularity {
            growth: Growth {
                coefficient: 10.0,
                exponent: 1.0,
            },
            // ‖∇²g‖ ≤ 2|x| + 4
            local_lipschitz: LocalLipschitz {
                coefficient: 4.0,
                exponent: 1.0,
            },
            dissipativity: None,
        },
    )
    .expect("static constants")
    .non_confining()
}

/// `x`-part of example 2: `(|x| − 1)⁶/6 · 1{|x| ≥ 1} − x² − 4x`.
fn e2_value(x: f64) -> f64 {
    let t = x.abs() - 1.0;
    let outer = if t >= 0.0 { t.powi(6) / 6.0 } else { 0.0 };
    outer - x * x - 4.0 * x
}

fn e2_grad(x: f64) -> f64 {
    let t = x.abs() - 1.0;
    let outer = if t >= 0.0 { x.signum() * t.powi(5) } else { 0.0 };
    outer - 2.0 * x - 4.0
}

const E2_KINKS: [f64; 2] = [-1.0, 1.0];

struct Example2;

impl Objective for Example2 {
    fn value(&self, v: &[f64]) -> f64 {
        e2_value(v[0]) + 0.5 * v[1] * v[1] - v[1]
    }
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        out[0] = e2_grad(v[0]);
        out[1] = v[1] - 1.0;
    }
    fn kinks(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &E2_KINKS
        } else {
            &[]
        }
    }
}

struct Example2Marginal;

impl Objective for Example2Marginal {
    fn value(&self, v: &[f64]) -> f64 {
        e2_value(v[0])
    }
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        out[0] = e2_grad(v[0]);
    }
    fn kinks(&self, _axis: usize) -> &[f64] {
        &E2_KINKS
    }
}

/// Root of `(x − 1)⁵ = 2x + 4` on `x > 1`.
fn e2_minimizer() -> f64 {
    let mut x: f64 = 2.5;
    for _ in 0..100 {
        let t = x - 1.0;
        let step = (t.powi(5) - 2.0 * x - 4.0) / (5.0 * t.powi(4) - 2.0);
        x -= step;
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Supremum of `f` on `[lo, hi]` by dense scan.
fn scan_sup(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    (0..=n)
        .map(|i| f(lo + (hi - lo) * i as f64 / n as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `b` with `x·h_x(x) ≥ a x² − b` for the example-2 `x`-part, found
/// numerically. Beyond |x| = 10 the sextic term dominates.
fn e2_x_dissipativity_offset(a: f64) -> f64 {
    let sup = scan_sup(|x| a * x * x - x * e2_grad(x), -10.0, 10.0, 200_000);
    // grid resolution slack
    sup.max(0.0) * 1.01 + 1e-6
}

const E2_A: f64 = 0.5;

/// `u(x, y) = (|x| − 1)⁶/6 · 1{|x| ≥ 1} − x² − 4x + y²/2 − y`, unique
/// minimum near (2.5567, 1).
pub fn example2() -> PotentialSpec {
    // y-part: y² − y ≥ a y² − 1/(4(1 − a))
    let b = e2_x_dissipativity_offset(E2_A) + 0.25 / (1.0 - E2_A);
    let xm = e2_minimizer();
    PotentialSpec::new(
        "example2",
        2,
        Arc::new(Example2),
        Regularity {
            growth: Growth {
                coefficient: 5.0,
                exponent: 2.5,
            },
            // ‖∇²u‖ ≤ 5(|x| − 1)⁴ + 2 ≤ 7(1 + |x| + |y|)⁴
            local_lipschitz: LocalLipschitz {
                coefficient: 7.0,
                exponent: 4.0,
            },
            dissipativity: Some(Dissipativity { a: E2_A, b }),
        },
    )
    .expect("derived constants")
    .with_known_minimum(vec![xm, 1.0], e2_value(xm) - 0.5)
}

/// One-dimensional `x`-slice of [`example2`].
pub fn example2_xmarginal() -> PotentialSpec {
    let b = e2_x_dissipativity_offset(E2_A);
    let xm = e2_minimizer();
    PotentialSpec::new(
        "example2_xmarginal",
        1,
        Arc::new(Example2Marginal),
        Regularity {
            growth: Growth {
                coefficient: 5.0,
                exponent: 2.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: 7.0,
                exponent: 4.0,
            },
            dissipativity: Some(Dissipativity { a: E2_A, b }),
        },
    )
    .expect("derived constants")
    .with_known_minimum(vec![xm], e2_value(xm))
}
