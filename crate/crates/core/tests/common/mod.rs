#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use stula_core::potentials::{Dissipativity, Growth, LocalLipschitz, Objective, Regularity};
use stula_core::PotentialSpec;

/// `u(x) = m|x − c|²/2`.
pub struct Shifted {
    pub m: f64,
    pub c: f64,
}

impl Objective for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.m * x.iter().map(|v| (v - self.c).powi(2)).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.m * (v - self.c);
        }
    }
    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(x.len(), x.len()) * self.m)
    }
}

pub fn gaussian(dim: usize, m: f64, c: f64) -> PotentialSpec {
    PotentialSpec::new(
        format!("gaussian:{m}:{c}"),
        dim,
        Arc::new(Shifted { m, c }),
        Regularity {
            growth: Growth {
                coefficient: m * (1.0 + c.abs()),
                exponent: 0.5,
            },
            local_lipschitz: LocalLipschitz {
                coefficient: m,
                exponent: 1.0,
            },
            dissipativity: Some(Dissipativity {
                a: m / 2.0,
                b: m * c * c * dim as f64 / 2.0,
            }),
        },
    )
    .unwrap()
    .with_known_minimum(vec![c; dim], 0.0)
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
