use serde::{Deserialize, Serialize};

use super::eigen::{lobpcg_smallest, tridiagonal_smallest, LobpcgOptions};
use super::generator::{discretize_generator, DiscreteGenerator};
use crate::error::{Error, Result};
use crate::reference::GridSpec;

/// Relative change of the gap under one grid doubling that still counts as
/// resolved.
pub const REFINEMENT_TOLERANCE: f64 = 0.05;

/// Lowest eigenvalues of `−L` on a grid. `gap` is the Poincaré constant in
/// the normalization `var(f) ≤ (1/gap)(1/β)∫|∇f|² dπ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub potential: String,
    pub beta: f64,
    pub grid: GridSpec,
    pub active_cells: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Gap on the grid with twice as many cells per axis.
    pub refined_gap: Option<f64>,
    /// Gap stable within [`REFINEMENT_TOLERANCE`] under refinement.
    pub converged: bool,
    pub solver: String,
}

/// The `k` smallest eigenvalues of `−L` without a refinement check.
pub fn spectrum(op: &DiscreteGenerator, k: usize) -> Result<(Vec<f64>, &'static str)> {
    if k < 2 {
        return Err(Error::param("k", "need at least 2 eigenvalues"));
    }
    if let Some((diag, off)) = op.tridiagonal() {
        return Ok((tridiagonal_smallest(&diag, &off, k)?, "sturm-bisection"));
    }
    let diag = op.symmetric_diagonal();
    let norm = op.norm_estimate(&diag);
    let res = lobpcg_smallest(
        op.len(),
        k,
        |v, out| op.apply_symmetric(&diag, v, out),
        &diag,
        norm,
        LobpcgOptions::default(),
    )?;
    Ok((res.values, "lobpcg-jacobi"))
}

fn refined(grid: &GridSpec) -> GridSpec {
    GridSpec {
        lower: grid.lower.clone(),
        upper: grid.upper.clone(),
        n_cells: grid.n_cells.iter().map(|n| 2 * n).collect(),
    }
}

/// Spectral gap of the discretized generator, checked once against a grid
/// with doubled resolution.
pub fn spectral_gap(op: &DiscreteGenerator, k: usize) -> Result<SpectrumResult> {
    let (eigenvalues, solver) = spectrum(op, k)?;
    let gap = eigenvalues[1];
    if !(gap > 0.0) || eigenvalues[0] > 1e-8 {
        return Err(Error::NumericalFailure {
            message: format!(
                "spectrum does not look like a connected generator (eig0 = {:e}, gap = {:e})",
                eigenvalues[0], gap
            ),
            residuals: eigenvalues.clone(),
        });
    }
    let fine = discretize_generator(op.potential(), op.beta(), &refined(op.grid()))?;
    let refined_gap = spectrum(&fine, 2)?.0[1];
    let converged = ((refined_gap - gap) / gap).abs() < REFINEMENT_TOLERANCE;
    Ok(SpectrumResult {
        potential: op.potential().id().to_string(),
        beta: op.beta(),
        grid: op.grid().clone(),
        active_cells: op.len(),
        eigenvalues,
        gap,
        refined_gap: Some(refined_gap),
        converged,
        solver: solver.to_string(),
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
