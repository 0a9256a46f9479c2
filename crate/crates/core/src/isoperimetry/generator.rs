use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::reference::{grid_reference, log_sum_exp, GridSpec};

/// Cells whose density is below `e^{-TRIM_NATS}` times the peak are cut
/// away (to the bounding box of the remaining cells) before assembly.
pub const TRIM_NATS: f64 = 69.0;

/// Finite-volume discretization of `L f = (1/β)Δf − ⟨∇f, ∇u⟩` as a weighted
/// graph: neighbouring cells `i, j` at spacing `s` are joined by the
/// conductance `w_ij = (1/β)√(π_i π_j)/s²`.
///
/// The generator is `L = −Π⁻¹ W` where `W` is the graph Laplacian of the
/// conductances and `Π = diag(π)`; it is self-adjoint in `L²(π)` by
/// construction.
#[derive(Clone)]
pub struct DiscreteGenerator {
    potential: PotentialSpec,
    beta: f64,
    /// Full grid the operator was built on.
    grid: GridSpec,
    /// Retained sub-box (per-axis cell ranges in `grid`).
    kept: Vec<(usize, usize)>,
    /// Log of the normalized mass of each retained cell.
    log_pi: Vec<f64>,
    /// Retained sub-box as its own grid.
    sub: GridSpec,
}

/// Summary exported alongside spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorInfo {
    pub grid: GridSpec,
    pub active_cells: usize,
    pub active_box: GridSpec,
}

impl std::fmt::Debug for DiscreteGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteGenerator")
            .field("potential", &self.potential.id())
            .field("beta", &self.beta)
            .field("grid", &self.grid)
            .field("kept", &self.kept)
            .finish()
    }
}

/// Assembles the discrete generator; the box must pass the same tail check
/// as [`grid_reference`].
pub fn discretize_generator(p: &PotentialSpec, beta: f64, grid: &GridSpec) -> Result<DiscreteGenerator> {
    let reference = grid_reference(p, beta, grid)?;
    let peak = reference
        .log_mass
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let d = grid.dim();
    let mut kept: Vec<(usize, usize)> = vec![(usize::MAX, 0); d];
    for (cell, &lm) in reference.log_mass.iter().enumerate() {
        if lm >= peak - TRIM_NATS {
            for (k, &i) in grid.unflatten(cell).iter().enumerate() {
                kept[k].0 = kept[k].0.min(i);
                kept[k].1 = kept[k].1.max(i + 1);
            }
        }
    }
    if kept.iter().any(|&(a, b)| b <= a + 1) {
        return Err(Error::InvalidInput(
            "density concentrates in a single cell along some axis; refine the grid".into(),
        ));
    }
    let sub = GridSpec::new(
        (0..d)
            .map(|k| grid.lower[k] + kept[k].0 as f64 * grid.spacing(k))
            .collect(),
        (0..d)
            .map(|k| grid.lower[k] + kept[k].1 as f64 * grid.spacing(k))
            .collect(),
        kept.iter().map(|&(a, b)| b - a).collect(),
    )?;
    let mut log_pi = Vec::with_capacity(sub.total_cells());
    for cell in 0..sub.total_cells() {
        let idx: Vec<usize> = sub
            .unflatten(cell)
            .iter()
            .zip(&kept)
            .map(|(i, (a, _))| i + a)
            .collect();
        log_pi.push(reference.log_mass[grid.flatten(&idx)]);
    }
    // renormalize on the retained box
    let lse = log_sum_exp(&log_pi);
    log_pi.iter_mut().for_each(|v| *v -= lse);
    Ok(DiscreteGenerator {
        potential: p.clone(),
        beta,
        grid: grid.clone(),
        kept,
        log_pi,
        sub,
    })
}

impl DiscreteGenerator {
    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn info(&self) -> OperatorInfo {
        OperatorInfo {
            grid: self.grid.clone(),
            active_cells: self.len(),
            active_box: self.sub.clone(),
        }
    }

    /// Number of retained cells.
    pub fn len(&self) -> usize {
        self.log_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pi.is_empty()
    }

    /// Normalized cell masses `π`.
    pub fn mass(&self) -> Vec<f64> {
        self.log_pi.iter().map(|v| v.exp()).collect()
    }

    /// `(1/β)/s²` for each axis.
    fn axis_scale(&self) -> Vec<f64> {
        (0..self.sub.dim())
            .map(|k| 1.0 / (self.beta * self.sub.spacing(k).powi(2)))
            .collect()
    }

    /// Visits every edge `(i, j, axis)` with `i < j` once.
    fn for_each_edge(&self, mut f: impl FnMut(usize, usize, usize)) {
        let n = &self.sub.n_cells;
        let d = n.len();
        let mut stride = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            stride[k] = stride[k + 1] * n[k + 1];
        }
        for cell in 0..self.len() {
            let idx = self.sub.unflatten(cell);
            for k in 0..d {
                if idx[k] + 1 < n[k] {
                    f(cell, cell + stride[k], k);
                }
            }
        }
    }

    /// Conductance-weighted Laplacian `W` as `(row, col, value)` triplets:
    /// off-diagonals `−w_ij`, diagonals `Σ_j w_ij`.
    pub fn laplacian_triplets(&self) -> Vec<(usize, usize, f64)> {
        let scale = self.axis_scale();
        let mut diag = vec![0.0; self.len()];
        let mut out = Vec::new();
        self.for_each_edge(|i, j, k| {
            let w = scale[k] * (0.5 * (self.log_pi[i] + self.log_pi[j])).exp();
            out.push((i, j, -w));
            out.push((j, i, -w));
            diag[i] += w;
            diag[j] += w;
        });
        out.extend(diag.into_iter().enumerate().map(|(i, v)| (i, i, v)));
        out
    }

    /// `(L f)_i = −(1/π_i) Σ_j w_ij (f_i − f_j)`.
    pub fn apply_generator(&self, f: &[f64], out: &mut [f64]) {
        let scale = self.axis_scale();
        out.fill(0.0);
        self.for_each_edge(|i, j, k| {
            let diff = f[i] - f[j];
            // w_ij / π_i = scale · √(π_j/π_i)
            out[i] -= scale[k] * (0.5 * (self.log_pi[j] - self.log_pi[i])).exp() * diff;
            out[j] += scale[k] * (0.5 * (self.log_pi[i] - self.log_pi[j])).exp() * diff;
        });
    }

    /// Diagonal of the symmetrized operator `S = Π^{-1/2} W Π^{-1/2}`.
    pub fn symmetric_diagonal(&self) -> Vec<f64> {
        let scale = self.axis_scale();
        let mut diag = vec![0.0; self.len()];
        self.for_each_edge(|i, j, k| {
            let half = 0.5 * (self.log_pi[j] - self.log_pi[i]);
            diag[i] += scale[k] * half.exp();
            diag[j] += scale[k] * (-half).exp();
        });
        diag
    }

    /// `out = S v` with `S = Π^{-1/2} W Π^{-1/2}`, which shares its spectrum
    /// with `−L`. Off-diagonals are `−(1/β)/s²`.
    pub fn apply_symmetric(&self, diag: &[f64], v: &[f64], out: &mut [f64]) {
        let scale = self.axis_scale();
        for i in 0..v.len() {
            out[i] = diag[i] * v[i];
        }
        self.for_each_edge(|i, j, k| {
            out[i] -= scale[k] * v[j];
            out[j] -= scale[k] * v[i];
        });
    }

    /// `(diag, off)` of `S` for 1-D grids.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.sub.dim() != 1 {
            return None;
        }
        let diag = self.symmetric_diagonal();
        let off = vec![-self.axis_scale()[0]; self.len() - 1];
        Some((diag, off))
    }

    /// Gershgorin bound on `‖S‖`.
    pub fn norm_estimate(&self, diag: &[f64]) -> f64 {
        let off: f64 = self.axis_scale().iter().map(|s| 2.0 * s).sum();
        diag.iter().fold(0.0f64, |m, d| m.max(d + off))
    }
}
