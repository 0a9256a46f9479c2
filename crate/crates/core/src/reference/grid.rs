use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::rng::chain_rng;

/// Boundary cells must carry at most this fraction of the peak density.
pub const TAIL_RATIO_LIMIT: f64 = 1e-12;

/// Axis-aligned box split into equal cells. Cells are flattened with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, n_cells: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != n_cells.len() {
            return Err(Error::InvalidInput(
                "grid bounds and cell counts must have the same non-zero length".into(),
            ));
        }
        for k in 0..lower.len() {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(Error::InvalidInput(format!(
                    "axis {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if n_cells[k] == 0 {
                return Err(Error::InvalidInput(format!("axis {k}: zero cells")));
            }
        }
        Ok(Self {
            lower,
            upper,
            n_cells,
        })
    }

    /// Same box on every axis.
    pub fn cube(dim: usize, lower: f64, upper: f64, n_cells: usize) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim], vec![n_cells; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.n_cells[axis] as f64
    }

    pub fn total_cells(&self) -> usize {
        self.n_cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// Per-axis indices of a flat cell index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.n_cells[k];
            flat /= self.n_cells[k];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.n_cells)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn midpoint(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lower[k] + (i as f64 + 0.5) * self.spacing(k))
            .collect()
    }

    /// Cell containing `x`, if inside the box. The upper edge belongs to the
    /// last cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for k in 0..self.dim() {
            let v = x[k];
            if !(v >= self.lower[k] && v <= self.upper[k]) {
                return None;
            }
            let i = (((v - self.lower[k]) / self.spacing(k)) as usize).min(self.n_cells[k] - 1);
            flat = flat * self.n_cells[k] + i;
        }
        Some(flat)
    }

    fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(&self.n_cells)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }
}

/// Cell probabilities of `π_β ∝ e^{−βu}` on a box, by the midpoint rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: GridSpec,
    pub beta: f64,
    pub cell_mass: Vec<f64>,
    /// `log(cell_mass)`, accurate even where `cell_mass` underflows.
    pub log_mass: Vec<f64>,
    /// `−βu` at cell midpoints.
    pub log_unnormalized: Vec<f64>,
    /// `log Z_π`, with `Z_π = ∫_box e^{−βu}` by the midpoint rule.
    pub log_normalizer: f64,
}

impl GridDensity {
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// `∫ f dπ_β` by the midpoint rule.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.cell_mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| m * f(&self.grid.midpoint(i)))
            .sum()
    }

    /// Exact draws from the piecewise-uniform density on the grid.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut cdf = Vec::with_capacity(self.cell_mass.len());
        let mut acc = 0.0;
        for m in &self.cell_mass {
            acc += m;
            cdf.push(acc);
        }
        let d = self.grid.dim();
        let mut rng = chain_rng(seed, 0);
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u = rng.random::<f64>() * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let idx = self.grid.unflatten(cell);
            for (k, &i) in idx.iter().enumerate() {
                let h = self.grid.spacing(k);
                out.push(self.grid.lower[k] + (i as f64 + rng.random::<f64>()) * h);
            }
        }
        out
    }

    /// Writes `i0[,i1],x0[,x1],mass,log_density` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.grid.dim();
        let mut header: Vec<String> = (0..d).map(|k| format!("i{k}")).collect();
        header.extend((0..d).map(|k| format!("x{k}")));
        header.push("mass".into());
        header.push("log_density".into());
        writeln!(w, "{}", header.join(","))?;
        let log_vol = self.grid.cell_volume().ln();
        for cell in 0..self.cell_mass.len() {
            let idx = self.grid.unflatten(cell);
            let mid = self.grid.midpoint(cell);
            let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            row.extend(mid.iter().map(|&v| fmt_float(v)));
            row.push(fmt_float(self.cell_mass[cell]));
            row.push(fmt_float(self.log_mass[cell] - log_vol));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Float formatting used in every CSV output: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// `log Σ exp(v_i)`.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn edge_name(axis: usize, upper: bool) -> String {
    format!("{} x{axis}", if upper { "upper" } else { "lower" })
}

/// Builds the grid reference for `π_β`.
///
/// Confining potentials must leave negligible density on the boundary cells;
/// for non-confining ones (e.g. the flat potential) the box itself is the
/// support and no tail check applies.
pub fn grid_reference(p: &PotentialSpec, beta: f64, grid: &GridSpec) -> Result<GridDensity> {
    let d = grid.dim();
    if d != p.dim() {
        return Err(Error::GridMismatch(format!(
            "grid has dimension {d}, potential `{}` has {}",
            p.id(),
            p.dim()
        )));
    }
    if d > 2 {
        return Err(Error::InvalidInput("grid references support dim <= 2".into()));
    }
    if grid.n_cells.iter().any(|&n| n < 32) {
        return Err(Error::param("n_cells", "need at least 32 cells per axis"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    let total = grid.total_cells();
    let mut log_unnormalized = Vec::with_capacity(total);
    for cell in 0..total {
        let x = grid.midpoint(cell);
        let v = p.value(&x)?;
        log_unnormalized.push(-beta * v);
    }
    let lse = log_sum_exp(&log_unnormalized);
    let log_mass: Vec<f64> = log_unnormalized.iter().map(|v| v - lse).collect();
    let cell_mass: Vec<f64> = log_mass.iter().map(|v| v.exp()).collect();

    if !p.is_non_confining() {
        check_tails(grid, &log_unnormalized)?;
    }

    Ok(GridDensity {
        grid: grid.clone(),
        beta,
        cell_mass,
        log_mass,
        log_unnormalized,
        log_normalizer: lse + grid.cell_volume().ln(),
    })
}

fn check_tails(grid: &GridSpec, log_density: &[f64]) -> Result<()> {
    let peak = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut worst: Option<(f64, String)> = None;
    for (cell, &ld) in log_density.iter().enumerate() {
        let idx = grid.unflatten(cell);
        if !grid.is_boundary(&idx) {
            continue;
        }
        let rel = ld - peak;
        if worst.as_ref().is_some_and(|(w, _)| *w >= rel) {
            continue;
        }
        let (axis, upper) = idx
            .iter()
            .enumerate()
            .find_map(|(k, &i)| {
                if i == 0 {
                    Some((k, false))
                } else if i + 1 == grid.n_cells[k] {
                    Some((k, true))
                } else {
                    None
                }
            })
            .expect("boundary cell");
        worst = Some((rel, edge_name(axis, upper)));
    }
    if let Some((rel, edge)) = worst {
        if rel > TAIL_RATIO_LIMIT.ln() {
            return Err(Error::BoxTooSmall {
                edge,
                ratio: rel.exp(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{double_well, quadratic, zero};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn quadratic_matches_normal_intervals() {
        let grid = GridSpec::cube(1, -8.0, 8.0, 1024).unwrap();
        let g = grid_reference(&quadratic(1), 1.0, &grid).unwrap();
        let n = Normal::new(0.0, 1.0).unwrap();
        let s = grid.spacing(0);
        for (i, m) in g.cell_mass.iter().enumerate() {
            let lo = -8.0 + i as f64 * s;
            let exact = n.cdf(lo + s) - n.cdf(lo);
            assert!((m - exact).abs() < 1e-6, "cell {i}: {m} vs {exact}");
        }
        assert!((g.cell_mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Z = √(2π)
        assert!((g.normalizer() - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn flat_potential_is_uniform() {
        let grid = GridSpec::cube(2, -1.0, 1.0, 40).unwrap();
        let g = grid_reference(&zero(2), 1.0, &grid).unwrap();
        for m in &g.cell_mass {
            assert!((m - 1.0 / 1600.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_box_is_rejected() {
        let grid = GridSpec::cube(1, -0.5, 0.5, 64).unwrap();
        match grid_reference(&double_well(), 5.0, &grid) {
            Err(Error::BoxTooSmall { edge, .. }) => assert!(edge.contains("x0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_coarse_grids() {
        let grid = GridSpec::cube(1, -5.0, 5.0, 16).unwrap();
        assert!(grid_reference(&quadratic(1), 1.0, &grid).is_err());
    }

    #[test]
    fn flatten_roundtrip_and_locate() {
        let grid = GridSpec::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 8]).unwrap();
        for c in 0..32 {
            assert_eq!(grid.flatten(&grid.unflatten(c)), c);
            assert_eq!(grid.locate(&grid.midpoint(c)), Some(c));
        }
        assert_eq!(grid.locate(&[1.0, 1.0]), Some(31));
        assert_eq!(grid.locate(&[1.1, 0.0]), None);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let grid = GridSpec::cube(1, -8.0, 8.0, 32).unwrap();
        let g = grid_reference(&quadratic(1), 1.0, &grid).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i0,x0,mass,log_density"));
        assert_eq!(lines.count(), 32);
    }
}
