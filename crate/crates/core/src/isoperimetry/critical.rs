use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{norm, PotentialSpec};

/// Default threshold below which a Hessian eigenvalue counts as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub residual: f64,
    /// Ascending.
    pub hessian_eigenvalues: Vec<f64>,
    pub classification: Classification,
    /// `min |eigenvalue|`.
    pub morse_margin: f64,
}

/// Regular grid of Newton starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub per_axis: usize,
}

impl SeedGrid {
    pub fn cube(dim: usize, lower: f64, upper: f64, per_axis: usize) -> Self {
        Self {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
            per_axis,
        }
    }

    fn points(&self) -> Vec<Vec<f64>> {
        let d = self.lower.len();
        let n = self.per_axis.max(1);
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut flat| {
                let mut x = vec![0.0; d];
                for k in (0..d).rev() {
                    let i = flat % n;
                    flat /= n;
                    x[k] = if n == 1 {
                        0.5 * (self.lower[k] + self.upper[k])
                    } else {
                        self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / (n - 1) as f64
                    };
                }
                x
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSearch {
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    pub dropped_seeds: usize,
}

const MAX_ITER: usize = 200;
const ESCAPE_RADIUS: f64 = 1e6;

fn residual(p: &PotentialSpec, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    p.gradient(x).ok().map(|g| (norm(&g), g))
}

/// Damped Newton on `h = ∇u` with a gradient-descent fallback on `½|h|²`.
/// Converged once both the residual and the last step are below `tol`, so
/// degenerate points (where Newton is only linear) are still located.
fn newton(p: &PotentialSpec, start: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    let (mut r, mut g) = residual(p, &x)?;
    for _ in 0..MAX_ITER {
        if r == 0.0 {
            return Some(x);
        }
        let hess = p.hessian_at(&x).ok()?;
        let gv = DVector::from_column_slice(&g);
        let newton_dir = hess.clone().lu().solve(&gv).map(|s| -s);
        let mut step_len = None;
        if let Some(dir) = newton_dir.filter(|d| d.iter().all(|v| v.is_finite())) {
            let mut t = 1.0;
            for _ in 0..30 {
                let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
                if let Some((rc, gc)) = residual(p, &cand) {
                    if rc < r {
                        x = cand;
                        r = rc;
                        g = gc;
                        step_len = Some(t * dir.norm());
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if step_len.is_none() {
            // descent on ½|h|²: direction −H h
            let dir: DVector<f64> = -(&hess * &gv);
            let mut t = 1.0 / (1.0 + dir.norm());
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
                if let Some((rc, gc)) = residual(p, &cand) {
                    if rc < r {
                        x = cand;
                        r = rc;
                        g = gc;
                        step_len = Some(t * dir.norm());
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        match step_len {
            None => return (r <= tol).then_some(x),
            Some(s) if r <= tol && s <= tol => return Some(x),
            _ => {}
        }
        if norm(&x) > ESCAPE_RADIUS {
            return None;
        }
    }
    (r <= tol).then_some(x)
}

/// Classifies a critical point from its Hessian.
pub fn classify(p: &PotentialSpec, x: &[f64], degeneracy_threshold: f64) -> Result<CriticalPoint> {
    let hess: DMatrix<f64> = p.hessian_at(x)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let margin = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let classification = if margin < degeneracy_threshold {
        Classification::Degenerate
    } else if eig.iter().all(|&v| v > 0.0) {
        Classification::Minimum
    } else if eig.iter().all(|&v| v < 0.0) {
        Classification::Maximum
    } else {
        Classification::Saddle
    };
    Ok(CriticalPoint {
        location: x.to_vec(),
        residual: norm(&p.gradient(x)?),
        hessian_eigenvalues: eig,
        classification,
        morse_margin: margin,
    })
}

/// Runs Newton from every seed, deduplicates converged points closer than
/// `10·tol` and classifies them. Sorted lexicographically by location.
pub fn find_critical_points(p: &PotentialSpec, seeds: &SeedGrid, tol: f64) -> Result<CriticalPointSearch> {
    if p.dim() > 3 {
        return Err(Error::InvalidInput("critical-point search supports dim <= 3".into()));
    }
    if seeds.lower.len() != p.dim() || seeds.upper.len() != p.dim() {
        return Err(Error::InvalidInput("seed grid dimension mismatch".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let starts = seeds.points();
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0;
    for s in &starts {
        match newton(p, s, tol) {
            Some(x) => {
                let dup = found.iter().any(|f| {
                    let d: Vec<f64> = f.iter().zip(&x).map(|(a, b)| a - b).collect();
                    norm(&d) < 10.0 * tol.max(1e-12)
                });
                if !dup {
                    found.push(x);
                }
            }
            None => dropped += 1,
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let points = found
        .iter()
        .map(|x| classify(p, x, DEGENERACY_THRESHOLD))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalPointSearch {
        points,
        seeds: starts.len(),
        dropped_seeds: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    /// Smallest `|eigenvalue|` over all critical points.
    pub l_star: f64,
    /// `sup` over non-minima of their smallest eigenvalue (`None` if every
    /// point is a minimum).
    pub saddle_max_eigenvalue_bound: Option<f64>,
    pub pass: bool,
}

/// Morse check: no degenerate points and every non-minimum has an
/// eigenvalue `≤ −l*`.
pub fn morse_report(points: &[CriticalPoint]) -> Result<MorseReport> {
    if points.is_empty() {
        return Err(Error::InvalidInput("morse_report needs at least one critical point".into()));
    }
    let l_star = points.iter().fold(f64::INFINITY, |m, c| m.min(c.morse_margin));
    let non_minima: Vec<&CriticalPoint> = points
        .iter()
        .filter(|c| c.classification != Classification::Minimum)
        .collect();
    let bound = non_minima
        .iter()
        .map(|c| c.hessian_eigenvalues[0])
        .reduce(f64::max);
    let degenerate = points.iter().any(|c| c.classification == Classification::Degenerate);
    let pass = !degenerate && non_minima.iter().all(|c| c.hessian_eigenvalues[0] <= -l_star);
    Ok(MorseReport {
        l_star,
        saddle_max_eigenvalue_bound: bound,
        pass,
    })
}
