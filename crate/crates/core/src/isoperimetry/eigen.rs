//! Symmetric eigensolvers for the discretized generator: Sturm bisection for
//! tridiagonal matrices and LOBPCG for general sparse operators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::chain_rng;

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` strictly
/// below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        }
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues (ascending) of a symmetric tridiagonal
/// matrix, by bisection on the Sturm sequence. Accurate to a few ulps of the
/// matrix norm.
pub fn tridiagonal_smallest(diag: &[f64], off: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidInput("tridiagonal: need off.len() == diag.len() - 1".into()));
    }
    let k = k.min(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let (lo, hi) = (lo - 1e-12 * scale, hi + 1e-12 * scale);
    (0..k)
        .map(|i| {
            // smallest x with count(x) > i
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) > i {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            Ok(0.5 * (a + b))
        })
        .collect()
}

/// Settings for [`lobpcg_smallest`].
#[derive(Debug, Clone, Copy)]
pub struct LobpcgOptions {
    pub max_iter: usize,
    /// Convergence when `‖Ax − θx‖ ≤ tol · ‖A‖` for each wanted pair.
    pub tol: f64,
    /// Extra block columns carried along to speed up the wanted ones.
    pub guard: usize,
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-9,
            guard: 3,
            seed: 0x5eed,
        }
    }
}

fn orthonormalize(cols: &mut Vec<Vec<f64>>, keep_first: usize) {
    // two passes of modified Gram-Schmidt; drop columns that collapse
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for (idx, mut v) in cols.drain(..).enumerate() {
        let norm0 = dotv(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &out {
                let c = dotv(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nrm = dotv(&v, &v).sqrt();
        if idx < keep_first || nrm > 1e-10 * norm0.max(f64::MIN_POSITIVE) {
            if nrm > 0.0 {
                v.iter_mut().for_each(|a| *a /= nrm);
                out.push(v);
            }
        }
    }
    *cols = out;
}

#[inline]
fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Eigenpairs from [`lobpcg_smallest`].
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// The `k` smallest eigenvalues of the symmetric operator `apply` (size `n`)
/// by block LOBPCG with a Jacobi preconditioner. `diag` is the operator's
/// diagonal; `norm_estimate` scales the residual tolerance.
pub fn lobpcg_smallest(
    n: usize,
    k: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    norm_estimate: f64,
    opts: LobpcgOptions,
) -> Result<EigenResult> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("lobpcg: need n > 0 and k > 0".into()));
    }
    let m = (k + opts.guard).min(n);
    if 3 * m >= n {
        // tiny problem: dense solve
        let mut a = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            apply(&e, &mut col);
            for i in 0..n {
                a[(i, j)] = col[i];
            }
        }
        let a = (a.clone() + a.transpose()) * 0.5;
        let mut vals: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.truncate(k.min(n));
        return Ok(EigenResult {
            residuals: vec![0.0; vals.len()],
            values: vals,
            iterations: 0,
        });
    }

    let mut rng = chain_rng(opts.seed, 0);
    let mut x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut x, m);
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut ax: Vec<Vec<f64>> = x
        .iter()
        .map(|v| {
            let mut o = vec![0.0; n];
            apply(v, &mut o);
            o
        })
        .collect();
    let mut theta: Vec<f64> = x.iter().zip(&ax).map(|(v, a)| dotv(v, a)).collect();
    let scale = norm_estimate.max(f64::MIN_POSITIVE);
    let mut residuals = vec![f64::INFINITY; m];

    for iter in 0..opts.max_iter {
        // residuals
        let r: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let mut rj = ax[j].clone();
                axpy(-theta[j], &x[j], &mut rj);
                rj
            })
            .collect();
        for j in 0..m {
            residuals[j] = dotv(&r[j], &r[j]).sqrt();
        }
        if residuals[..k].iter().all(|&res| res <= opts.tol * scale) {
            return Ok(EigenResult {
                values: theta[..k].to_vec(),
                residuals: residuals[..k].to_vec(),
                iterations: iter,
            });
        }
        // preconditioned residuals for the active columns
        let w: Vec<Vec<f64>> = r
            .into_iter()
            .enumerate()
            .filter(|(j, _)| residuals[*j] > 0.1 * opts.tol * scale)
            .map(|(j, mut rj)| {
                for (i, v) in rj.iter_mut().enumerate() {
                    let d = diag[i] - theta[j];
                    *v /= if d.abs() > 1e-12 * scale { d.abs() } else { scale };
                }
                rj
            })
            .collect();

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + w.len() + p.len());
        basis.extend(x.iter().cloned());
        basis.extend(w);
        basis.extend(p.iter().cloned());
        orthonormalize(&mut basis, m);
        let b = basis.len();
        let ab: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| {
                let mut o = vec![0.0; n];
                apply(v, &mut o);
                o
            })
            .collect();
        let mut g = DMatrix::zeros(b, b);
        for i in 0..b {
            for j in i..b {
                let v = dotv(&basis[i], &ab[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut new_x = vec![vec![0.0; n]; m];
        let mut new_ax = vec![vec![0.0; n]; m];
        let mut new_p = vec![vec![0.0; n]; m];
        for (col, &o) in order.iter().take(m).enumerate() {
            for i in 0..b {
                let c = eig.eigenvectors[(i, o)];
                if c == 0.0 {
                    continue;
                }
                axpy(c, &basis[i], &mut new_x[col]);
                axpy(c, &ab[i], &mut new_ax[col]);
                if i >= m {
                    axpy(c, &basis[i], &mut new_p[col]);
                }
            }
            theta[col] = eig.eigenvalues[o];
        }
        x = new_x;
        ax = new_ax;
        p = if b > m { new_p } else { Vec::new() };
    }
    Err(Error::NumericalFailure {
        message: format!("LOBPCG did not converge in {} iterations", opts.max_iter),
        residuals: residuals[..k].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; n], vec![-1.0; n - 1])
    }

    fn exact_dirichlet(n: usize, j: usize) -> f64 {
        // eigenvalues 2 − 2cos(jπ/(n+1))
        2.0 - 2.0 * ((j as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos()
    }

    #[test]
    fn bisection_matches_closed_form() {
        let n = 500;
        let (d, e) = laplacian_1d(n);
        let vals = tridiagonal_smallest(&d, &e, 6).unwrap();
        for (j, v) in vals.iter().enumerate() {
            assert!((v - exact_dirichlet(n, j + 1)).abs() < 1e-13, "{j}: {v}");
        }
    }

    #[test]
    fn bisection_rejects_bad_shapes() {
        assert!(tridiagonal_smallest(&[1.0, 2.0], &[], 1).is_err());
    }

    #[test]
    fn lobpcg_matches_bisection() {
        let n = 400;
        let (d, e) = laplacian_1d(n);
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut s = d[i] * v[i];
                if i > 0 {
                    s += e[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += e[i] * v[i + 1];
                }
                out[i] = s;
            }
        };
        let opts = LobpcgOptions {
            max_iter: 20_000,
            ..Default::default()
        };
        let res = lobpcg_smallest(n, 4, apply, &d, 4.0, opts).unwrap();
        let exact = tridiagonal_smallest(&d, &e, 4).unwrap();
        for (a, b) in res.values.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn lobpcg_small_dense_fallback() {
        let d = vec![3.0, 1.0, 2.0];
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = d[i] * v[i];
            }
        };
        let res = lobpcg_smallest(3, 2, apply, &d, 3.0, LobpcgOptions::default()).unwrap();
        assert_eq!(res.values.len(), 2);
        assert!((res.values[0] - 1.0).abs() < 1e-14 && (res.values[1] - 2.0).abs() < 1e-14);
    }
}
