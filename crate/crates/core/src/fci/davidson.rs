//! Lowest-eigenpair Davidson iteration with diagonal preconditioning.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::eigh;

#[derive(Debug, Clone, Copy)]
pub struct DavidsonOptions {
    pub max_subspace: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            max_subspace: 24,
            max_iterations: 1000,
            tolerance: 1e-8,
        }
    }
}

pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthogonalizes `t` against `basis` (two Gram–Schmidt passes); returns
/// the remaining norm before normalization.
fn orthonormalize(basis: &[Vec<f64>], t: &mut [f64]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(t, -c, b);
        }
    }
    normalize(t)
}

pub fn davidson(
    diag: &[f64],
    guess: Vec<f64>,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    opts: &DavidsonOptions,
) -> Result<Eigenpair> {
    let n = diag.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut first = guess;
    normalize(&mut first);
    let mut pending = Some(first);
    let mut residual = f64::INFINITY;
    let mut x = vec![0.0; n];
    for iter in 1..=opts.max_iterations {
        if let Some(v) = pending.take() {
            images.push(apply(&v));
            basis.push(v);
        }
        let m = basis.len();
        let hs = DMatrix::from_fn(m, m, |i, j| dot(&basis[i], &images[j]));
        let hs = 0.5 * (&hs + hs.transpose());
        let (vals, vecs) = eigh(&hs);
        let theta = vals[0];
        x.iter_mut().for_each(|v| *v = 0.0);
        let mut r = vec![0.0; n];
        for k in 0..m {
            axpy(&mut x, vecs[(k, 0)], &basis[k]);
            axpy(&mut r, vecs[(k, 0)], &images[k]);
        }
        axpy(&mut r, -theta, &x);
        residual = dot(&r, &r).sqrt();
        if residual < opts.tolerance {
            normalize(&mut x);
            return Ok(Eigenpair {
                value: theta,
                vector: x,
                iterations: iter,
                residual,
            });
        }
        let mut t: Vec<f64> = r
            .iter()
            .zip(diag)
            .map(|(ri, di)| {
                let d = theta - di;
                let d = if d.abs() < 1e-8 {
                    1e-8f64.copysign(d)
                } else {
                    d
                };
                ri / d
            })
            .collect();
        if m >= opts.max_subspace {
            let hx: Vec<f64> = {
                let mut h = vec![0.0; n];
                for k in 0..m {
                    axpy(&mut h, vecs[(k, 0)], &images[k]);
                }
                h
            };
            let nx = normalize(&mut x);
            let hx: Vec<f64> = hx.iter().map(|v| v / nx).collect();
            basis = vec![x.clone()];
            images = vec![hx];
        }
        let norm = orthonormalize(&basis, &mut t);
        if norm < 1e-14 {
            // preconditioned residual lies in the subspace; fall back to r
            let mut rr = r.clone();
            if orthonormalize(&basis, &mut rr) < 1e-14 {
                break;
            }
            t = rr;
        }
        pending = Some(t);
    }
    Err(Error::DavidsonNotConverged {
        iterations: opts.max_iterations,
        residual,
    })
}
