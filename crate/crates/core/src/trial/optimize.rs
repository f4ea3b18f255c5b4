//! Quasi-Newton minimization with central finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            gradient_tolerance: 1e-6,
            max_iterations: 500,
            fd_step: 1e-4,
        }
    }
}

pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

pub fn fd_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut y = x.to_vec();
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let fp = f(&y);
        y[k] = x[k] - h;
        let fm = f(&y);
        y[k] = x[k];
        g[k] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS with Armijo backtracking. Stagnation (no acceptable step while the
/// gradient is still above tolerance) is reported with the best point.
pub fn bfgs(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &OptimizerOptions,
) -> Result<Minimum> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if n == 0 {
        return Ok(Minimum {
            x: vec![],
            value: fx,
            gradient_norm: 0.0,
            iterations: 0,
        });
    }
    let mut g = fd_gradient(&mut f, x.as_slice(), opts.fd_step);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    for iter in 0..opts.max_iterations {
        let gn = g.norm();
        if gn < opts.gradient_tolerance {
            return Ok(Minimum {
                x: x.as_slice().to_vec(),
                value: fx,
                gradient_norm: gn,
                iterations: iter,
            });
        }
        let mut p = -(&hinv * &g);
        if p.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            p = -g.clone();
        }
        // keep trial steps modest: amplitudes and rotation angles are O(1)
        let pn = p.norm();
        if pn > 0.5 {
            p *= 0.5 / pn;
        }
        let slope = p.dot(&g);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-10 {
            let xn = &x + alpha * &p;
            let fxn = f(xn.as_slice());
            if fxn <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fxn));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xn, fxn)) => {
                let gn_new = fd_gradient(&mut f, xn.as_slice(), opts.fd_step);
                let s = &xn - &x;
                let y = &gn_new - &g;
                let sy = s.dot(&y);
                if sy > 1e-14 {
                    let rho = 1.0 / sy;
                    let i = DMatrix::<f64>::identity(n, n);
                    let a = &i - rho * &s * y.transpose();
                    let b = &i - rho * &y * s.transpose();
                    hinv = &a * &hinv * &b + rho * &s * s.transpose();
                }
                x = xn;
                fx = fxn;
                g = gn_new;
                fresh = false;
            }
            None if !fresh => {
                hinv = DMatrix::identity(n, n);
                fresh = true;
            }
            None => break,
        }
    }
    let gn = g.norm();
    if gn < opts.gradient_tolerance {
        return Ok(Minimum {
            x: x.as_slice().to_vec(),
            value: fx,
            gradient_norm: gn,
            iterations: opts.max_iterations,
        });
    }
    Err(Error::Stagnation {
        energy: fx,
        gradient: gn,
        params: x.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_like_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2) + x[0] * x[1];
        let m = bfgs(f, &[0.0, 0.0], &OptimizerOptions::default()).unwrap();
        // stationary point of the quadratic
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 20.0]);
        let b = DVector::from_column_slice(&[2.0, -10.0]);
        let exact = a.lu().solve(&b).unwrap();
        assert!((m.x[0] - exact[0]).abs() < 1e-6);
        assert!((m.x[1] - exact[1]).abs() < 1e-6);
    }

    #[test]
    fn periodic_function() {
        let f = |x: &[f64]| -x[0].cos() - 0.5 * x[1].cos() + 0.2 * x[0] * x[1];
        let m = bfgs(f, &[0.4, 0.3], &OptimizerOptions::default()).unwrap();
        assert!(m.x[0].abs() < 1e-5 && m.x[1].abs() < 1e-5);
    }
}
