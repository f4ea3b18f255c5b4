//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Symmetric eigendecomposition with eigenvalues ascending and columns
/// reordered to match.
pub fn eigh(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// V f(Λ) Vᵀ for a symmetric matrix.
pub fn sym_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = eigh(m);
    let fd = DMatrix::from_diagonal(&vals.map(f));
    &vecs * fd * vecs.transpose()
}

/// Symmetric inverse square root with eigenvalue floor `eps` added.
pub fn inv_sqrt(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    sym_function(m, |x| 1.0 / (x + eps).sqrt())
}

pub fn sqrt_sym(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    sym_function(m, |x| (x + eps).max(0.0).sqrt())
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).sum::<f64>().max(a.norm());
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &a / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// exp(A)·B for complex A by truncated Taylor series; A is expected to be
/// small in norm (one imaginary-time step).
pub fn expm_apply(a: &CMatrix, b: &CMatrix, order: usize) -> CMatrix {
    let mut result = b.clone();
    let mut term = b.clone();
    for k in 1..=order {
        term = a * term / Complex64::new(k as f64, 0.0);
        result += &term;
    }
    result
}

pub fn cdet(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Determinant and inverse by Gauss–Jordan elimination with partial
/// pivoting on |z|²; the inverse is `None` for an exactly singular matrix.
pub fn cdet_inverse(m: &CMatrix) -> (Complex64, Option<CMatrix>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = CMatrix::identity(n, n);
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].norm_sqr();
        for r in col + 1..n {
            let v = a[(r, col)].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return (Complex64::new(0.0, 0.0), None);
        }
        if piv != col {
            a.swap_rows(piv, col);
            inv.swap_rows(piv, col);
            det = -det;
        }
        let d = a[(col, col)];
        det *= d;
        let dinv = d.inv();
        for c in 0..n {
            a[(col, c)] *= dinv;
            inv[(col, c)] *= dinv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for c in 0..n {
                let ac = a[(col, c)];
                let ic = inv[(col, c)];
                a[(r, c)] -= f * ac;
                inv[(r, c)] -= f * ic;
            }
        }
    }
    (det, Some(inv))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Rows `rows` of `m` as a new matrix.
pub fn select_rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Householder QR returning (Q thin, R) for a complex tall matrix.
pub fn cqr(m: &CMatrix) -> (CMatrix, CMatrix) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let theta: f64 = 0.7;
        let k = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let u = expm(&k);
        assert!((u[(0, 0)] - theta.cos()).abs() < 1e-14);
        assert!((u[(1, 0)] - theta.sin()).abs() < 1e-14);
        let big = DMatrix::from_row_slice(2, 2, &[0.0, -9.0, 9.0, 0.0]);
        let u = expm(&big);
        assert!((u.transpose() * &u - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn eigh_sorted() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let (vals, vecs) = eigh(&m);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let back = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn complex_inverse_and_determinant() {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            Complex64::new(
                (i * 4 + j) as f64 % 5.0 - 1.5,
                (i + 2 * j) as f64 * 0.3 - 0.7,
            )
        });
        let (det, inv) = cdet_inverse(&m);
        assert!((det - cdet(&m)).norm() < 1e-12 * det.norm().max(1.0));
        let inv = inv.unwrap();
        assert!((&m * inv - CMatrix::identity(4, 4)).norm() < 1e-12);
        let singular = CMatrix::from_element(2, 2, Complex64::new(1.0, 1.0));
        assert_eq!(cdet_inverse(&singular).0, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn inverse_sqrt() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = inv_sqrt(&m, 0.0);
        assert!((&x * &m * &x - DMatrix::identity(2, 2)).amax() < 1e-12);
    }
}
