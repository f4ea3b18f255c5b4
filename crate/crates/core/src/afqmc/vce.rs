//! Factorized overlap of a full-space walker with a core ⊗ active trial.

use num_complex::Complex64;

use crate::hamiltonian::ActiveSpacePartition;
use crate::linalg::{cdet, cqr, select_rows, CMatrix};
use crate::trial::{OverlapEstimator, TrialState};

/// Smallest admissible singular value of the walker's core block.
pub const CORE_SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VceOverlap {
    pub value: Complex64,
    /// The core block was numerically singular and the overlap set to zero.
    pub singular: bool,
}

/// Per-spin reduction of φ to (prefactor, orthonormal active determinant).
fn reduce_spin(phi: &CMatrix, part: &ActiveSpacePartition) -> Option<(Complex64, CMatrix)> {
    let n_el = phi.ncols();
    let nc = part.core.len();
    let phi_a = select_rows(phi, &part.active);
    if nc == 0 {
        let (q, r) = cqr(&phi_a);
        return Some((cdet(&r), q));
    }
    let phi_c = select_rows(phi, &part.core);
    let svd = phi_c.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let sv = &svd.singular_values;
    if sv.len() < nc || sv.iter().any(|&s| s < CORE_SINGULAR_FLOOR) {
        return None;
    }
    let det_sigma: f64 = sv.iter().take(nc).product();
    // completion of the core row space to a unitary V = [V1 V2]
    let v1 = v_t.adjoint();
    let mut basis: Vec<nalgebra::DVector<Complex64>> =
        (0..nc).map(|k| v1.column(k).into_owned()).collect();
    for e in 0..n_el {
        if basis.len() == n_el {
            break;
        }
        let mut w = nalgebra::DVector::<Complex64>::zeros(n_el);
        w[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
        }
        let norm = w.norm();
        if norm > 1e-6 {
            basis.push(w / Complex64::new(norm, 0.0));
        }
    }
    let v = CMatrix::from_columns(&basis);
    let v2 = v.columns(nc, n_el - nc).into_owned();
    let (q, r) = cqr(&(phi_a * v2));
    let prefactor = cdet(&u) * det_sigma * cdet(&r) / cdet(&v);
    Some((prefactor, q))
}

/// ⟨core ⊗ Ψ_T,a | φ⟩ as det(U)det(Σ_c)det(R)·⟨Ψ_T,a|φ̃_a⟩/det(V) per spin,
/// with the active overlap supplied by `estimator`.
pub fn vce_overlap(
    trial: &TrialState,
    part: &ActiveSpacePartition,
    phi_alpha: &CMatrix,
    phi_beta: &CMatrix,
    estimator: &OverlapEstimator,
    walker: u64,
    sample: u64,
) -> VceOverlap {
    let reduced = reduce_spin(phi_alpha, part).zip(reduce_spin(phi_beta, part));
    match reduced {
        Some(((fa, qa), (fb, qb))) => VceOverlap {
            value: fa * fb * estimator.estimate(trial, &qa, &qb, walker, sample),
            singular: false,
        },
        None => VceOverlap {
            value: Complex64::new(0.0, 0.0),
            singular: true,
        },
    }
}
