//! Trial–walker overlaps in the active space, exact or with seeded noise.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TrialState;
use crate::fci::occupied;
use crate::linalg::{cdet, select_rows, CMatrix};
use crate::rng::{NormalStream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum OverlapEstimator {
    Exact,
    /// Exact value plus reproducible noise of relative scale
    /// `sigma / sqrt(n_samples)`, keyed by walker identity and sample.
    Stochastic {
        shadow_seed: u64,
        n_samples: u64,
        sigma: f64,
    },
}

impl Default for OverlapEstimator {
    fn default() -> Self {
        OverlapEstimator::Exact
    }
}

/// det(φ[occ rows]) for every distinct string in `strings`.
fn string_dets(phi: &CMatrix, strings: impl Iterator<Item = u64>) -> HashMap<u64, Complex64> {
    let mut out = HashMap::new();
    for s in strings {
        out.entry(s)
            .or_insert_with(|| cdet(&select_rows(phi, &occupied(s))));
    }
    out
}

/// Σ_i c_i det(χ_iα† φα) det(χ_iβ† φβ) with real trial coefficients.
pub fn exact_overlap(trial: &TrialState, phi_alpha: &CMatrix, phi_beta: &CMatrix) -> Complex64 {
    let da = string_dets(phi_alpha, trial.determinants.iter().map(|d| d.alpha));
    let db = string_dets(phi_beta, trial.determinants.iter().map(|d| d.beta));
    trial
        .determinants
        .iter()
        .map(|d| da[&d.alpha] * db[&d.beta] * d.coef)
        .sum()
}

impl OverlapEstimator {
    /// Overlap ⟨Ψ_T|φ⟩ for an active-space walker determinant. `walker` and
    /// `sample` form the fingerprint that keys the noise.
    pub fn estimate(
        &self,
        trial: &TrialState,
        phi_alpha: &CMatrix,
        phi_beta: &CMatrix,
        walker: u64,
        sample: u64,
    ) -> Complex64 {
        let exact = exact_overlap(trial, phi_alpha, phi_beta);
        match *self {
            OverlapEstimator::Exact => exact,
            OverlapEstimator::Stochastic {
                shadow_seed,
                n_samples,
                sigma,
            } => {
                let stream = NormalStream::new(shadow_seed, Stream::Overlap);
                let scale = sigma / (n_samples.max(1) as f64).sqrt() / std::f64::consts::SQRT_2;
                let z = Complex64::new(
                    stream.normal(walker, sample, 0),
                    stream.normal(walker, sample, 1),
                );
                exact * (Complex64::new(1.0, 0.0) + z * scale)
            }
        }
    }
}
