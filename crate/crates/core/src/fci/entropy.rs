//! Single-orbital entropies from spin-resolved occupations.

use serde::{Deserialize, Serialize};

use super::Rdms;
use crate::error::{Error, Result};

/// Selection threshold 0.1·ln 4.
pub const ENTROPY_THRESHOLD: f64 = 0.1 * std::f64::consts::LN_2 * 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalEntropy {
    pub orbital: usize,
    /// Probabilities of (empty, up, down, doubly occupied).
    pub w: [f64; 4],
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalEntropyReport {
    pub orbitals: Vec<OrbitalEntropy>,
    pub threshold: f64,
    /// Orbitals with entropy above the threshold.
    pub selected: Vec<usize>,
}

pub fn orbital_entropies(rdms: &Rdms, threshold: f64) -> Result<OrbitalEntropyReport> {
    let n = rdms.double_occupancy.len();
    let mut orbitals = Vec::with_capacity(n);
    for p in 0..n {
        let da = rdms.alpha[(p, p)];
        let db = rdms.beta[(p, p)];
        let d = rdms.double_occupancy[p];
        let raw = [1.0 - da - db + d, da - d, db - d, d];
        if let Some(bad) = raw.iter().find(|&&w| !(-1e-6..=1.0 + 1e-6).contains(&w)) {
            return Err(Error::Numerical(format!(
                "orbital {p} occupation probability {bad} out of range"
            )));
        }
        let w = raw.map(|x| x.clamp(0.0, 1.0));
        let entropy = -w
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|x| x * x.ln())
            .sum::<f64>();
        orbitals.push(OrbitalEntropy {
            orbital: p,
            w,
            entropy: entropy.max(0.0),
        });
    }
    let selected = orbitals
        .iter()
        .filter(|o| o.entropy > threshold)
        .map(|o| o.orbital)
        .collect();
    Ok(OrbitalEntropyReport {
        orbitals,
        threshold,
        selected,
    })
}

impl OrbitalEntropyReport {
    pub fn max_entropy(&self) -> f64 {
        self.orbitals.iter().map(|o| o.entropy).fold(0.0, f64::max)
    }

    /// Plot data: orbital index, entropy, threshold line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("orbital,entropy,threshold\n");
        for o in &self.orbitals {
            s.push_str(&format!(
                "{},{:.12},{:.12}\n",
                o.orbital, o.entropy, self.threshold
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rdms(da: f64, db: f64, d: f64) -> Rdms {
        Rdms {
            alpha: DMatrix::from_element(1, 1, da),
            beta: DMatrix::from_element(1, 1, db),
            double_occupancy: vec![d],
        }
    }

    #[test]
    fn pure_configurations_have_zero_entropy() {
        for (da, db, d) in [(1.0, 1.0, 1.0), (0.0, 0.0, 0.0), (1.0, 0.0, 0.0)] {
            let r = orbital_entropies(&rdms(da, db, d), ENTROPY_THRESHOLD).unwrap();
            assert_eq!(r.orbitals[0].entropy, 0.0);
            assert!(r.selected.is_empty());
        }
    }

    #[test]
    fn uniform_probabilities_are_maximal() {
        let r = orbital_entropies(&rdms(0.5, 0.5, 0.25), ENTROPY_THRESHOLD).unwrap();
        assert!((r.orbitals[0].entropy - 4f64.ln()).abs() < 1e-14);
        assert_eq!(r.selected, vec![0]);
        assert!((ENTROPY_THRESHOLD - 0.1 * 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(orbital_entropies(&rdms(0.5, 0.5, 0.9), ENTROPY_THRESHOLD).is_err());
        // tiny negative values are clamped
        let r = orbital_entropies(&rdms(1.0, 1.0, 1.0 + 1e-9), ENTROPY_THRESHOLD).unwrap();
        assert!(r.orbitals[0].w.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn csv_layout() {
        let r = orbital_entropies(&rdms(0.5, 0.5, 0.25), 0.1).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("orbital,entropy,threshold\n0,1.386294361"));
    }
}
