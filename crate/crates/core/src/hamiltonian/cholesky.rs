//! Modified Cholesky decomposition of the ERI supermatrix V_(pq),(rs) with
//! recorded and replayable pivots.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::MoHamiltonian;
use crate::error::{Error, Result};

const TIE_WINDOW: f64 = 1e-14;
const REPLAY_FLOOR: f64 = 1e-12;
const NEGATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CholeskySource {
    Reference,
    Replayed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactorization {
    pub n_orb: usize,
    /// One n×n matrix L^γ per vector.
    pub vectors: Vec<DMatrix<f64>>,
    pub pivots: Vec<(usize, usize)>,
    pub threshold: f64,
    pub source: CholeskySource,
}

/// The replayable part of a factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotArtifact {
    pub n_orb: usize,
    pub threshold: f64,
    pub pivots: Vec<[usize; 2]>,
}

impl PivotArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pivot artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl CholeskyFactorization {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn artifact(&self) -> PivotArtifact {
        PivotArtifact {
            n_orb: self.n_orb,
            threshold: self.threshold,
            pivots: self.pivots.iter().map(|&(p, q)| [p, q]).collect(),
        }
    }

    /// Σ_γ L^γ_pq L^γ_rs.
    pub fn reconstruct(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.vectors.iter().map(|l| l[(p, q)] * l[(r, s)]).sum()
    }

    /// max |(pq|rs) − Σ_γ L^γ_pq L^γ_rs| over all elements.
    pub fn reconstruction_error(&self, ham: &MoHamiltonian) -> f64 {
        let n = self.n_orb;
        let m = n * n;
        let mut flat = DMatrix::zeros(m, self.vectors.len());
        for (g, l) in self.vectors.iter().enumerate() {
            for p in 0..n {
                for q in 0..n {
                    flat[(p * n + q, g)] = l[(p, q)];
                }
            }
        }
        let approx = &flat * flat.transpose();
        let mut err: f64 = 0.0;
        for x in 0..m {
            for y in 0..m {
                err = err.max((ham.eri[x * m + y] - approx[(x, y)]).abs());
            }
        }
        err
    }
}

struct Workspace<'a> {
    v: &'a [f64],
    m: usize,
    diag: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

impl<'a> Workspace<'a> {
    fn new(ham: &'a MoHamiltonian) -> Self {
        let m = ham.n_orb * ham.n_orb;
        let diag = (0..m).map(|x| ham.eri[x * m + x]).collect();
        Workspace {
            v: &ham.eri,
            m,
            diag,
            cols: Vec::new(),
        }
    }

    fn add_vector(&mut self, piv: usize) {
        let m = self.m;
        let scale = 1.0 / self.diag[piv].sqrt();
        let mut col: Vec<f64> = (0..m).map(|x| self.v[x * m + piv]).collect();
        for prev in &self.cols {
            let lp = prev[piv];
            if lp != 0.0 {
                for (c, &l) in col.iter_mut().zip(prev.iter()) {
                    *c -= l * lp;
                }
            }
        }
        for c in col.iter_mut() {
            *c *= scale;
        }
        for (d, &l) in self.diag.iter_mut().zip(col.iter()) {
            *d -= l * l;
        }
        self.diag[piv] = 0.0;
        self.cols.push(col);
    }

    fn finish(
        self,
        n: usize,
        pivots: Vec<usize>,
        threshold: f64,
        source: CholeskySource,
    ) -> CholeskyFactorization {
        let vectors = self
            .cols
            .into_iter()
            .map(|c| DMatrix::from_row_slice(n, n, &c))
            .collect();
        CholeskyFactorization {
            n_orb: n,
            vectors,
            pivots: pivots.into_iter().map(|x| (x / n, x % n)).collect(),
            threshold,
            source,
        }
    }
}

/// Greedy largest-residual-diagonal factorization.
pub fn cholesky_reference(ham: &MoHamiltonian, threshold: f64) -> Result<CholeskyFactorization> {
    let n = ham.n_orb;
    let mut ws = Workspace::new(ham);
    let mut pivots = Vec::new();
    while pivots.len() < ws.m {
        let (min_idx, min_val) =
            ws.diag
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |a, (i, d)| if d < a.1 { (i, d) } else { a },
                );
        if min_val < -NEGATIVE_TOLERANCE {
            return Err(Error::CholeskyBreakdown {
                index: min_idx,
                value: min_val,
            });
        }
        let max = ws.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= threshold {
            break;
        }
        let piv = ws
            .diag
            .iter()
            .position(|&d| d >= max - TIE_WINDOW)
            .expect("maximum is attained");
        ws.add_vector(piv);
        pivots.push(piv);
    }
    Ok(ws.finish(n, pivots, threshold, CholeskySource::Reference))
}

/// Recomputes vectors for `ham` along a stored pivot sequence.
pub fn cholesky_replay(
    ham: &MoHamiltonian,
    artifact: &PivotArtifact,
) -> Result<CholeskyFactorization> {
    let n = ham.n_orb;
    if artifact.n_orb != n {
        return Err(Error::Dimension(format!(
            "pivot artifact is for {} orbitals, Hamiltonian has {n}",
            artifact.n_orb
        )));
    }
    let mut ws = Workspace::new(ham);
    let mut pivots = Vec::with_capacity(artifact.pivots.len());
    for (k, &[p, q]) in artifact.pivots.iter().enumerate() {
        if p >= n || q >= n {
            return Err(Error::Dimension(format!(
                "pivot ({p},{q}) out of range for {n} orbitals"
            )));
        }
        let piv = p * n + q;
        if ws.diag[piv] <= REPLAY_FLOOR {
            return Err(Error::ReplayInvalid(format!(
                "pivot {k} ({p},{q}) has residual diagonal {:e}",
                ws.diag[piv]
            )));
        }
        ws.add_vector(piv);
        pivots.push(piv);
    }
    let fact = ws.finish(n, pivots, artifact.threshold, CholeskySource::Replayed);
    let err = fact.reconstruction_error(ham);
    if err > 10.0 * artifact.threshold {
        return Err(Error::ReplayInvalid(format!(
            "reconstruction error {err:e} exceeds 10x threshold {:e}",
            artifact.threshold
        )));
    }
    Ok(fact)
}
