//! Multi-determinant overlaps, mixed Green's functions and local energies
//! by generalized (nonorthogonal) Wick contraction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fci::occupied;
use crate::hamiltonian::{ActiveSpacePartition, MoHamiltonian};
use crate::linalg::{cdet_inverse, select_rows, CMatrix};
use crate::trial::TrialState;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Overlaps below this magnitude are treated as a node.
pub const OVERLAP_FLOOR: f64 = 1e-14;

/// A trial expansion over full-space occupation strings, with distinct
/// per-spin strings stored once.
#[derive(Debug, Clone)]
pub struct EmbeddedTrial {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub alpha_strings: Vec<u64>,
    pub beta_strings: Vec<u64>,
    /// (coefficient, α string index, β string index)
    pub terms: Vec<(f64, usize, usize)>,
    /// Active-space trial and partition used for factorized overlaps.
    pub active: Option<(TrialState, ActiveSpacePartition)>,
}

fn intern(list: &mut Vec<u64>, s: u64) -> usize {
    match list.iter().position(|&x| x == s) {
        Some(i) => i,
        None => {
            list.push(s);
            list.len() - 1
        }
    }
}

impl EmbeddedTrial {
    pub fn from_determinants(
        n_orb: usize,
        n_alpha: usize,
        n_beta: usize,
        dets: &[(f64, u64, u64)],
    ) -> Self {
        let mut alpha_strings = Vec::new();
        let mut beta_strings = Vec::new();
        let terms = dets
            .iter()
            .map(|&(c, a, b)| {
                (
                    c,
                    intern(&mut alpha_strings, a),
                    intern(&mut beta_strings, b),
                )
            })
            .collect();
        EmbeddedTrial {
            n_orb,
            n_alpha,
            n_beta,
            alpha_strings,
            beta_strings,
            terms,
            active: None,
        }
    }

    /// Places an active-space trial on top of a doubly occupied core.
    pub fn embed(trial: &TrialState, part: &ActiveSpacePartition) -> Result<Self> {
        if trial.n_orb != part.active.len() {
            return Err(Error::Dimension(format!(
                "trial has {} orbitals, active space {}",
                trial.n_orb,
                part.active.len()
            )));
        }
        if trial.n_alpha + trial.n_beta != part.n_active_electrons {
            return Err(Error::Dimension(
                "trial electron count differs from the active space".into(),
            ));
        }
        let n = part.core.len() + part.active.len() + part.virtual_.len();
        let core: u64 = part.core.iter().map(|&i| 1u64 << i).sum();
        let lift = |s: u64| -> u64 {
            occupied(s)
                .iter()
                .map(|&k| 1u64 << part.active[k])
                .sum::<u64>()
                | core
        };
        // rows ordered core-then-active versus ascending orbital index
        let parity = |s: u64| -> f64 {
            let occ = occupied(s);
            let mut inversions: usize = occ
                .iter()
                .map(|&k| part.core.iter().filter(|&&c| c > part.active[k]).count())
                .sum();
            for (i, &k) in occ.iter().enumerate() {
                inversions += occ[i + 1..]
                    .iter()
                    .filter(|&&l| part.active[l] < part.active[k])
                    .count();
            }
            if inversions % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let dets: Vec<(f64, u64, u64)> = trial
            .determinants
            .iter()
            .map(|d| {
                (
                    d.coef * parity(d.alpha) * parity(d.beta),
                    lift(d.alpha),
                    lift(d.beta),
                )
            })
            .collect();
        let nc = part.core.len();
        let mut out = Self::from_determinants(n, nc + trial.n_alpha, nc + trial.n_beta, &dets);
        out.active = Some((trial.clone(), part.clone()));
        Ok(out)
    }

    fn spins_shared(&self) -> bool {
        self.alpha_strings == self.beta_strings
    }
}

/// Per-string data: det(φ[occ]) and Θ = φ φ[occ]^{-1}; the Green's function
/// G_pq = ⟨a†_p a_q⟩ is Θ[q, k] on rows p = occ[k].
pub(crate) struct StringData {
    occ: Vec<usize>,
    det: Complex64,
    theta: Option<CMatrix>,
}

fn string_data(phi: &CMatrix, s: u64) -> StringData {
    let occ = occupied(s);
    if occ.is_empty() {
        return StringData {
            occ,
            det: Complex64::new(1.0, 0.0),
            theta: Some(CMatrix::zeros(phi.nrows(), 0)),
        };
    }
    let (det, inv) = cdet_inverse(&select_rows(phi, &occ));
    let theta = inv.map(|inv| phi * inv);
    StringData { occ, det, theta }
}

fn add_green(g: &mut CMatrix, sd: &StringData, w: Complex64) {
    if let Some(theta) = &sd.theta {
        for (k, &p) in sd.occ.iter().enumerate() {
            for q in 0..g.ncols() {
                g[(p, q)] += w * theta[(q, k)];
            }
        }
    }
}

struct Evaluated {
    alpha: Vec<StringData>,
    beta: Option<Vec<StringData>>,
}

impl Evaluated {
    fn new(trial: &EmbeddedTrial, phi_a: &CMatrix, phi_b: &CMatrix, restricted: bool) -> Self {
        let alpha = trial
            .alpha_strings
            .iter()
            .map(|&s| string_data(phi_a, s))
            .collect();
        let beta = if restricted && trial.spins_shared() {
            None
        } else {
            Some(
                trial
                    .beta_strings
                    .iter()
                    .map(|&s| string_data(phi_b, s))
                    .collect(),
            )
        };
        Evaluated { alpha, beta }
    }

    fn beta(&self) -> &[StringData] {
        self.beta.as_deref().unwrap_or(&self.alpha)
    }
}

/// Overlap and mixed Green's functions of one walker against the trial.
#[derive(Debug, Clone)]
pub struct TrialEvaluation {
    pub overlap: Complex64,
    pub green: [CMatrix; 2],
}

/// Σ_i c_i det(χ_iα†φα) det(χ_iβ†φβ). `restricted` asserts φα = φβ.
pub fn overlap(
    trial: &EmbeddedTrial,
    phi_a: &CMatrix,
    phi_b: &CMatrix,
    restricted: bool,
) -> Complex64 {
    let ev = Evaluated::new(trial, phi_a, phi_b, restricted);
    let (da, db) = (&ev.alpha, ev.beta());
    trial
        .terms
        .iter()
        .map(|&(c, a, b)| da[a].det * db[b].det * c)
        .sum()
}

pub fn evaluate(
    trial: &EmbeddedTrial,
    phi_a: &CMatrix,
    phi_b: &CMatrix,
    restricted: bool,
) -> TrialEvaluation {
    let n = trial.n_orb;
    let ev = Evaluated::new(trial, phi_a, phi_b, restricted);
    let (da, db) = (&ev.alpha, ev.beta());
    let mut wa = vec![ZERO; da.len()];
    let mut wb = vec![ZERO; db.len()];
    let mut total = ZERO;
    for &(c, a, b) in &trial.terms {
        let o = da[a].det * db[b].det * c;
        wa[a] += o;
        wb[b] += o;
        total += o;
    }
    let mut ga = CMatrix::zeros(n, n);
    let mut gb = CMatrix::zeros(n, n);
    if total.norm() >= OVERLAP_FLOOR {
        for (sd, w) in da.iter().zip(&wa) {
            add_green(&mut ga, sd, w / total);
        }
        for (sd, w) in db.iter().zip(&wb) {
            add_green(&mut gb, sd, w / total);
        }
    }
    TrialEvaluation {
        overlap: total,
        green: [ga, gb],
    }
}

/// One-body, Coulomb and exchange pieces of a single string.
struct StringEnergy {
    one_body: Complex64,
    exchange: Complex64,
    /// J_pq = Σ_rs (pq|rs) G_rs
    coulomb: CMatrix,
}

fn string_energy(ham: &MoHamiltonian, h1: &DMatrix<f64>, sd: &StringData) -> Option<StringEnergy> {
    let theta = sd.theta.as_ref()?;
    let n = ham.n_orb;
    let m = sd.occ.len();
    let mut one_body = ZERO;
    for (k, &p) in sd.occ.iter().enumerate() {
        for q in 0..n {
            one_body += theta[(q, k)] * h1[(p, q)];
        }
    }
    let mut coulomb = CMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..=p {
            let base = (p * n + q) * n;
            let mut acc = ZERO;
            for (k, &r) in sd.occ.iter().enumerate() {
                let row = &ham.eri[(base + r) * n..(base + r + 1) * n];
                for (s, &v) in row.iter().enumerate() {
                    acc += theta[(s, k)] * v;
                }
            }
            coulomb[(p, q)] = acc;
            coulomb[(q, p)] = acc;
        }
    }
    let mut exchange = ZERO;
    for k in 0..m {
        let p = sd.occ[k];
        for l in 0..m {
            let r = sd.occ[l];
            for q in 0..n {
                let tq = theta[(q, l)];
                let base = ((p * n + q) * n + r) * n;
                let row = &ham.eri[base..base + n];
                let mut acc = ZERO;
                for (s, &v) in row.iter().enumerate() {
                    acc += theta[(s, k)] * v;
                }
                exchange += acc * tq;
            }
        }
    }
    Some(StringEnergy {
        one_body,
        exchange,
        coulomb,
    })
}

/// Σ_pq J_pq G_pq for the Green's function of `sd`.
fn contract(j: &CMatrix, sd: &StringData) -> Complex64 {
    let theta = match &sd.theta {
        Some(t) => t,
        None => return ZERO,
    };
    let mut acc = ZERO;
    for (k, &p) in sd.occ.iter().enumerate() {
        for q in 0..j.ncols() {
            acc += j[(p, q)] * theta[(q, k)];
        }
    }
    acc
}

/// Mixed-estimator local energy ⟨Ψ_T|H|φ⟩/⟨Ψ_T|φ⟩ including the constant.
pub fn local_energy(
    trial: &EmbeddedTrial,
    ham: &MoHamiltonian,
    phi_a: &CMatrix,
    phi_b: &CMatrix,
    restricted: bool,
) -> Result<Complex64> {
    let ev = Evaluated::new(trial, phi_a, phi_b, restricted);
    let (da, db) = (&ev.alpha, ev.beta());
    let ea: Vec<Option<StringEnergy>> = da
        .iter()
        .map(|sd| string_energy(ham, &ham.h1, sd))
        .collect();
    let eb_owned: Option<Vec<Option<StringEnergy>>> = ev.beta.as_ref().map(|list| {
        list.iter()
            .map(|sd| string_energy(ham, &ham.h1, sd))
            .collect()
    });
    let eb = eb_owned.as_deref().unwrap_or(&ea);
    let mut num = ZERO;
    let mut den = ZERO;
    for &(c, a, b) in &trial.terms {
        let o = da[a].det * db[b].det * c;
        den += o;
        if o.norm() == 0.0 {
            continue;
        }
        let (xa, xb) = match (&ea[a], &eb[b]) {
            (Some(x), Some(y)) => (x, y),
            _ => continue,
        };
        let e = xa.one_body
            + xb.one_body
            + 0.5
                * (contract(&xa.coulomb, &da[a]) + contract(&xb.coulomb, &db[b])
                    - xa.exchange
                    - xb.exchange)
            + contract(&xa.coulomb, &db[b]);
        num += o * e;
    }
    if den.norm() < OVERLAP_FLOOR {
        return Err(Error::Numerical(format!(
            "trial overlap {:.3e} below floor",
            den.norm()
        )));
    }
    Ok(num / den + ham.constant())
}
