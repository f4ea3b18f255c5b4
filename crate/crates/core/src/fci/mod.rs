//! Exact diagonalization in the determinant basis: ground states, reduced
//! density matrices, single-orbital entropies and finite-difference forces.

mod davidson;
mod entropy;
pub mod strings;

pub use davidson::{davidson, DavidsonOptions, Eigenpair};
pub use entropy::{orbital_entropies, OrbitalEntropy, OrbitalEntropyReport, ENTROPY_THRESHOLD};
pub use strings::{occupied, StringSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chem::Geometry;
use crate::error::{Error, Result};
use crate::hamiltonian::{transform_to_mo, MoHamiltonian};
use crate::scf::rhf_for_geometry;

pub const DEFAULT_DIMENSION_CAP: usize = 4_000_000;

/// Determinant space with index I = Iα·nβ + Iβ.
#[derive(Debug, Clone)]
pub struct FciSpace {
    pub n_orb: usize,
    pub alpha: StringSet,
    pub beta: StringSet,
}

impl FciSpace {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_alpha > n_orb || n_beta > n_orb {
            return Err(Error::Invalid(format!(
                "({n_alpha}α, {n_beta}β) electrons do not fit in {n_orb} orbitals"
            )));
        }
        if n_orb > 63 {
            return Err(Error::Invalid("at most 63 orbitals are supported".into()));
        }
        Ok(FciSpace {
            n_orb,
            alpha: StringSet::new(n_orb, n_alpha),
            beta: StringSet::new(n_orb, n_beta),
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.n_elec
    }

    pub fn n_beta(&self) -> usize {
        self.beta.n_elec
    }

    /// Index of the determinant with the given strings.
    pub fn index(&self, alpha: u64, beta: u64) -> usize {
        self.alpha.index(alpha) * self.beta.len() + self.beta.index(beta)
    }

    /// (α string, β string) of determinant `i`.
    pub fn determinant(&self, i: usize) -> (u64, u64) {
        let nb = self.beta.len();
        (self.alpha.strings[i / nb], self.beta.strings[i % nb])
    }

    /// Diagonal elements ⟨I|H|I⟩, constant included.
    pub fn diagonal(&self, ham: &MoHamiltonian) -> Vec<f64> {
        let one = |s: u64| -> (Vec<usize>, f64) {
            let occ = occupied(s);
            let mut e = 0.0;
            for &i in &occ {
                e += ham.h1[(i, i)];
                for &j in &occ {
                    e += 0.5 * (ham.v(i, i, j, j) - ham.v(i, j, j, i));
                }
            }
            (occ, e)
        };
        let a: Vec<_> = self.alpha.strings.iter().map(|&s| one(s)).collect();
        let b: Vec<_> = self.beta.strings.iter().map(|&s| one(s)).collect();
        let c = ham.constant();
        let mut out = Vec::with_capacity(self.dim());
        for (occ_a, ea) in &a {
            for (occ_b, eb) in &b {
                let mut e = c + ea + eb;
                for &i in occ_a {
                    for &j in occ_b {
                        e += ham.v(i, i, j, j);
                    }
                }
                out.push(e);
            }
        }
        out
    }

    /// σ = H c, constant included.
    pub fn sigma(&self, ham: &MoHamiltonian, c: &[f64]) -> Vec<f64> {
        let n = self.n_orb;
        let n2 = n * n;
        let nb = self.beta.len();
        let dim = self.dim();
        assert_eq!(c.len(), dim);
        let mut hp = ham.h1.clone();
        for k in 0..n {
            for l in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += ham.v(k, j, j, l);
                }
                hp[(k, l)] -= 0.5 * acc;
            }
        }
        let half_v = 0.5 * ham.supermatrix();
        let mut sigma: Vec<f64> = c.iter().map(|x| x * ham.constant()).collect();
        let chunk = (1 << 22) / n2.max(1);
        let chunk = chunk.clamp(1, dim.max(1));
        let mut start = 0;
        while start < dim {
            let end = (start + chunk).min(dim);
            let width = end - start;
            // D_kl(J) = ⟨J|E_kl|C⟩ for J in the chunk
            let mut d = DMatrix::<f64>::zeros(n2, width);
            for (col, j) in (start..end).enumerate() {
                let (ja, jb) = (j / nb, j % nb);
                let mut dcol = d.column_mut(col);
                for ex in &self.alpha.excitations[ja] {
                    let (k, l) = (ex.pair as usize / n, ex.pair as usize % n);
                    dcol[l * n + k] += ex.sign * c[ex.target as usize * nb + jb];
                }
                for ex in &self.beta.excitations[jb] {
                    let (k, l) = (ex.pair as usize / n, ex.pair as usize % n);
                    dcol[l * n + k] += ex.sign * c[ja * nb + ex.target as usize];
                }
            }
            let mut g = &half_v * &d;
            for (col, j) in (start..end).enumerate() {
                let cj = c[j];
                if cj != 0.0 {
                    let mut gcol = g.column_mut(col);
                    for kl in 0..n2 {
                        gcol[kl] += hp[(kl / n, kl % n)] * cj;
                    }
                }
            }
            for (col, j) in (start..end).enumerate() {
                let (ja, jb) = (j / nb, j % nb);
                let gcol = g.column(col);
                for ex in &self.alpha.excitations[ja] {
                    sigma[ex.target as usize * nb + jb] += ex.sign * gcol[ex.pair as usize];
                }
                for ex in &self.beta.excitations[jb] {
                    sigma[ja * nb + ex.target as usize] += ex.sign * gcol[ex.pair as usize];
                }
            }
            start = end;
        }
        sigma
    }

    /// Dense Hamiltonian matrix, for small spaces.
    pub fn dense(&self, ham: &MoHamiltonian) -> DMatrix<f64> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for i in 0..dim {
            e[i] = 1.0;
            let col = self.sigma(ham, &e);
            h.set_column(i, &nalgebra::DVector::from_vec(col));
            e[i] = 0.0;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FciOptions {
    pub dimension_cap: usize,
    pub tolerance: f64,
    pub max_subspace: usize,
    pub max_iterations: usize,
}

impl Default for FciOptions {
    fn default() -> Self {
        FciOptions {
            dimension_cap: DEFAULT_DIMENSION_CAP,
            tolerance: 1e-8,
            max_subspace: 24,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FciResult {
    /// Ground-state energy including the constant terms.
    pub e0: f64,
    pub vector: Vec<f64>,
    pub space: FciSpace,
    pub iterations: usize,
    pub residual: f64,
}

/// Sign convention for eigenvectors: the largest-magnitude component is
/// made positive (first index wins ties).
pub fn fix_sign(v: &mut [f64]) {
    let amax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(lead) = v.iter().position(|x| x.abs() >= amax * (1.0 - 1e-10)) {
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub fn fci_ground_state(
    ham: &MoHamiltonian,
    n_alpha: usize,
    n_beta: usize,
    opts: &FciOptions,
) -> Result<FciResult> {
    let nb = crate::fci::strings::binomial(ham.n_orb, n_beta) as usize;
    let na = crate::fci::strings::binomial(ham.n_orb, n_alpha) as usize;
    let dim = na.saturating_mul(nb);
    if dim > opts.dimension_cap {
        return Err(Error::DimensionCap {
            dim,
            cap: opts.dimension_cap,
        });
    }
    let space = FciSpace::new(ham.n_orb, n_alpha, n_beta)?;
    let diag = space.diagonal(ham);
    let lowest = diag
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |a, (i, &d)| if d < a.1 - 1e-12 { (i, d) } else { a },
        )
        .0;
    let mut guess = vec![0.0; dim];
    guess[lowest] = 1.0;
    let dopts = DavidsonOptions {
        max_subspace: opts.max_subspace,
        max_iterations: opts.max_iterations,
        tolerance: opts.tolerance,
    };
    let pair = davidson(&diag, guess, |v| space.sigma(ham, v), &dopts)?;
    let mut vector = pair.vector;
    fix_sign(&mut vector);
    Ok(FciResult {
        e0: pair.value,
        vector,
        space,
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

impl FciResult {
    pub fn n_orb(&self) -> usize {
        self.space.n_orb
    }

    /// ⟨v|H|v⟩ for a normalized vector in this result's space.
    pub fn expectation(&self, ham: &MoHamiltonian, v: &[f64]) -> f64 {
        let hv = self.space.sigma(ham, v);
        v.iter().zip(&hv).map(|(a, b)| a * b).sum()
    }

    /// Determinants with |c| ≥ eps as (c, α string, β string).
    pub fn expansion(&self, eps: f64) -> Vec<(f64, u64, u64)> {
        self.vector
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() >= eps)
            .map(|(i, &c)| {
                let (a, b) = self.space.determinant(i);
                (c, a, b)
            })
            .collect()
    }
}

/// Spin-resolved one-body density matrices and on-site pair densities.
#[derive(Debug, Clone)]
pub struct Rdms {
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    /// d_p = ⟨n_pα n_pβ⟩.
    pub double_occupancy: Vec<f64>,
}

pub fn compute_rdms(fci: &FciResult) -> Rdms {
    let sp = &fci.space;
    let n = sp.n_orb;
    let nb = sp.beta.len();
    let c = &fci.vector;
    let mut da = DMatrix::zeros(n, n);
    let mut db = DMatrix::zeros(n, n);
    let mut dd = vec![0.0; n];
    for (ia, &sa) in sp.alpha.strings.iter().enumerate() {
        for (ib, &sb) in sp.beta.strings.iter().enumerate() {
            let i = ia * nb + ib;
            let ci = c[i];
            if ci == 0.0 {
                continue;
            }
            let both = sa & sb;
            for (p, d) in dd.iter_mut().enumerate() {
                if both & (1 << p) != 0 {
                    *d += ci * ci;
                }
            }
            // ⟨C|a†_k a_l|I⟩ contributions
            for ex in &sp.alpha.excitations[ia] {
                let (k, l) = (ex.pair as usize / n, ex.pair as usize % n);
                da[(k, l)] += ex.sign * c[ex.target as usize * nb + ib] * ci;
            }
            for ex in &sp.beta.excitations[ib] {
                let (k, l) = (ex.pair as usize / n, ex.pair as usize % n);
                db[(k, l)] += ex.sign * c[ia * nb + ex.target as usize] * ci;
            }
        }
    }
    Rdms {
        alpha: da,
        beta: db,
        double_occupancy: dd,
    }
}

/// RHF, MO transform and full-space FCI for a neutral closed-shell geometry.
pub fn fci_for_geometry(
    geom: &Geometry,
    opts: &FciOptions,
) -> Result<(f64, FciResult, MoHamiltonian)> {
    let (ints, mos) = rhf_for_geometry(geom)?;
    let ham = transform_to_mo(&ints, &mos)?;
    let n = mos.n_occ;
    let fci = fci_ground_state(&ham, n, n, opts)?;
    Ok((mos.e_total, fci, ham))
}

/// Central finite-difference force −[E(+δ) − E(−δ)]/(2δ) in Ha/Å from
/// deterministic SCF + FCI at each displaced geometry.
pub fn reference_force(
    geom: &Geometry,
    atom: usize,
    axis: usize,
    delta_angstrom: f64,
    opts: &FciOptions,
) -> Result<f64> {
    if !(delta_angstrom > 0.0) {
        return Err(Error::Invalid("displacement must be positive".into()));
    }
    let plus = fci_for_geometry(&geom.displace(atom, axis, delta_angstrom)?, opts)?
        .1
        .e0;
    let minus = fci_for_geometry(&geom.displace(atom, axis, -delta_angstrom)?, opts)?
        .1
        .e0;
    Ok(-(plus - minus) / (2.0 * delta_angstrom))
}
