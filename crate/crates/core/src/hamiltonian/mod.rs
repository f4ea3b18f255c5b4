//! MO-basis Hamiltonians, Cholesky factorization with pivot replay, and
//! frozen-core embedding.

mod cholesky;

pub use cholesky::{
    cholesky_reference, cholesky_replay, CholeskyFactorization, CholeskySource, PivotArtifact,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chem::IntegralSet;
use crate::error::{Error, Result};
use crate::scf::MoSet;

/// Spin-free Hamiltonian over `n_orb` orthonormal spatial orbitals.
///
/// `eri` is the dense chemists'-notation tensor, index `((p·n+q)·n+r)·n+s`.
/// The constant part is `e_nuc + e_core`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoHamiltonian {
    pub n_orb: usize,
    pub h1: DMatrix<f64>,
    pub eri: Vec<f64>,
    pub e_nuc: f64,
    pub e_core: f64,
}

impl MoHamiltonian {
    pub fn new(h1: DMatrix<f64>, eri: Vec<f64>, e_nuc: f64) -> Result<Self> {
        let n = h1.nrows();
        if h1.ncols() != n || eri.len() != n * n * n * n {
            return Err(Error::Dimension(format!(
                "h1 is {}x{}, eri has {} elements",
                h1.nrows(),
                h1.ncols(),
                eri.len()
            )));
        }
        Ok(MoHamiltonian {
            n_orb: n,
            h1,
            eri,
            e_nuc,
            e_core: 0.0,
        })
    }

    #[inline]
    pub fn v(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_orb;
        self.eri[((p * n + q) * n + r) * n + s]
    }

    /// Energy offset added to every electronic energy.
    pub fn constant(&self) -> f64 {
        self.e_nuc + self.e_core
    }

    /// ERIs as the n²×n² supermatrix V_(pq),(rs).
    pub fn supermatrix(&self) -> DMatrix<f64> {
        let m = self.n_orb * self.n_orb;
        DMatrix::from_row_slice(m, m, &self.eri)
    }

    /// Largest deviation from the 8-fold permutational symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        crate::chem::Eri::symmetry_defect(self.n_orb, &self.eri)
    }

    /// Rotates the orbital basis: h' = Uᵀ h U and likewise for the ERIs.
    pub fn rotated(&self, u: &DMatrix<f64>) -> Self {
        MoHamiltonian {
            n_orb: self.n_orb,
            h1: u.transpose() * &self.h1 * u,
            eri: transform_eri(self.n_orb, &self.eri, u),
            e_nuc: self.e_nuc,
            e_core: self.e_core,
        }
    }

    /// Closed-shell determinant energy for the first `n_occ` orbitals.
    pub fn rhf_energy(&self, n_occ: usize) -> f64 {
        let mut e = self.constant();
        for i in 0..n_occ {
            e += 2.0 * self.h1[(i, i)];
            for j in 0..n_occ {
                e += 2.0 * self.v(i, i, j, j) - self.v(i, j, j, i);
            }
        }
        e
    }
}

/// Four quarter transformations of a dense n^4 tensor with an n×m matrix.
pub fn transform_eri(n: usize, eri: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
    let m = c.ncols();
    // step k contracts the leading index and moves it to the back
    let mut cur = eri.to_vec();
    let mut dims = [n, n, n, n];
    for _ in 0..4 {
        let [a, b, cc, d] = dims;
        let rest = b * cc * d;
        let mut next = vec![0.0; rest * m];
        for x in 0..rest {
            for p in 0..m {
                let mut acc = 0.0;
                for mu in 0..a {
                    acc += c[(mu, p)] * cur[mu * rest + x];
                }
                next[x * m + p] = acc;
            }
        }
        cur = next;
        dims = [b, cc, d, m];
    }
    cur
}

pub fn transform_to_mo(ints: &IntegralSet, mos: &MoSet) -> Result<MoHamiltonian> {
    transform_with(ints, &mos.coefficients)
}

/// MO Hamiltonian for an arbitrary coefficient matrix (e.g. aligned orbitals).
pub fn transform_with(ints: &IntegralSet, c: &DMatrix<f64>) -> Result<MoHamiltonian> {
    let n = ints.nbf();
    if c.nrows() != n {
        return Err(Error::Dimension(format!(
            "coefficients have {} rows, basis has {n} functions",
            c.nrows()
        )));
    }
    let h1 = c.transpose() * ints.core_hamiltonian() * c;
    let eri = transform_eri(n, &ints.eri.to_full(), c);
    MoHamiltonian::new(h1, eri, ints.e_nuc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSpacePartition {
    pub core: Vec<usize>,
    pub active: Vec<usize>,
    pub virtual_: Vec<usize>,
    pub n_active_electrons: usize,
}

impl ActiveSpacePartition {
    /// Validates a core/active split of `n_orb` orbitals holding `n_electrons`.
    pub fn new(
        n_orb: usize,
        n_electrons: usize,
        core: Vec<usize>,
        active: Vec<usize>,
    ) -> Result<Self> {
        let mut seen = vec![false; n_orb];
        for &i in core.iter().chain(active.iter()) {
            if i >= n_orb {
                return Err(Error::Invalid(format!(
                    "orbital {i} out of range 0..{n_orb}"
                )));
            }
            if seen[i] {
                return Err(Error::Invalid(format!("orbital {i} listed twice")));
            }
            seen[i] = true;
        }
        if 2 * core.len() > n_electrons {
            return Err(Error::Invalid(
                "core holds more electrons than the system".into(),
            ));
        }
        let n_act = n_electrons - 2 * core.len();
        if n_act > 2 * active.len() {
            return Err(Error::Invalid(format!(
                "{n_act} active electrons do not fit in {} active orbitals",
                active.len()
            )));
        }
        let virtual_ = (0..n_orb).filter(|&i| !seen[i]).collect();
        Ok(ActiveSpacePartition {
            core,
            active,
            virtual_,
            n_active_electrons: n_act,
        })
    }

    /// Lowest `n_core` orbitals frozen, the next `n_active` active.
    pub fn contiguous(
        n_orb: usize,
        n_electrons: usize,
        n_core: usize,
        n_active: usize,
    ) -> Result<Self> {
        if n_core + n_active > n_orb {
            return Err(Error::Invalid(format!(
                "{n_core} core + {n_active} active exceed {n_orb} orbitals"
            )));
        }
        Self::new(
            n_orb,
            n_electrons,
            (0..n_core).collect(),
            (n_core..n_core + n_active).collect(),
        )
    }

    /// Full space: no core, everything active.
    pub fn full(n_orb: usize, n_electrons: usize) -> Result<Self> {
        Self::contiguous(n_orb, n_electrons, 0, n_orb)
    }
}

/// Frozen-core effective Hamiltonian over the active orbitals.
///
/// The returned Hamiltonian carries the core energy in `e_core`, which is
/// also returned separately.
pub fn build_embedding(
    ham: &MoHamiltonian,
    part: &ActiveSpacePartition,
) -> Result<(MoHamiltonian, f64)> {
    let n = ham.n_orb;
    if part.core.iter().chain(part.active.iter()).any(|&i| i >= n) {
        return Err(Error::Dimension(
            "partition does not match Hamiltonian".into(),
        ));
    }
    let act = &part.active;
    let na = act.len();
    let mut e_core = 0.0;
    for &i in &part.core {
        e_core += 2.0 * ham.h1[(i, i)];
        for &j in &part.core {
            e_core += 2.0 * ham.v(i, i, j, j) - ham.v(i, j, j, i);
        }
    }
    let mut h = DMatrix::zeros(na, na);
    for (a, &p) in act.iter().enumerate() {
        for (b, &q) in act.iter().enumerate() {
            let mut v = ham.h1[(p, q)];
            for &i in &part.core {
                v += 2.0 * ham.v(p, q, i, i) - ham.v(p, i, i, q);
            }
            h[(a, b)] = v;
        }
    }
    let mut eri = vec![0.0; na * na * na * na];
    for (a, &p) in act.iter().enumerate() {
        for (b, &q) in act.iter().enumerate() {
            for (c, &r) in act.iter().enumerate() {
                for (d, &s) in act.iter().enumerate() {
                    eri[((a * na + b) * na + c) * na + d] = ham.v(p, q, r, s);
                }
            }
        }
    }
    let mut out = MoHamiltonian::new(h, eri, ham.e_nuc)?;
    out.e_core = ham.e_core + e_core;
    Ok((out, e_core))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::Geometry;
    use crate::scf::rhf_for_geometry;

    fn naive_transform(n: usize, eri: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut acc = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                for cc in 0..n {
                                    for d in 0..n {
                                        acc += c[(a, p)]
                                            * c[(b, q)]
                                            * c[(cc, r)]
                                            * c[(d, s)]
                                            * eri[((a * n + b) * n + cc) * n + d];
                                    }
                                }
                            }
                        }
                        out[((p * n + q) * n + r) * n + s] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn quarter_transform_matches_naive() {
        let g = Geometry::linear_chain("H", 4, 1.0).unwrap();
        let (ints, mos) = rhf_for_geometry(&g).unwrap();
        let ham = transform_to_mo(&ints, &mos).unwrap();
        let naive = naive_transform(4, &ints.eri.to_full(), &mos.coefficients);
        for (a, b) in ham.eri.iter().zip(naive.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ham.symmetry_defect() < 1e-10);
        assert!((ham.rhf_energy(2) - mos.e_total).abs() < 1e-9);
    }

    #[test]
    fn empty_core_embedding_is_identity() {
        let g = Geometry::linear_chain("H", 4, 1.0).unwrap();
        let (ints, mos) = rhf_for_geometry(&g).unwrap();
        let ham = transform_to_mo(&ints, &mos).unwrap();
        let part = ActiveSpacePartition::full(4, 4).unwrap();
        let (act, e_core) = build_embedding(&ham, &part).unwrap();
        assert_eq!(e_core, 0.0);
        assert_eq!(act.h1, ham.h1);
        assert_eq!(act.eri, ham.eri);
    }

    #[test]
    fn partition_validation() {
        assert!(ActiveSpacePartition::new(4, 4, vec![0], vec![0, 1]).is_err());
        assert!(ActiveSpacePartition::new(4, 4, vec![0], vec![5]).is_err());
        assert!(ActiveSpacePartition::new(4, 8, vec![0], vec![1]).is_err());
        let p = ActiveSpacePartition::new(5, 4, vec![0], vec![2, 1]).unwrap();
        assert_eq!(p.virtual_, vec![3, 4]);
        assert_eq!(p.n_active_electrons, 2);
    }

    #[test]
    fn n2_six_orbital_active_space() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (ints, mos) = rhf_for_geometry(&g).unwrap();
        let ham = transform_to_mo(&ints, &mos).unwrap();
        let part = ActiveSpacePartition::contiguous(10, 14, 4, 6).unwrap();
        let (act, _) = build_embedding(&ham, &part).unwrap();
        assert_eq!(act.n_orb, 6);
        assert_eq!(part.n_active_electrons, 6);
        // closed-shell energy is unchanged by freezing occupied orbitals
        assert!((act.rhf_energy(3) - mos.e_total).abs() < 1e-9);
    }
}
