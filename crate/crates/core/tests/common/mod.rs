//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qmcf::chem::Geometry;
use qmcf::fci::{fci_for_geometry, occupied, FciOptions, FciSpace};
use qmcf::hamiltonian::{ActiveSpacePartition, MoHamiltonian};
use qmcf::linalg::{cdet, expm, select_rows, to_complex, CMatrix};
use qmcf::trial::{Determinant, TrialKind, TrialState};

/// splitmix64, enough for reproducible test instances.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-0.5, 0.5).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            v.swap(i, self.below(i + 1));
        }
    }

    pub fn cmatrix(&mut self, n: usize, m: usize) -> CMatrix {
        DMatrix::from_fn(n, m, |_, _| Complex64::new(self.uniform(), self.uniform()))
    }

    /// exp of a random antisymmetric matrix scaled by `scale`.
    pub fn orthogonal(&mut self, n: usize, scale: f64) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..p {
                let x = scale * self.uniform();
                k[(p, q)] = x;
                k[(q, p)] = -x;
            }
        }
        expm(&k)
    }
}

/// Bit strings with `k` of `n` bits set.
pub fn strings(n: usize, k: usize) -> Vec<u64> {
    (0u64..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .collect()
}

pub fn toy_trial(n_orb: usize, n_pairs: usize, dets: Vec<Determinant>) -> TrialState {
    TrialState {
        kind: TrialKind::Fci,
        n_orb,
        n_alpha: n_pairs,
        n_beta: n_pairs,
        t: vec![],
        kappa: vec![],
        eps_det: 0.0,
        determinants: dets,
        discarded_weight: 0.0,
        energy: 0.0,
    }
}

/// A random partition, trial and walker pair for overlap checks.
pub struct OverlapInstance {
    pub part: ActiveSpacePartition,
    pub trial: TrialState,
    pub phi_alpha: CMatrix,
    pub phi_beta: CMatrix,
}

pub fn overlap_instance(rng: &mut Rng) -> OverlapInstance {
    let n_core = rng.below(3);
    let n_act = 2 + rng.below(3);
    let n_virt = rng.below(3);
    let n_orb = n_core + n_act + n_virt;
    let pairs = 1 + rng.below(n_act - 1);
    let mut orbs: Vec<usize> = (0..n_orb).collect();
    rng.shuffle(&mut orbs);
    let core = orbs[..n_core].to_vec();
    let active = orbs[n_core..n_core + n_act].to_vec();
    let part = ActiveSpacePartition::new(n_orb, 2 * (n_core + pairs), core, active).unwrap();
    let s = strings(n_act, pairs);
    let n_det = 1 + rng.below(5);
    let dets = (0..n_det)
        .map(|_| Determinant {
            coef: rng.uniform(),
            alpha: s[rng.below(s.len())],
            beta: s[rng.below(s.len())],
        })
        .collect();
    let n_el = n_core + pairs;
    OverlapInstance {
        part,
        trial: toy_trial(n_act, pairs, dets),
        phi_alpha: rng.cmatrix(n_orb, n_el),
        phi_beta: rng.cmatrix(n_orb, n_el),
    }
}

/// Σ_i c_i Π_σ det(Ξ_iσ† φ_σ), Ξ the full-space occupied columns of each
/// embedded determinant.
pub fn brute_overlap(
    trial: &TrialState,
    part: &ActiveSpacePartition,
    pa: &CMatrix,
    pb: &CMatrix,
) -> Complex64 {
    let spin = |s: u64, phi: &CMatrix| {
        let mut rows = part.core.clone();
        rows.extend(occupied(s).iter().map(|&k| part.active[k]));
        cdet(&select_rows(phi, &rows))
    };
    trial
        .determinants
        .iter()
        .map(|d| spin(d.alpha, pa) * spin(d.beta, pb) * d.coef)
        .sum()
}

/// FCI coefficients of a pair of walker determinants.
pub fn walker_ci(space: &FciSpace, pa: &CMatrix, pb: &CMatrix) -> Vec<Complex64> {
    (0..space.dim())
        .map(|i| {
            let (a, b) = space.determinant(i);
            cdet(&select_rows(pa, &occupied(a))) * cdet(&select_rows(pb, &occupied(b)))
        })
        .collect()
}

/// ⟨Ψ_T|H|φ⟩/⟨Ψ_T|φ⟩ through the dense sigma vector of the full space.
pub fn dense_local_energy(
    ham: &MoHamiltonian,
    dets: &[(f64, u64, u64)],
    pa: &CMatrix,
    pb: &CMatrix,
) -> Complex64 {
    let space = FciSpace::new(ham.n_orb, pa.ncols(), pb.ncols()).unwrap();
    let ci = walker_ci(&space, pa, pb);
    let re: Vec<f64> = ci.iter().map(|c| c.re).collect();
    let im: Vec<f64> = ci.iter().map(|c| c.im).collect();
    let (hr, hi) = (space.sigma(ham, &re), space.sigma(ham, &im));
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for &(c, a, b) in dets {
        let k = space.index(a, b);
        num += Complex64::new(hr[k], hi[k]) * c;
        den += ci[k] * c;
    }
    num / den
}

/// MO Hamiltonian of a hydrogen chain.
pub fn h_chain(n: usize, bond: f64) -> MoHamiltonian {
    let g = Geometry::linear_chain("H", n, bond).unwrap();
    fci_for_geometry(&g, &FciOptions::default()).unwrap().2
}

pub fn complex_identity(n: usize, m: usize) -> CMatrix {
    to_complex(&DMatrix::from_fn(
        n,
        m,
        |i, j| if i == j { 1.0 } else { 0.0 },
    ))
}
