//! Active-space trial states: single determinants, upCCD and oo-upCCD
//! prepared on a statevector, and exact FCI expansions.

mod estimator;
mod optimize;
pub mod statevector;

pub use estimator::{exact_overlap, OverlapEstimator};
pub use optimize::{bfgs, fd_gradient, Minimum, OptimizerOptions};
pub use statevector::{apply_upccd, Statevector};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fci::{FciResult, FciSpace};
use crate::hamiltonian::MoHamiltonian;
use crate::linalg::expm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialKind {
    SingleDeterminant,
    Upccd,
    OoUpccd,
    Fci,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub coef: f64,
    pub alpha: u64,
    pub beta: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub kind: TrialKind,
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Pair amplitudes (occupied i, virtual a, t_ia).
    pub t: Vec<(usize, usize, f64)>,
    /// Upper-triangle generator entries (p < q, κ_pq); κ_qp = −κ_pq.
    pub kappa: Vec<(usize, usize, f64)>,
    pub eps_det: f64,
    /// Determinants in the (rotated) active orbital basis.
    pub determinants: Vec<Determinant>,
    pub discarded_weight: f64,
    /// ⟨Ψ|H|Ψ⟩ on the active Hamiltonian the trial was built for.
    pub energy: f64,
}

/// JSON layout of a trial's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialParams {
    pub kind: TrialKind,
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub t: Vec<(usize, usize, f64)>,
    pub kappa: Vec<(usize, usize, f64)>,
    pub eps_det: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub determinants: Vec<(f64, u64, u64)>,
}

pub const DEFAULT_EPS_DET: f64 = 1e-10;

/// Antisymmetric generator K with K_pq = κ_pq and its exponential.
pub fn rotation_from_kappa(n: usize, kappa: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n, n);
    for &(p, q, v) in kappa {
        k[(p, q)] += v;
        k[(q, p)] -= v;
    }
    expm(&k)
}

/// h' = Uᵀ h U and the four-index analogue, U = exp(κ).
pub fn apply_orbital_rotation(kappa: &[(usize, usize, f64)], ham: &MoHamiltonian) -> MoHamiltonian {
    if kappa.iter().all(|k| k.2 == 0.0) {
        return ham.clone();
    }
    ham.rotated(&rotation_from_kappa(ham.n_orb, kappa))
}

/// Determinants with |c| ≥ eps from a particle-number-pure statevector,
/// and the discarded weight.
pub fn expand_determinants(
    sv: &Statevector,
    space: &FciSpace,
    eps: f64,
) -> (Vec<Determinant>, f64) {
    let (ci, outside) = sv.to_ci(space);
    let mut kept = Vec::new();
    let mut discarded = outside;
    for (i, c) in ci.iter().enumerate() {
        if c.norm() >= eps {
            let (alpha, beta) = space.determinant(i);
            kept.push(Determinant {
                coef: c.re,
                alpha,
                beta,
            });
        } else {
            discarded += c.norm_sqr();
        }
    }
    (kept, discarded)
}

fn energy_of(space: &FciSpace, ham: &MoHamiltonian, ci: &[Complex64]) -> f64 {
    let re: Vec<f64> = ci.iter().map(|c| c.re).collect();
    let im: Vec<f64> = ci.iter().map(|c| c.im).collect();
    let mut e = 0.0;
    for part in [&re, &im] {
        if part.iter().any(|&x| x != 0.0) {
            let hp = space.sigma(ham, part);
            e += part.iter().zip(&hp).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    e
}

/// ⟨upCCD(t)|H|upCCD(t)⟩ including the constant.
pub fn upccd_energy(space: &FciSpace, ham: &MoHamiltonian, t: &[(usize, usize, f64)]) -> f64 {
    let sv = apply_upccd(space.n_orb, space.n_alpha(), t);
    energy_of(space, ham, &sv.to_ci(space).0)
}

/// Pair excitation index list (i, a) for closed-shell `n_pairs` in `n_orb`.
pub fn pair_indices(n_orb: usize, n_pairs: usize) -> Vec<(usize, usize)> {
    (0..n_pairs)
        .flat_map(|i| (n_pairs..n_orb).map(move |a| (i, a)))
        .collect()
}

pub fn kappa_indices(n_orb: usize) -> Vec<(usize, usize)> {
    (0..n_orb)
        .flat_map(|p| (p + 1..n_orb).map(move |q| (p, q)))
        .collect()
}

fn zip_params(idx: &[(usize, usize)], x: &[f64]) -> Vec<(usize, usize, f64)> {
    idx.iter().zip(x).map(|(&(i, a), &v)| (i, a, v)).collect()
}

impl TrialState {
    /// Closed-shell determinant occupying the lowest orbitals.
    pub fn hartree_fock(ham: &MoHamiltonian, n_alpha: usize, n_beta: usize) -> Self {
        let alpha = (1u64 << n_alpha) - 1;
        let beta = (1u64 << n_beta) - 1;
        let energy = FciSpace::new(ham.n_orb, n_alpha, n_beta)
            .map(|sp| {
                let mut v = vec![0.0; sp.dim()];
                v[sp.index(alpha, beta)] = 1.0;
                energy_of(
                    &sp,
                    ham,
                    &v.iter()
                        .map(|&x| Complex64::new(x, 0.0))
                        .collect::<Vec<_>>(),
                )
            })
            .unwrap_or(f64::NAN);
        TrialState {
            kind: TrialKind::SingleDeterminant,
            n_orb: ham.n_orb,
            n_alpha,
            n_beta,
            t: vec![],
            kappa: vec![],
            eps_det: DEFAULT_EPS_DET,
            determinants: vec![Determinant {
                coef: 1.0,
                alpha,
                beta,
            }],
            discarded_weight: 0.0,
            energy,
        }
    }

    /// Exact ground-state expansion from an FCI result.
    pub fn from_fci(fci: &FciResult, eps_det: f64) -> Self {
        let mut determinants = Vec::new();
        let mut discarded = 0.0;
        for (c, alpha, beta) in fci.expansion(0.0) {
            if c.abs() >= eps_det {
                determinants.push(Determinant {
                    coef: c,
                    alpha,
                    beta,
                });
            } else {
                discarded += c * c;
            }
        }
        TrialState {
            kind: TrialKind::Fci,
            n_orb: fci.n_orb(),
            n_alpha: fci.space.n_alpha(),
            n_beta: fci.space.n_beta(),
            t: vec![],
            kappa: vec![],
            eps_det,
            determinants,
            discarded_weight: discarded,
            energy: fci.e0,
        }
    }

    /// upCCD (optionally orbital-rotated) state for fixed parameters.
    pub fn from_pair_amplitudes(
        ham: &MoHamiltonian,
        n_pairs: usize,
        t: Vec<(usize, usize, f64)>,
        kappa: Vec<(usize, usize, f64)>,
        eps_det: f64,
    ) -> Result<Self> {
        let space = FciSpace::new(ham.n_orb, n_pairs, n_pairs)?;
        let rotated = apply_orbital_rotation(&kappa, ham);
        let sv = apply_upccd(ham.n_orb, n_pairs, &t);
        let energy = energy_of(&space, &rotated, &sv.to_ci(&space).0);
        let (determinants, discarded_weight) = expand_determinants(&sv, &space, eps_det);
        Ok(TrialState {
            kind: if kappa.is_empty() {
                TrialKind::Upccd
            } else {
                TrialKind::OoUpccd
            },
            n_orb: ham.n_orb,
            n_alpha: n_pairs,
            n_beta: n_pairs,
            t,
            kappa,
            eps_det,
            determinants,
            discarded_weight,
            energy,
        })
    }

    /// Orbital rotation U = exp(κ) (identity for unrotated kinds).
    pub fn rotation(&self) -> DMatrix<f64> {
        rotation_from_kappa(self.n_orb, &self.kappa)
    }

    pub fn statevector(&self) -> Option<Statevector> {
        match self.kind {
            TrialKind::Upccd | TrialKind::OoUpccd => {
                Some(apply_upccd(self.n_orb, self.n_alpha, &self.t))
            }
            _ => None,
        }
    }

    pub fn params(&self) -> TrialParams {
        let determinants = match self.kind {
            TrialKind::Fci | TrialKind::SingleDeterminant => self
                .determinants
                .iter()
                .map(|d| (d.coef, d.alpha, d.beta))
                .collect(),
            _ => vec![],
        };
        TrialParams {
            kind: self.kind,
            n_orb: self.n_orb,
            n_alpha: self.n_alpha,
            n_beta: self.n_beta,
            t: self.t.clone(),
            kappa: self.kappa.clone(),
            eps_det: self.eps_det,
            determinants,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.params()).expect("trial parameters serialize")
    }

    /// Rebuilds a trial from its JSON parameters on `ham`.
    pub fn from_json(text: &str, ham: &MoHamiltonian) -> Result<Self> {
        let p: TrialParams = serde_json::from_str(text)?;
        if p.n_orb != ham.n_orb {
            return Err(Error::Dimension(format!(
                "trial has {} orbitals, Hamiltonian {}",
                p.n_orb, ham.n_orb
            )));
        }
        match p.kind {
            TrialKind::Upccd | TrialKind::OoUpccd => {
                if p.n_alpha != p.n_beta {
                    return Err(Error::Invalid("pair trials need n_alpha = n_beta".into()));
                }
                let mut s = Self::from_pair_amplitudes(ham, p.n_alpha, p.t, p.kappa, p.eps_det)?;
                s.kind = p.kind;
                Ok(s)
            }
            TrialKind::SingleDeterminant | TrialKind::Fci => {
                let mut s = Self::hartree_fock(ham, p.n_alpha, p.n_beta);
                s.kind = p.kind;
                s.eps_det = p.eps_det;
                if !p.determinants.is_empty() {
                    s.determinants = p
                        .determinants
                        .iter()
                        .map(|&(coef, alpha, beta)| Determinant { coef, alpha, beta })
                        .collect();
                    let space = FciSpace::new(ham.n_orb, p.n_alpha, p.n_beta)?;
                    let mut ci = vec![Complex64::new(0.0, 0.0); space.dim()];
                    for d in &s.determinants {
                        ci[space.index(d.alpha, d.beta)] = Complex64::new(d.coef, 0.0);
                    }
                    s.energy = energy_of(&space, ham, &ci);
                }
                Ok(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VqeOptions {
    pub optimizer: OptimizerOptions,
    pub eps_det: f64,
    /// Joint energy change ending the κ/t alternation.
    pub sweep_tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions {
            optimizer: OptimizerOptions::default(),
            eps_det: DEFAULT_EPS_DET,
            sweep_tolerance: 1e-9,
            max_sweeps: 100,
        }
    }
}

/// Variationally optimizes a trial of the given kind on an active
/// Hamiltonian with `n_electrons` (closed shell) electrons.
pub fn vqe_optimize(
    kind: TrialKind,
    ham: &MoHamiltonian,
    n_electrons: usize,
    opts: &VqeOptions,
) -> Result<TrialState> {
    if n_electrons % 2 != 0 {
        return Err(Error::Invalid(
            "pair trials need an even electron count".into(),
        ));
    }
    let n_pairs = n_electrons / 2;
    if 2 * ham.n_orb > 16 && matches!(kind, TrialKind::Upccd | TrialKind::OoUpccd) {
        return Err(Error::Invalid(format!(
            "{} spin orbitals exceed the 16-qubit statevector limit",
            2 * ham.n_orb
        )));
    }
    match kind {
        TrialKind::SingleDeterminant => Ok(TrialState::hartree_fock(ham, n_pairs, n_pairs)),
        TrialKind::Fci => {
            let fci = crate::fci::fci_ground_state(ham, n_pairs, n_pairs, &Default::default())?;
            Ok(TrialState::from_fci(&fci, opts.eps_det))
        }
        TrialKind::Upccd => {
            let space = FciSpace::new(ham.n_orb, n_pairs, n_pairs)?;
            let idx = pair_indices(ham.n_orb, n_pairs);
            let m = bfgs(
                |x| upccd_energy(&space, ham, &zip_params(&idx, x)),
                &vec![0.0; idx.len()],
                &opts.optimizer,
            )?;
            TrialState::from_pair_amplitudes(
                ham,
                n_pairs,
                zip_params(&idx, &m.x),
                vec![],
                opts.eps_det,
            )
        }
        TrialKind::OoUpccd => {
            let space = FciSpace::new(ham.n_orb, n_pairs, n_pairs)?;
            let tidx = pair_indices(ham.n_orb, n_pairs);
            let kidx = kappa_indices(ham.n_orb);
            let mut t = vec![0.0; tidx.len()];
            let mut k = vec![0.0; kidx.len()];
            let mut e_prev = f64::INFINITY;
            let mut converged = false;
            for _ in 0..opts.max_sweeps {
                let rotated = apply_orbital_rotation(&zip_params(&kidx, &k), ham);
                let mt = bfgs(
                    |x| upccd_energy(&space, &rotated, &zip_params(&tidx, x)),
                    &t,
                    &opts.optimizer,
                )?;
                t = mt.x;
                let tt = zip_params(&tidx, &t);
                let sv = apply_upccd(ham.n_orb, n_pairs, &tt);
                let (ci, _) = sv.to_ci(&space);
                let mk = bfgs(
                    |x| {
                        energy_of(
                            &space,
                            &apply_orbital_rotation(&zip_params(&kidx, x), ham),
                            &ci,
                        )
                    },
                    &k,
                    &opts.optimizer,
                )?;
                k = mk.x;
                if (e_prev - mk.value).abs() < opts.sweep_tolerance {
                    converged = true;
                    break;
                }
                e_prev = mk.value;
            }
            if !converged {
                return Err(Error::Stagnation {
                    energy: e_prev,
                    gradient: f64::NAN,
                    params: t.iter().chain(k.iter()).copied().collect(),
                });
            }
            TrialState::from_pair_amplitudes(
                ham,
                n_pairs,
                zip_params(&tidx, &t),
                zip_params(&kidx, &k),
                opts.eps_det,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::Geometry;
    use crate::fci::{fci_for_geometry, fci_ground_state, FciOptions};
    use crate::linalg::to_complex;

    fn h2() -> (MoHamiltonian, f64) {
        let g = Geometry::diatomic("H", 0.7414).unwrap();
        let (_, fci, ham) = fci_for_geometry(&g, &FciOptions::default()).unwrap();
        (ham, fci.e0)
    }

    #[test]
    fn h2_upccd_is_exact() {
        let (ham, e_fci) = h2();
        let tr = vqe_optimize(TrialKind::Upccd, &ham, 2, &VqeOptions::default()).unwrap();
        assert!((tr.energy - e_fci).abs() < 1e-8);
        assert_eq!(tr.determinants.len(), 2);
        assert!(tr.discarded_weight < 1e-12);
    }

    #[test]
    fn h4_variational_sandwich() {
        let g = Geometry::linear_chain("H", 4, 1.0).unwrap();
        let (e_rhf, fci, ham) = fci_for_geometry(&g, &FciOptions::default()).unwrap();
        let tr = vqe_optimize(TrialKind::Upccd, &ham, 4, &VqeOptions::default()).unwrap();
        assert!(tr.energy >= fci.e0 - 1e-9);
        assert!(tr.energy <= e_rhf + 1e-9);
        for d in &tr.determinants {
            assert_eq!(d.alpha, d.beta);
        }
        let norm: f64 = tr.determinants.iter().map(|d| d.coef * d.coef).sum();
        assert!((norm + tr.discarded_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rotation_is_identity_and_givens_keeps_fci() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (ints, mos) = crate::scf::rhf_for_geometry(&g).unwrap();
        let ham = crate::hamiltonian::transform_to_mo(&ints, &mos).unwrap();
        assert_eq!(apply_orbital_rotation(&[(0, 1, 0.0)], &ham), ham);
        // π pair of N2 (orbitals 5,6) inside a (6e,6o) space
        let part = crate::hamiltonian::ActiveSpacePartition::contiguous(10, 14, 4, 6).unwrap();
        let (act, _) = crate::hamiltonian::build_embedding(&ham, &part).unwrap();
        let e0 = fci_ground_state(&act, 3, 3, &FciOptions::default())
            .unwrap()
            .e0;
        let rot = apply_orbital_rotation(&[(1, 2, 0.4)], &act);
        let e1 = fci_ground_state(&rot, 3, 3, &FciOptions::default())
            .unwrap()
            .e0;
        assert!((e0 - e1).abs() < 1e-9);
    }

    #[test]
    fn orbital_optimization_lowers_stretched_h4() {
        let g = Geometry::linear_chain("H", 4, 2.0).unwrap();
        let (_, fci, ham) = fci_for_geometry(&g, &FciOptions::default()).unwrap();
        let opts = VqeOptions::default();
        let up = vqe_optimize(TrialKind::Upccd, &ham, 4, &opts).unwrap();
        let oo = vqe_optimize(TrialKind::OoUpccd, &ham, 4, &opts).unwrap();
        assert!(oo.energy < up.energy - 1e-6);
        assert!(oo.energy >= fci.e0 - 1e-9);
        let u = oo.rotation();
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let (ham, _) = h2();
        let tr = vqe_optimize(TrialKind::Upccd, &ham, 2, &VqeOptions::default()).unwrap();
        let text = tr.to_json();
        assert!(text.starts_with("{\"kind\":\"upccd\""));
        let back = TrialState::from_json(&text, &ham).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn overlap_matches_statevector_inner_product() {
        let g = Geometry::linear_chain("H", 4, 1.0).unwrap();
        let (_, _, ham) = fci_for_geometry(&g, &FciOptions::default()).unwrap();
        let tr = TrialState::from_pair_amplitudes(
            &ham,
            2,
            vec![(0, 2, 0.2), (1, 3, -0.3), (0, 3, 0.1)],
            vec![],
            1e-12,
        )
        .unwrap();
        let phi_a = to_complex(&DMatrix::from_fn(4, 2, |i, j| {
            ((i * 3 + j * 5) % 7) as f64 * 0.3 - 0.8
        }));
        let phi_b = DMatrix::from_fn(4, 2, |i, j| {
            Complex64::new(
                ((i + 2 * j) % 5) as f64 * 0.2 - 0.3,
                0.1 * (i as f64 - j as f64),
            )
        });
        let ov = exact_overlap(&tr, &phi_a, &phi_b);
        // walker mapped into the qubit register
        let space = FciSpace::new(4, 2, 2).unwrap();
        let ci: Vec<Complex64> = (0..space.dim())
            .map(|i| {
                let (a, b) = space.determinant(i);
                let da = crate::linalg::cdet(&crate::linalg::select_rows(
                    &phi_a,
                    &crate::fci::occupied(a),
                ));
                let db = crate::linalg::cdet(&crate::linalg::select_rows(
                    &phi_b,
                    &crate::fci::occupied(b),
                ));
                da * db
            })
            .collect();
        let walker_sv = Statevector::from_ci(&space, &ci);
        let reference = tr.statevector().unwrap().inner(&walker_sv);
        assert!((ov - reference).norm() < 1e-12);
        // stochastic mode is deterministic and differs from exact
        let est = OverlapEstimator::Stochastic {
            shadow_seed: 9,
            n_samples: 100,
            sigma: 1.0,
        };
        let a = est.estimate(&tr, &phi_a, &phi_b, 3, 7);
        assert_eq!(a, est.estimate(&tr, &phi_a, &phi_b, 3, 7));
        assert_ne!(a, ov);
        assert_eq!(
            OverlapEstimator::Exact.estimate(&tr, &phi_a, &phi_b, 3, 7),
            ov
        );
    }
}
