//! Reference-geometry setup shared by energy and force runs: SCF, MO
//! Hamiltonian, active-space choice, trial optimization and Cholesky.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::afqmc::AfqmcSystem;
use crate::chem::{Geometry, IntegralSet};
use crate::error::{Error, Result};
use crate::fci::{
    compute_rdms, fci_ground_state, orbital_entropies, FciOptions, OrbitalEntropyReport,
};
use crate::hamiltonian::{
    build_embedding, cholesky_reference, transform_to_mo, ActiveSpacePartition,
    CholeskyFactorization, MoHamiltonian,
};
use crate::scf::{rhf_with_guess, MoSet, ScfGuess};
use crate::trial::{vqe_optimize, TrialKind, TrialState, VqeOptions};

/// How the active orbitals are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ActiveSpaceSpec {
    /// Every orbital active, no core.
    Full,
    /// `electrons` in `orbitals` around the Fermi level.
    Cas { electrons: usize, orbitals: usize },
    Explicit {
        core: Vec<usize>,
        active: Vec<usize>,
    },
    /// Orbitals whose single-orbital entropy from full-space FCI exceeds
    /// the threshold.
    Entropy { threshold: f64 },
}

impl FromStr for ActiveSpaceSpec {
    type Err = Error;

    /// `full`, `cas:6,6`, `entropy` or `entropy:0.14`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unrecognized active space '{s}'"));
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (s.trim(), None),
        };
        match (head, tail) {
            ("full", None) => Ok(ActiveSpaceSpec::Full),
            ("entropy", None) => Ok(ActiveSpaceSpec::Entropy {
                threshold: crate::fci::ENTROPY_THRESHOLD,
            }),
            ("entropy", Some(t)) => Ok(ActiveSpaceSpec::Entropy {
                threshold: t.parse().map_err(|_| bad())?,
            }),
            ("cas", Some(t)) => {
                let (e, o) = t.split_once(',').ok_or_else(bad)?;
                Ok(ActiveSpaceSpec::Cas {
                    electrons: e.trim().parse().map_err(|_| bad())?,
                    orbitals: o.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ActiveSpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActiveSpaceSpec::Full => write!(f, "full"),
            ActiveSpaceSpec::Cas {
                electrons,
                orbitals,
            } => write!(f, "cas:{electrons},{orbitals}"),
            ActiveSpaceSpec::Explicit { core, active } => {
                write!(f, "explicit core={core:?} active={active:?}")
            }
            ActiveSpaceSpec::Entropy { threshold } => write!(f, "entropy:{threshold}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Text(String),
    Explicit {
        core: Vec<usize>,
        active: Vec<usize>,
    },
}

impl Serialize for ActiveSpaceSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ActiveSpaceSpec::Explicit { core, active } => SpecRepr::Explicit {
                core: core.clone(),
                active: active.clone(),
            }
            .serialize(s),
            other => SpecRepr::Text(other.to_string()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ActiveSpaceSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SpecRepr::deserialize(d)? {
            SpecRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            SpecRepr::Explicit { core, active } => Ok(ActiveSpaceSpec::Explicit { core, active }),
        }
    }
}

/// Partition for `spec`, with the entropy report when one was computed.
pub fn resolve_active_space(
    spec: &ActiveSpaceSpec,
    ham: &MoHamiltonian,
    n_electrons: usize,
    fci_opts: &FciOptions,
) -> Result<(ActiveSpacePartition, Option<OrbitalEntropyReport>)> {
    let n = ham.n_orb;
    match spec {
        ActiveSpaceSpec::Full => Ok((ActiveSpacePartition::full(n, n_electrons)?, None)),
        ActiveSpaceSpec::Cas {
            electrons,
            orbitals,
        } => {
            if *electrons > n_electrons || (n_electrons - electrons) % 2 != 0 {
                return Err(Error::Invalid(format!(
                    "cannot place {electrons} active electrons among {n_electrons}"
                )));
            }
            let n_core = (n_electrons - electrons) / 2;
            Ok((
                ActiveSpacePartition::contiguous(n, n_electrons, n_core, *orbitals)?,
                None,
            ))
        }
        ActiveSpaceSpec::Explicit { core, active } => Ok((
            ActiveSpacePartition::new(n, n_electrons, core.clone(), active.clone())?,
            None,
        )),
        ActiveSpaceSpec::Entropy { threshold } => {
            let report = entropy_report(ham, n_electrons, *threshold, fci_opts)?;
            let part = partition_from_selection(n, n_electrons, &report.selected)?;
            Ok((part, Some(report)))
        }
    }
}

pub fn entropy_report(
    ham: &MoHamiltonian,
    n_electrons: usize,
    threshold: f64,
    fci_opts: &FciOptions,
) -> Result<OrbitalEntropyReport> {
    let n_occ = n_electrons / 2;
    let fci = fci_ground_state(ham, n_occ, n_occ, fci_opts)?;
    orbital_entropies(&compute_rdms(&fci), threshold)
}

/// Selected orbitals become active; the remaining occupied orbitals are core.
pub fn partition_from_selection(
    n_orb: usize,
    n_electrons: usize,
    selected: &[usize],
) -> Result<ActiveSpacePartition> {
    if selected.is_empty() {
        return Err(Error::Invalid(
            "no orbitals exceed the entropy threshold".into(),
        ));
    }
    let n_occ = n_electrons / 2;
    let core: Vec<usize> = (0..n_occ).filter(|i| !selected.contains(i)).collect();
    ActiveSpacePartition::new(n_orb, n_electrons, core, selected.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceOptions {
    pub cholesky_threshold: f64,
    pub eps_det: f64,
    pub fci_dimension_cap: usize,
    pub scf_guess: ScfGuess,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            cholesky_threshold: 1e-8,
            eps_det: crate::trial::DEFAULT_EPS_DET,
            fci_dimension_cap: FciOptions::default().dimension_cap,
            scf_guess: ScfGuess::Lowest,
        }
    }
}

/// Everything computed once at the reference geometry.
#[derive(Debug, Clone)]
pub struct Reference {
    pub geometry: Geometry,
    pub integrals: IntegralSet,
    pub mos: MoSet,
    pub ham: MoHamiltonian,
    pub partition: ActiveSpacePartition,
    pub entropy: Option<OrbitalEntropyReport>,
    pub active_ham: MoHamiltonian,
    pub trial: TrialState,
    pub system: AfqmcSystem,
    pub cholesky: CholeskyFactorization,
}

impl Reference {
    pub fn n_electrons(&self) -> usize {
        2 * self.mos.n_occ
    }
}

pub fn prepare_reference(
    geometry: &Geometry,
    spec: &ActiveSpaceSpec,
    kind: TrialKind,
    opts: &ReferenceOptions,
) -> Result<Reference> {
    let (integrals, mos) = rhf_with_guess(geometry, opts.scf_guess)?;
    let ham = transform_to_mo(&integrals, &mos)?;
    let n_electrons = 2 * mos.n_occ;
    let fci_opts = FciOptions {
        dimension_cap: opts.fci_dimension_cap,
        ..Default::default()
    };
    let (partition, entropy) = resolve_active_space(spec, &ham, n_electrons, &fci_opts)?;
    let (active_ham, _) = build_embedding(&ham, &partition)?;
    let vqe = VqeOptions {
        eps_det: opts.eps_det,
        ..Default::default()
    };
    let trial = vqe_optimize(kind, &active_ham, partition.n_active_electrons, &vqe)?;
    let system = AfqmcSystem::new(&ham, &partition, &trial)?;
    let cholesky = cholesky_reference(&system.ham, opts.cholesky_threshold)?;
    Ok(Reference {
        geometry: geometry.clone(),
        integrals,
        mos,
        ham,
        partition,
        entropy,
        active_ham,
        trial,
        system,
        cholesky,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_roundtrip() {
        for text in ["full", "cas:6,6", "entropy:0.2"] {
            let spec: ActiveSpaceSpec = text.parse().unwrap();
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(
                serde_json::from_str::<ActiveSpaceSpec>(&json).unwrap(),
                spec
            );
        }
        let e: ActiveSpaceSpec = "entropy".parse().unwrap();
        assert_eq!(
            e,
            ActiveSpaceSpec::Entropy {
                threshold: crate::fci::ENTROPY_THRESHOLD
            }
        );
        let x: ActiveSpaceSpec = serde_json::from_str(r#"{"core":[0],"active":[1,2]}"#).unwrap();
        assert_eq!(
            x,
            ActiveSpaceSpec::Explicit {
                core: vec![0],
                active: vec![1, 2]
            }
        );
        assert!("cas:6".parse::<ActiveSpaceSpec>().is_err());
        assert!("bogus".parse::<ActiveSpaceSpec>().is_err());
    }

    #[test]
    fn entropy_selection_for_stretched_h2() {
        let g = Geometry::diatomic("H", 10.0).unwrap();
        let r = prepare_reference(
            &g,
            &"entropy".parse().unwrap(),
            TrialKind::Upccd,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.partition.active, vec![0, 1]);
        assert!(r.partition.core.is_empty());
        let g = Geometry::diatomic("H", 0.7414).unwrap();
        let err = prepare_reference(
            &g,
            &"entropy".parse().unwrap(),
            TrialKind::Upccd,
            &Default::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn cas_partition_for_n2() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let r = prepare_reference(
            &g,
            &"cas:6,6".parse().unwrap(),
            TrialKind::SingleDeterminant,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.partition.core, vec![0, 1, 2, 3]);
        assert_eq!(r.active_ham.n_orb, 6);
        assert!(r.cholesky.reconstruction_error(&r.system.ham) <= 1e-8);
    }
}
