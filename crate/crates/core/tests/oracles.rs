mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use qmcf::afqmc::{local_energy, vce_overlap, EmbeddedTrial};
use qmcf::alignment::{align_orbitals, AlignOptions};
use qmcf::chem::Geometry;
use qmcf::fci::{fci_ground_state, FciOptions, FciSpace};
use qmcf::hamiltonian::{
    build_embedding, cholesky_reference, cholesky_replay, transform_to_mo, transform_with,
    ActiveSpacePartition,
};
use qmcf::linalg::eigh;
use qmcf::scf::{rhf_for_geometry, rhf_from_density};
use qmcf::trial::OverlapEstimator;

#[test]
fn vce_overlap_matches_full_space_expansion() {
    let mut rng = Rng::new(11);
    for _ in 0..200 {
        let inst = overlap_instance(&mut rng);
        let brute = brute_overlap(&inst.trial, &inst.part, &inst.phi_alpha, &inst.phi_beta);
        let v = vce_overlap(
            &inst.trial,
            &inst.part,
            &inst.phi_alpha,
            &inst.phi_beta,
            &OverlapEstimator::Exact,
            0,
            0,
        );
        assert!(
            (v.value - brute).norm() <= 1e-9 * brute.norm(),
            "{} vs {}",
            v.value,
            brute
        );
        let emb = EmbeddedTrial::embed(&inst.trial, &inst.part).unwrap();
        let w = qmcf::afqmc::overlap(&emb, &inst.phi_alpha, &inst.phi_beta, false);
        assert!((w - brute).norm() <= 1e-9 * brute.norm());
    }
}

#[test]
fn local_energy_matches_dense_sigma() {
    let mut rng = Rng::new(12);
    let hams = [h_chain(4, 0.9), h_chain(4, 1.7), h_chain(6, 1.3)];
    for i in 0..200 {
        let base = &hams[i % hams.len()];
        let n = base.n_orb;
        let ham = base.rotated(&rng.orthogonal(n, 0.6));
        let ne = n / 2;
        let s = strings(n, ne);
        let dets: Vec<(f64, u64, u64)> = (0..1 + rng.below(6))
            .map(|_| (rng.uniform(), s[rng.below(s.len())], s[rng.below(s.len())]))
            .collect();
        let trial = EmbeddedTrial::from_determinants(n, ne, ne, &dets);
        let pa = rng.cmatrix(n, ne);
        let pb = rng.cmatrix(n, ne);
        let oracle = dense_local_energy(&ham, &dets, &pa, &pb);
        let e = local_energy(&trial, &ham, &pa, &pb, false).unwrap();
        assert!((e - oracle).norm() < 1e-8, "{e} vs {oracle}");
    }
}

#[test]
fn frozen_core_embedding_matches_restricted_fci() {
    let g = Geometry::linear_chain("H", 4, 1.5).unwrap();
    let (ints, mos) = rhf_for_geometry(&g).unwrap();
    let ham = transform_to_mo(&ints, &mos).unwrap();
    let part = ActiveSpacePartition::new(4, 4, vec![0], vec![1, 2, 3]).unwrap();
    let (active, _) = build_embedding(&ham, &part).unwrap();
    let emb = fci_ground_state(&active, 1, 1, &FciOptions::default()).unwrap();

    // lowest eigenvalue of the full-space matrix over determinants with orbital 0 doubly occupied
    let space = FciSpace::new(4, 2, 2).unwrap();
    let h = space.dense(&ham);
    let keep: Vec<usize> = (0..space.dim())
        .filter(|&i| {
            let (a, b) = space.determinant(i);
            a & 1 == 1 && b & 1 == 1
        })
        .collect();
    assert_eq!(keep.len(), 9);
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| h[(keep[i], keep[j])]);
    let (w, _) = eigh(&sub);
    let oracle = w.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((emb.e0 - oracle).abs() < 1e-9, "{} vs {}", emb.e0, oracle);
}

#[test]
fn cholesky_replay_tracks_a_displaced_geometry() {
    let g = Geometry::diatomic("N", 1.2).unwrap();
    let (ints, mos) = rhf_for_geometry(&g).unwrap();
    let ham = transform_to_mo(&ints, &mos).unwrap();
    let reference = cholesky_reference(&ham, 1e-8).unwrap();

    let gd = g.displace(1, 2, 1e-6).unwrap();
    let (id, md) = rhf_from_density(&gd, &mos.density()).unwrap();
    let aligned = align_orbitals(
        &mos,
        &ints.overlap,
        &md,
        &id.overlap,
        &AlignOptions::default(),
    )
    .unwrap();
    let hd = transform_with(&id, &aligned.coefficients).unwrap();
    let replay = cholesky_replay(&hd, &reference.artifact()).unwrap();

    assert_eq!(replay.len(), reference.len());
    let mut worst: f64 = 0.0;
    for (a, b) in reference.vectors.iter().zip(&replay.vectors) {
        worst = worst.max((a - b).amax());
    }
    assert!(worst > 0.0 && worst < 1e-4, "largest vector change {worst}");
    assert!(replay.reconstruction_error(&hd) <= 1e-8);
}

#[test]
fn cholesky_reconstruction_within_threshold() {
    let systems = [
        Geometry::linear_chain("H", 2, 0.74).unwrap(),
        Geometry::linear_chain("H", 4, 1.5).unwrap(),
        Geometry::linear_chain("H", 6, 1.0).unwrap(),
        Geometry::diatomic("N", 1.6).unwrap(),
    ];
    for g in &systems {
        let (ints, mos) = rhf_for_geometry(g).unwrap();
        let ham = transform_to_mo(&ints, &mos).unwrap();
        for threshold in [1e-4, 1e-8] {
            let chol = cholesky_reference(&ham, threshold).unwrap();
            assert!(chol.reconstruction_error(&ham) <= threshold);
        }
    }
}

#[test]
fn hartree_fock_walker_overlap_is_one() {
    let part = ActiveSpacePartition::new(5, 6, vec![0, 1], vec![2, 3]).unwrap();
    let trial = toy_trial(
        2,
        1,
        vec![qmcf::trial::Determinant {
            coef: 1.0,
            alpha: 1,
            beta: 1,
        }],
    );
    let phi = complex_identity(5, 3);
    let v = vce_overlap(&trial, &part, &phi, &phi, &OverlapEstimator::Exact, 0, 0);
    assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
}
