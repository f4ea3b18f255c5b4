//! Maximal-overlap alignment of displaced-geometry orbitals onto a reference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sqrt_sym;
use crate::scf::MoSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignOptions {
    /// Consecutive orbital-energy gap below which orbitals share a group.
    pub delta_thresh: f64,
    /// Eigenvalue floor in the symmetric orthogonalizer.
    pub eps_reg: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            delta_thresh: 1e-6,
            eps_reg: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedBlock {
    pub indices: Vec<usize>,
    /// Proper rotation R_k (det +1) applied after the phase correction.
    pub rotation: DMatrix<f64>,
    /// Whether the last target orbital of the group was negated first.
    pub phase_flip: bool,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub coefficients: DMatrix<f64>,
    pub blocks: Vec<AlignedBlock>,
    /// ⟨ref_i|aligned_i⟩ in the orthonormalized representation.
    pub diagnostics: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Maximal runs of orbitals whose consecutive energy gaps are below `thresh`.
pub fn degeneracy_groups(energies: &[f64], thresh: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &e) in energies.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (e - energies[i - 1]).abs() < thresh => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Optimal proper rotation for one overlap block: returns (R, flip, σ).
///
/// With `flip`, the last target column is negated before R is applied; the
/// combined transform maximizes trace(O_k M) over all orthogonal M.
pub fn block_rotation(o: &DMatrix<f64>) -> (DMatrix<f64>, bool, Vec<f64>) {
    let n = o.nrows();
    if n == 1 {
        let flip = o[(0, 0)] < 0.0;
        return (DMatrix::identity(1, 1), flip, vec![o[(0, 0)].abs()]);
    }
    let svd = o.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let r = &u * &vt;
    let sv = svd.singular_values.iter().copied().collect();
    if r.determinant() < 0.0 {
        // R·P with P negating the last target column
        let mut rp = r;
        rp.column_mut(n - 1).neg_mut();
        (rp, true, sv)
    } else {
        (r, false, sv)
    }
}

/// Rotates `target` orbitals to maximal overlap with `reference`.
pub fn align_orbitals(
    reference: &MoSet,
    s_ref: &DMatrix<f64>,
    target: &MoSet,
    s_target: &DMatrix<f64>,
    opts: &AlignOptions,
) -> Result<AlignmentResult> {
    let n = reference.coefficients.nrows();
    let m = reference.nmo();
    if target.coefficients.nrows() != n
        || target.nmo() != m
        || s_ref.nrows() != n
        || s_target.nrows() != n
    {
        return Err(Error::Dimension("reference and target bases differ".into()));
    }
    let ortho_ref = sqrt_sym(s_ref, opts.eps_reg) * &reference.coefficients;
    let ortho_tgt = sqrt_sym(s_target, opts.eps_reg) * &target.coefficients;
    let overlap = ortho_ref.transpose() * &ortho_tgt;
    let smallest = overlap
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smallest < 1e-8 {
        return Err(Error::Numerical(format!(
            "orbital overlap matrix is singular (smallest singular value {smallest:e})"
        )));
    }

    let energies: Vec<f64> = target.energies.iter().copied().collect();
    let mut aligned = target.coefficients.clone();
    let mut blocks = Vec::new();
    let mut warnings = Vec::new();
    for idx in degeneracy_groups(&energies, opts.delta_thresh) {
        let k = idx.len();
        let o = DMatrix::from_fn(k, k, |a, b| overlap[(idx[a], idx[b])]);
        let (r, flip, sv) = block_rotation(&o);
        if sv.iter().any(|&s| s < 0.1) {
            warnings.push(format!("orbital character changed in group {idx:?}"));
        }
        let first = idx[0];
        let last = idx[k - 1];
        if first < target.n_occ && last >= target.n_occ {
            warnings.push(format!(
                "group {idx:?} straddles the occupied/virtual boundary"
            ));
        }
        let mut block = DMatrix::from_fn(n, k, |mu, b| target.coefficients[(mu, idx[b])]);
        if flip {
            block.column_mut(k - 1).neg_mut();
        }
        let rotated = block * r.transpose();
        for (b, &j) in idx.iter().enumerate() {
            aligned.set_column(j, &rotated.column(b));
        }
        blocks.push(AlignedBlock {
            indices: idx,
            rotation: r,
            phase_flip: flip,
            singular_values: sv,
        });
    }

    let ortho_al = sqrt_sym(s_target, opts.eps_reg) * &aligned;
    let diagnostics: Vec<f64> = (0..m)
        .map(|i| ortho_ref.column(i).dot(&ortho_al.column(i)))
        .collect();
    for (i, &d) in diagnostics.iter().enumerate() {
        if d < 0.9 {
            warnings.push(format!("orbital {i} overlap {d:.4} after alignment"));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(AlignmentResult {
        coefficients: aligned,
        blocks,
        diagnostics,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{Geometry, IntegralSet};
    use crate::scf::{rhf_for_geometry, run_rhf, ScfOptions};
    use proptest::prelude::*;

    fn n2(d: f64) -> (IntegralSet, MoSet) {
        rhf_for_geometry(&Geometry::diatomic("N", d).unwrap()).unwrap()
    }

    #[test]
    fn identity_at_reference() {
        let (ints, mos) = n2(1.2);
        let res = align_orbitals(
            &mos,
            &ints.overlap,
            &mos,
            &ints.overlap,
            &AlignOptions::default(),
        )
        .unwrap();
        for b in &res.blocks {
            let k = b.indices.len();
            assert!((&b.rotation - DMatrix::identity(k, k)).amax() < 1e-8);
            assert!(!b.phase_flip);
        }
        for d in &res.diagnostics {
            assert!((d - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sign_flip_is_restored() {
        let (ints, mos) = n2(1.2);
        let mut flipped = mos.clone();
        flipped.coefficients.column_mut(3).neg_mut();
        let res = align_orbitals(
            &mos,
            &ints.overlap,
            &flipped,
            &ints.overlap,
            &AlignOptions::default(),
        )
        .unwrap();
        assert!(res.diagnostics.iter().all(|&d| d >= 0.999999));
        assert!((&res.coefficients - &mos.coefficients).amax() < 1e-8);
    }

    #[test]
    fn orthonormal_and_continuous() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (ints, mos) = n2(1.2);
        let mut prev_min = 0.0;
        for delta in [1e-3, 1e-4, 1e-5] {
            let gd = g.displace(1, 2, delta).unwrap();
            let (id, md) = rhf_for_geometry(&gd).unwrap();
            let res = align_orbitals(
                &mos,
                &ints.overlap,
                &md,
                &id.overlap,
                &AlignOptions::default(),
            )
            .unwrap();
            let c = &res.coefficients;
            let ortho = c.transpose() * &id.overlap * c;
            assert!((ortho - DMatrix::identity(10, 10)).amax() < 1e-8);
            let min = res.diagnostics.iter().copied().fold(1.0, f64::min);
            assert!(min >= prev_min - 1e-9);
            prev_min = min;
            for b in &res.blocks {
                assert!((b.rotation.determinant() - 1.0).abs() < 1e-10);
            }
        }
        assert!(prev_min > 1.0 - 1e-8);
    }

    #[test]
    fn degenerate_pi_pair_beats_signed_permutations() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (ints, mos) = n2(1.2);
        let gd = g.displace(1, 2, 1e-6).unwrap();
        let (id, md) = rhf_for_geometry(&gd).unwrap();
        // scramble the target π pair by a generic rotation
        let groups = degeneracy_groups(mos.energies.as_slice(), 1e-6);
        let pair = groups
            .iter()
            .find(|g| g.len() == 2)
            .expect("π pair")
            .clone();
        let mut tgt = md.clone();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        for mu in 0..10 {
            let a = md.coefficients[(mu, pair[0])];
            let b = md.coefficients[(mu, pair[1])];
            tgt.coefficients[(mu, pair[0])] = c * a - s * b;
            tgt.coefficients[(mu, pair[1])] = s * a + c * b;
        }
        let res = align_orbitals(
            &mos,
            &ints.overlap,
            &tgt,
            &id.overlap,
            &AlignOptions::default(),
        )
        .unwrap();
        let sr = sqrt_sym(&ints.overlap, 1e-10) * &mos.coefficients;
        let st = sqrt_sym(&id.overlap, 1e-10) * &tgt.coefficients;
        let ov = |i: usize, col: &nalgebra::DVectorView<f64>| sr.column(i).dot(col);
        let aligned_sum = res.diagnostics[pair[0]] + res.diagnostics[pair[1]];
        for perm in [[0usize, 1], [1, 0]] {
            for signs in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
                let mut total = 0.0;
                for a in 0..2 {
                    let col = st.column(pair[perm[a]]);
                    total += signs[a] * ov(pair[a], &col);
                }
                assert!(aligned_sum >= total - 1e-12);
            }
        }
        assert!(aligned_sum > 2.0 - 1e-8);
    }

    #[test]
    fn straddling_group_warns() {
        let (ints, mos) = n2(1.2);
        let mut e = mos.clone();
        e.energies[e.n_occ] = e.energies[e.n_occ - 1];
        let res = align_orbitals(
            &mos,
            &ints.overlap,
            &e,
            &ints.overlap,
            &AlignOptions::default(),
        )
        .unwrap();
        assert!(res.warnings.iter().any(|w| w.contains("straddles")));
    }

    #[test]
    fn grouping_is_chained() {
        let g = degeneracy_groups(&[0.0, 0.6e-6, 1.2e-6, 1.0], 1e-6);
        assert_eq!(g, vec![vec![0, 1, 2], vec![3]]);
        let _ = run_rhf;
        let _ = ScfOptions::default();
    }

    fn random_orthogonal(vals: &[f64], k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(k, k, &vals[..k * k]).qr().q()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn block_rotation_is_optimal(
            k in 1usize..5,
            ovals in proptest::collection::vec(-1.0f64..1.0, 16),
            qs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 16), 16),
        ) {
            let o = DMatrix::from_column_slice(k, k, &ovals[..k * k]);
            let (r, flip, _) = block_rotation(&o);
            let mut p = DMatrix::<f64>::identity(k, k);
            if flip { p[(k - 1, k - 1)] = -1.0; }
            let m = &p * r.transpose();
            let best = (&o * &m).trace();
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            for q in &qs {
                let q = random_orthogonal(q, k);
                prop_assert!(best >= (q.transpose() * &o).trace() - 1e-10);
                prop_assert!(best >= (&o * &q).trace() - 1e-10);
            }
        }
    }
}
