//! Closed-shell restricted Hartree–Fock with DIIS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chem::{Geometry, IntegralSet};
use crate::error::{Error, Result};
use crate::linalg::{eigh, inv_sqrt};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScfOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest DIIS error element.
    pub tolerance: f64,
    pub diis_size: usize,
    /// Virtual-space level shift in Hartree; `None` disables it.
    pub level_shift: Option<f64>,
    /// Error below which the level shift is switched off.
    pub shift_off_below: f64,
    /// Optional AO density used instead of the core-Hamiltonian guess.
    #[serde(skip)]
    pub initial_density: Option<DMatrix<f64>>,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            max_iterations: 200,
            tolerance: 1e-9,
            diis_size: 8,
            level_shift: None,
            shift_off_below: 1e-4,
            initial_density: None,
        }
    }
}

impl ScfOptions {
    /// Defaults, with a 0.2 Ha level shift when any bond exceeds 1.8 Å.
    pub fn for_geometry(geom: &Geometry) -> Self {
        ScfOptions {
            level_shift: (geom.max_bond_angstrom() > 1.8).then_some(0.2),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoSet {
    /// AO -> MO coefficients, one orbital per column.
    pub coefficients: DMatrix<f64>,
    /// Orbital energies, ascending.
    pub energies: DVector<f64>,
    pub n_occ: usize,
    pub e_total: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl MoSet {
    pub fn nmo(&self) -> usize {
        self.coefficients.ncols()
    }

    /// P = 2 C_occ C_occᵀ.
    pub fn density(&self) -> DMatrix<f64> {
        let c = self.coefficients.columns(0, self.n_occ);
        2.0 * &c * c.transpose()
    }
}

/// Two-electron part G(P) of the Fock matrix from a full n^4 tensor.
pub(crate) fn fock_two_electron(full_eri: &[f64], p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut g = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..=mu {
            let mut acc = 0.0;
            for la in 0..n {
                for si in 0..n {
                    let coul = full_eri[((mu * n + nu) * n + la) * n + si];
                    let exch = full_eri[((mu * n + la) * n + nu) * n + si];
                    acc += p[(la, si)] * (coul - 0.5 * exch);
                }
            }
            g[(mu, nu)] = acc;
            g[(nu, mu)] = acc;
        }
    }
    g
}

struct Diis {
    focks: Vec<DMatrix<f64>>,
    errors: Vec<DMatrix<f64>>,
    size: usize,
}

impl Diis {
    fn push(&mut self, f: DMatrix<f64>, e: DMatrix<f64>) {
        if self.focks.len() == self.size {
            self.focks.remove(0);
            self.errors.remove(0);
        }
        self.focks.push(f);
        self.errors.push(e);
    }

    fn extrapolate(&mut self) -> Option<DMatrix<f64>> {
        while self.focks.len() >= 2 {
            let m = self.focks.len();
            let mut b = DMatrix::zeros(m + 1, m + 1);
            for i in 0..m {
                for j in 0..m {
                    b[(i, j)] = self.errors[i].dot(&self.errors[j]);
                }
                b[(i, m)] = -1.0;
                b[(m, i)] = -1.0;
            }
            let mut rhs = DVector::zeros(m + 1);
            rhs[m] = -1.0;
            if let Some(c) = b.lu().solve(&rhs) {
                if c.iter().all(|x| x.is_finite()) {
                    let mut f = DMatrix::zeros(self.focks[0].nrows(), self.focks[0].ncols());
                    for i in 0..m {
                        f += &self.focks[i] * c[i];
                    }
                    return Some(f);
                }
            }
            self.focks.remove(0);
            self.errors.remove(0);
        }
        None
    }
}

/// Orbitals of F in the orthogonalizer X, canonicalized.
fn diagonalize(f: &DMatrix<f64>, x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let fp = x.transpose() * f * x;
    let (eps, cp) = eigh(&fp);
    let mut c = x * cp;
    canonicalize(&eps, &mut c);
    (eps, c)
}

/// Sign-fixes every orbital so its largest coefficient is positive and
/// orders exactly-degenerate blocks lexicographically.
pub fn canonicalize(eps: &DVector<f64>, c: &mut DMatrix<f64>) {
    let n = c.ncols();
    for k in 0..n {
        let col = c.column(k);
        let amax = col.amax();
        let lead = col
            .iter()
            .position(|v| v.abs() >= amax * (1.0 - 1e-8))
            .unwrap_or(0);
        if c[(lead, k)] < 0.0 {
            c.column_mut(k).neg_mut();
        }
    }
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eps[end] - eps[end - 1]).abs() < 1e-8 {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<DVector<f64>> =
                (start..end).map(|k| c.column(k).into_owned()).collect();
            cols.sort_by(|a, b| {
                for (x, y) in a.iter().zip(b.iter()) {
                    if (x - y).abs() > 1e-10 {
                        return y.partial_cmp(x).unwrap();
                    }
                }
                std::cmp::Ordering::Equal
            });
            for (off, col) in cols.into_iter().enumerate() {
                c.set_column(start + off, &col);
            }
        }
        start = end;
    }
}

pub fn run_rhf(ints: &IntegralSet, n_electrons: usize, opts: &ScfOptions) -> Result<MoSet> {
    let n = ints.nbf();
    if n_electrons % 2 != 0 {
        return Err(Error::Invalid(format!(
            "closed-shell RHF needs an even electron count, got {n_electrons}"
        )));
    }
    if n_electrons > 2 * n {
        return Err(Error::Invalid(format!(
            "{n_electrons} electrons do not fit in {n} spatial orbitals"
        )));
    }
    let n_occ = n_electrons / 2;
    let s = &ints.overlap;
    let h = ints.core_hamiltonian();
    let x = inv_sqrt(s, 0.0);
    let full = ints.eri.to_full();

    let density_of = |c: &DMatrix<f64>| {
        let co = c.columns(0, n_occ);
        2.0 * &co * co.transpose()
    };

    let mut p = match &opts.initial_density {
        Some(d) if d.nrows() == n && d.ncols() == n => d.clone(),
        _ => density_of(&diagonalize(&h, &x).1),
    };
    let mut diis = Diis {
        focks: Vec::new(),
        errors: Vec::new(),
        size: opts.diis_size.max(1),
    };
    let mut e_old = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut shift_on = opts.level_shift.is_some();

    for iter in 1..=opts.max_iterations {
        let f = &h + fock_two_electron(&full, &p);
        let e_elec = 0.5 * p.dot(&(&h + &f));
        let err = x.transpose() * (&f * &p * s - s * &p * &f) * &x;
        residual = err.amax();
        let de = (e_elec - e_old).abs();
        e_old = e_elec;
        if residual < opts.tolerance && de < 1e-10 {
            let (eps, c) = diagonalize(&f, &x);
            return Ok(MoSet {
                coefficients: c,
                energies: eps,
                n_occ,
                e_total: e_elec + ints.e_nuc,
                iterations: iter,
                residual,
            });
        }
        if residual < opts.shift_off_below {
            shift_on = false;
        }
        diis.push(f.clone(), err);
        let mut f_use = if shift_on {
            f.clone()
        } else {
            diis.extrapolate().unwrap_or(f)
        };
        if shift_on {
            let shift = opts.level_shift.unwrap_or(0.0);
            f_use += (s - 0.5 * s * &p * s) * shift;
        }
        let (_, c) = diagonalize(&f_use, &x);
        p = density_of(&c);
    }
    Err(Error::ScfNotConverged {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Spherically averaged ground-configuration occupations for STO-3G atoms.
fn atomic_occupations(z: u32, nbf: usize) -> Vec<f64> {
    let mut occ = vec![0.0; nbf];
    let mut left = z as f64;
    for (k, o) in occ.iter_mut().enumerate() {
        if k >= 2 {
            break;
        }
        *o = left.min(2.0);
        left -= *o;
    }
    if nbf == 5 {
        for o in occ.iter_mut().skip(2) {
            *o = left / 3.0;
        }
    }
    occ
}

/// Superposition of fractionally occupied atomic RHF densities.
pub fn atomic_guess(geom: &Geometry) -> Result<DMatrix<f64>> {
    let mut blocks = Vec::new();
    for atom in geom.atoms() {
        let single = Geometry::new(
            &[(atom.symbol.as_str(), atom.position)],
            crate::chem::Units::Bohr,
        )?;
        let basis = crate::chem::BasisSet::sto3g(&single)?;
        let ints = crate::chem::compute_integrals(&single, &basis)?;
        let n = ints.nbf();
        let occ = atomic_occupations(atom.charge, n);
        let h = ints.core_hamiltonian();
        let x = inv_sqrt(&ints.overlap, 0.0);
        let full = ints.eri.to_full();
        let build = |c: &DMatrix<f64>| {
            let mut p = DMatrix::zeros(n, n);
            for (k, &o) in occ.iter().enumerate() {
                if o > 0.0 {
                    p += o * c.column(k) * c.column(k).transpose();
                }
            }
            p
        };
        let (_, cp) = eigh(&(x.transpose() * &h * &x));
        let mut p = build(&(&x * cp));
        for _ in 0..100 {
            let f = &h + fock_two_electron(&full, &p);
            let (_, cp) = eigh(&(x.transpose() * &f * &x));
            let next = build(&(&x * cp));
            let change = (&next - &p).amax();
            p = 0.5 * (next + p);
            if change < 1e-10 {
                break;
            }
        }
        blocks.push(p);
    }
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut p = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        p.view_mut((off, off), (k, k)).copy_from(&b);
        off += k;
    }
    Ok(p)
}

/// STO-3G integrals and RHF for a neutral closed-shell geometry.
///
/// Both the atomic-density and the core-Hamiltonian guesses are converged
/// and the lower-energy solution is returned; either alone can land on an
/// excited self-consistent solution for some geometries.
/// Starting density for [`rhf_with_guess`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScfGuess {
    /// Converge from both guesses and keep the lower energy.
    #[default]
    Lowest,
    Atomic,
    Core,
}

pub fn rhf_for_geometry(geom: &Geometry) -> Result<(IntegralSet, MoSet)> {
    rhf_with_guess(geom, ScfGuess::Lowest)
}

pub fn rhf_with_guess(geom: &Geometry, guess: ScfGuess) -> Result<(IntegralSet, MoSet)> {
    let basis = crate::chem::BasisSet::sto3g(geom)?;
    let ints = crate::chem::compute_integrals(geom, &basis)?;
    let n_elec = geom.total_nuclear_charge() as usize;
    let base = ScfOptions::for_geometry(geom);
    let atomic = || {
        run_rhf(
            &ints,
            n_elec,
            &ScfOptions {
                initial_density: Some(atomic_guess(geom)?),
                ..base.clone()
            },
        )
    };
    let core = || run_rhf(&ints, n_elec, &base);
    let mos = match guess {
        ScfGuess::Atomic => atomic()?,
        ScfGuess::Core => core()?,
        ScfGuess::Lowest => match (atomic(), core()) {
            (Ok(a), Ok(c)) => {
                if c.e_total < a.e_total - 1e-8 {
                    c
                } else {
                    a
                }
            }
            (Ok(a), Err(_)) => a,
            (Err(_), Ok(c)) => c,
            (Err(e), Err(_)) => return Err(e),
        },
    };
    Ok((ints, mos))
}

/// RHF at `geom` started from a supplied AO density, e.g. the converged
/// density of a nearby reference geometry.
pub fn rhf_from_density(geom: &Geometry, density: &DMatrix<f64>) -> Result<(IntegralSet, MoSet)> {
    let basis = crate::chem::BasisSet::sto3g(geom)?;
    let ints = crate::chem::compute_integrals(geom, &basis)?;
    let opts = ScfOptions {
        initial_density: Some(density.clone()),
        ..ScfOptions::for_geometry(geom)
    };
    let mos = run_rhf(&ints, geom.total_nuclear_charge() as usize, &opts)?;
    Ok((ints, mos))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h2_energy_and_orthonormality() {
        let g = Geometry::diatomic("H", 0.7414).unwrap();
        let (ints, mos) = rhf_for_geometry(&g).unwrap();
        // reference RHF/STO-3G energy of H2 at 0.7414 Å
        assert!((mos.e_total - (-1.1167)).abs() < 1e-4, "{}", mos.e_total);
        let c = &mos.coefficients;
        let ortho = c.transpose() * &ints.overlap * c;
        assert!((ortho - DMatrix::identity(2, 2)).amax() < 1e-8);
        assert!(mos.energies[0] <= mos.energies[1]);
    }

    #[test]
    fn n2_reaches_ground_state() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (_, mos) = rhf_for_geometry(&g).unwrap();
        assert!((mos.e_total - (-107.4878)).abs() < 1e-4, "{}", mos.e_total);
        // the π pairs are degenerate
        assert!((mos.energies[5] - mos.energies[6]).abs() < 1e-8);
        assert!((mos.energies[7] - mos.energies[8]).abs() < 1e-8);
    }

    #[test]
    fn h4_chain_energies() {
        for (d, e) in [(1.0, -2.099), (1.5, -1.829), (2.0, -1.576)] {
            let g = Geometry::linear_chain("H", 4, d).unwrap();
            let (_, mos) = rhf_for_geometry(&g).unwrap();
            assert!((mos.e_total - e).abs() < 5e-4, "{d}: {}", mos.e_total);
        }
    }

    #[test]
    fn idempotent_density() {
        let g = Geometry::linear_chain("H", 4, 1.0).unwrap();
        let (ints, mos) = rhf_for_geometry(&g).unwrap();
        let p = mos.density();
        let psp = &p * &ints.overlap * &p;
        assert!((psp - 2.0 * &p).amax() < 1e-7);
    }

    #[test]
    fn rejects_odd_electrons() {
        let g = Geometry::diatomic("H", 0.74).unwrap();
        let (ints, _) = rhf_for_geometry(&g).unwrap();
        assert!(run_rhf(&ints, 3, &ScfOptions::default()).is_err());
        assert!(run_rhf(&ints, 6, &ScfOptions::default()).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let g = Geometry::diatomic("N", 1.2).unwrap();
        let (ints, _) = rhf_for_geometry(&g).unwrap();
        let opts = ScfOptions {
            max_iterations: 2,
            ..Default::default()
        };
        match run_rhf(&ints, 14, &opts) {
            Err(Error::ScfNotConverged {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
