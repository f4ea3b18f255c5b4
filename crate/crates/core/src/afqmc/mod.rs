//! Phaseless auxiliary-field QMC: walker propagation with force bias and
//! mean-field subtraction, hybrid weights and mixed-estimator energies.

pub mod stats;
mod vce;
mod wick;

pub use vce::{vce_overlap, VceOverlap, CORE_SINGULAR_FLOOR};
pub use wick::{evaluate, local_energy, overlap, EmbeddedTrial, TrialEvaluation, OVERLAP_FLOOR};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{ActiveSpacePartition, CholeskyFactorization, MoHamiltonian};
use crate::linalg::{cdet, cqr, expm, expm_apply, to_complex, CMatrix};
use crate::rng::{NormalStream, Stream};
use crate::trial::{OverlapEstimator, TrialState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Protocol {
    pub n_walkers: usize,
    pub n_blocks: usize,
    pub steps_per_block: usize,
    /// Imaginary-time step in 1/Ha.
    pub dt: f64,
    /// Fraction of leading blocks discarded before statistics.
    pub equilibration: f64,
    pub weight_cap: f64,
    pub reortho_interval: usize,
    /// Taylor order of the two-body exponential.
    pub expansion_order: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            n_walkers: 256,
            n_blocks: 80,
            steps_per_block: 10,
            dt: 0.02,
            equilibration: 0.2,
            weight_cap: 100.0,
            reortho_interval: 5,
            expansion_order: 6,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_walkers == 0 || self.n_blocks == 0 || self.steps_per_block == 0 {
            return Err(Error::Invalid(
                "walker, block and step counts must be positive".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Invalid("time step must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.equilibration) {
            return Err(Error::Invalid(
                "equilibration fraction must lie in [0, 1)".into(),
            ));
        }
        if self.reortho_interval == 0 || !(self.weight_cap > 0.0) {
            return Err(Error::Invalid(
                "reorthonormalization interval and weight cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_equilibration(&self) -> usize {
        (self.equilibration * self.n_blocks as f64).floor() as usize
    }
}

/// Full-space Hamiltonian in the trial's orbital basis, the embedded trial
/// and the initial determinant.
#[derive(Debug, Clone)]
pub struct AfqmcSystem {
    pub ham: MoHamiltonian,
    pub trial: EmbeddedTrial,
    /// Occupied orbitals of the initial walker (n_orb × n_alpha); closed shell.
    pub initial: DMatrix<f64>,
    /// Full-space orbital rotation applied to the MO Hamiltonian.
    pub rotation: DMatrix<f64>,
}

impl AfqmcSystem {
    /// Embeds an active-space trial and rotates the MO Hamiltonian by the
    /// trial's orbital rotation. The initial walker is the RHF determinant.
    pub fn new(
        ham_mo: &MoHamiltonian,
        part: &ActiveSpacePartition,
        trial: &TrialState,
    ) -> Result<Self> {
        let n = ham_mo.n_orb;
        if part.core.len() + part.active.len() + part.virtual_.len() != n {
            return Err(Error::Dimension(
                "partition does not cover the Hamiltonian".into(),
            ));
        }
        if trial.n_alpha != trial.n_beta {
            return Err(Error::Invalid(
                "only closed-shell trials are supported".into(),
            ));
        }
        let u = trial.rotation();
        let mut rotation = DMatrix::identity(n, n);
        for (i, &p) in part.active.iter().enumerate() {
            for (j, &q) in part.active.iter().enumerate() {
                rotation[(p, q)] = u[(i, j)];
            }
        }
        let ham = if trial.kappa.iter().any(|k| k.2 != 0.0) {
            ham_mo.rotated(&rotation)
        } else {
            ham_mo.clone()
        };
        let embedded = EmbeddedTrial::embed(trial, part)?;
        let n_occ = embedded.n_alpha;
        let initial = DMatrix::from_fn(n, n_occ, |i, k| rotation[(k, i)]);
        Ok(AfqmcSystem {
            ham,
            trial: embedded,
            initial,
            rotation,
        })
    }

    pub fn active_trial(&self) -> &TrialState {
        &self.trial.active.as_ref().expect("embedded trial").0
    }
}

/// Quantities shared by all walkers for one Hamiltonian and time step.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub dt: f64,
    /// Column γ holds L_γ flattened column-major (n² × n_γ).
    pub vectors: DMatrix<f64>,
    /// ⟨v_γ⟩ at the initial walker, subtracted from every field.
    pub mf_shift: Vec<f64>,
    /// exp(−Δτ h''/2) with h'' = h − ½Σ L L + Σ v̄ L.
    pub half_step: CMatrix,
    /// Offset turning the energy shift into the reference of the hybrid weight.
    pub e_offset: f64,
}

impl Propagator {
    pub fn new(
        ham: &MoHamiltonian,
        chol: &CholeskyFactorization,
        green: &[CMatrix; 2],
        dt: f64,
    ) -> Result<Self> {
        if chol.n_orb != ham.n_orb {
            return Err(Error::Dimension(
                "Cholesky vectors do not match the Hamiltonian".into(),
            ));
        }
        let gsum = &green[0] + &green[1];
        let mf_shift: Vec<f64> = chol
            .vectors
            .iter()
            .map(|l| trace_product(l, &gsum).re)
            .collect();
        let mut h = ham.h1.clone();
        for (l, &v) in chol.vectors.iter().zip(&mf_shift) {
            h -= 0.5 * l * l;
            h += v * l;
        }
        let half_step = to_complex(&expm(&(h * (-0.5 * dt))));
        let e_offset = -ham.constant() + 0.5 * mf_shift.iter().map(|v| v * v).sum::<f64>();
        let n2 = ham.n_orb * ham.n_orb;
        let vectors = DMatrix::from_fn(n2, chol.vectors.len(), |k, g| chol.vectors[g][k]);
        Ok(Propagator {
            dt,
            vectors,
            mf_shift,
            half_step,
            e_offset,
        })
    }
}

/// Σ_pq L_pq G_pq
fn trace_product(l: &DMatrix<f64>, g: &CMatrix) -> Complex64 {
    l.iter().zip(g.iter()).map(|(a, b)| b * *a).sum()
}

#[derive(Debug, Clone)]
pub struct Walker {
    pub index: u64,
    /// One matrix when both spins share orbitals, otherwise [α, β].
    pub phi: Vec<CMatrix>,
    pub weight: f64,
    pub overlap: Complex64,
    pub green: [CMatrix; 2],
    /// Set when the walker hit a node or a singular core block.
    pub flagged: bool,
}

impl Walker {
    pub fn alpha(&self) -> &CMatrix {
        &self.phi[0]
    }

    pub fn beta(&self) -> &CMatrix {
        self.phi.last().expect("walker orbitals")
    }

    pub fn restricted(&self) -> bool {
        self.phi.len() == 1
    }
}

/// Everything the step kernel needs, borrowed.
struct Context<'a> {
    system: &'a AfqmcSystem,
    prop: &'a Propagator,
    protocol: &'a Protocol,
    rng: NormalStream,
    estimator: &'a OverlapEstimator,
    e_ref: f64,
}

impl Context<'_> {
    fn walker_overlap(&self, eval: &TrialEvaluation, w: &Walker, sample: u64) -> (Complex64, bool) {
        match self.estimator {
            OverlapEstimator::Exact => (eval.overlap, false),
            est => {
                let (trial, part) = self.system.trial.active.as_ref().expect("embedded trial");
                let v = vce_overlap(trial, part, w.alpha(), w.beta(), est, w.index, sample);
                (v.value, v.singular)
            }
        }
    }

    fn step(&self, w: &mut Walker, step: u64) {
        if w.weight == 0.0 {
            return;
        }
        let prop = self.prop;
        let sqrt_dt = prop.dt.sqrt();
        let n = self.system.ham.n_orb;
        let nchol = prop.vectors.ncols();
        let gsum = &w.green[0] + &w.green[1];
        let g_re = DVector::from_iterator(n * n, gsum.iter().map(|z| z.re));
        let g_im = DVector::from_iterator(n * n, gsum.iter().map(|z| z.im));
        let vb_re = prop.vectors.tr_mul(&g_re);
        let vb_im = prop.vectors.tr_mul(&g_im);
        let mut x = vec![0.0; nchol];
        self.rng.fill(w.index, step, &mut x);
        let mut cfb = Complex64::new(0.0, 0.0);
        let mut cmf = Complex64::new(0.0, 0.0);
        // field coefficients c_γ = i√Δτ (x_γ − x̄_γ)
        let mut c_re = DVector::zeros(nchol);
        let mut c_im = DVector::zeros(nchol);
        for g in 0..nchol {
            let vbias = Complex64::new(vb_re[g], vb_im[g]);
            let mut xbar = -I * sqrt_dt * (vbias - prop.mf_shift[g]);
            if xbar.norm() > 1.0 {
                xbar /= xbar.norm();
            }
            let shifted = x[g] - xbar;
            cfb += x[g] * xbar - 0.5 * xbar * xbar;
            cmf += -I * sqrt_dt * shifted * prop.mf_shift[g];
            let c = I * sqrt_dt * shifted;
            c_re[g] = c.re;
            c_im[g] = c.im;
        }
        let a_re = &prop.vectors * c_re;
        let a_im = &prop.vectors * c_im;
        let a = CMatrix::from_iterator(
            n,
            n,
            a_re.iter()
                .zip(a_im.iter())
                .map(|(&r, &i)| Complex64::new(r, i)),
        );
        for phi in w.phi.iter_mut() {
            let half = &prop.half_step * &*phi;
            *phi = &prop.half_step * expm_apply(&a, &half, self.protocol.expansion_order);
        }
        let eval = evaluate(&self.system.trial, w.alpha(), w.beta(), w.restricted());
        let (new_overlap, singular) = self.walker_overlap(&eval, w, step);
        if singular || new_overlap.norm() < OVERLAP_FLOOR || eval.overlap.norm() < OVERLAP_FLOOR {
            w.weight = 0.0;
            w.flagged = true;
            return;
        }
        let ln_ratio = (new_overlap / w.overlap).ln();
        let ln_i = ln_ratio + cfb + cmf;
        let bound = 2.0 / sqrt_dt;
        let e_hyb = (-ln_i.re / prop.dt).clamp(self.e_ref - bound, self.e_ref + bound);
        let magnitude = (-prop.dt * (e_hyb - self.e_ref)).exp();
        let dtheta = (ln_ratio + cmf).im;
        w.weight = (w.weight * magnitude * dtheta.cos().max(0.0)).min(self.protocol.weight_cap);
        w.overlap = new_overlap;
        w.green = eval.green;
        if step % self.protocol.reortho_interval as u64 == 0 {
            let mut scale = Complex64::new(1.0, 0.0);
            for phi in w.phi.iter_mut() {
                let (q, r) = cqr(phi);
                scale *= cdet(&r);
                *phi = q;
            }
            if w.restricted() {
                scale *= scale;
            }
            w.overlap /= scale;
        }
    }
}

#[cfg(feature = "parallel")]
fn for_each_walker(walkers: &mut [Walker], f: impl Fn(&mut Walker) + Sync + Send) {
    use rayon::prelude::*;
    walkers.par_iter_mut().for_each(f);
}

#[cfg(not(feature = "parallel"))]
fn for_each_walker(walkers: &mut [Walker], f: impl Fn(&mut Walker)) {
    walkers.iter_mut().for_each(f);
}

#[cfg(feature = "parallel")]
fn map_walkers<R: Send>(walkers: &[Walker], f: impl Fn(&Walker) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    walkers.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_walkers<R>(walkers: &[Walker], f: impl Fn(&Walker) -> R) -> Vec<R> {
    walkers.iter().map(f).collect()
}

/// Block energies of one projection run and their statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub block_energies: Vec<f64>,
    pub block_weights: Vec<f64>,
    pub steps_per_block: usize,
    pub dt: f64,
    pub n_equilibration: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Energy shift fixed from the initial walker.
    pub e_shift: f64,
    pub flagged_walkers: usize,
}

impl EnergySeries {
    pub fn production(&self) -> &[f64] {
        &self.block_energies[self.n_equilibration..]
    }

    /// Columns: block, energy, cumulative mean, stderr (post-equilibration).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,energy,cumulative_mean,stderr\n");
        for (b, e) in self.block_energies.iter().enumerate() {
            if b < self.n_equilibration {
                out.push_str(&format!("{b},{e:.12},,\n"));
            } else {
                let prod = &self.block_energies[self.n_equilibration..=b];
                out.push_str(&format!(
                    "{b},{e:.12},{:.12},{:.3e}\n",
                    stats::mean(prod),
                    stats::blocking_error(prod)
                ));
            }
        }
        out
    }
}

/// Projects the ground state from the RHF determinant and returns block
/// energies. The run is a pure function of its inputs and `seed`.
pub fn run_projection(
    system: &AfqmcSystem,
    chol: &CholeskyFactorization,
    protocol: &Protocol,
    seed: u64,
    estimator: &OverlapEstimator,
) -> Result<EnergySeries> {
    protocol.validate()?;
    let n_equil = protocol.n_equilibration();
    if protocol.n_blocks - n_equil < 2 {
        return Err(Error::TooFewBlocks {
            needed: 2,
            got: protocol.n_blocks - n_equil,
        });
    }
    let phi0 = to_complex(&system.initial);
    let eval0 = evaluate(&system.trial, &phi0, &phi0, true);
    if eval0.overlap.norm() < OVERLAP_FLOOR {
        return Err(Error::ZeroOverlap);
    }
    let prop = Propagator::new(&system.ham, chol, &eval0.green, protocol.dt)?;
    let e_shift = local_energy(&system.trial, &system.ham, &phi0, &phi0, true)?.re;
    let mut walkers: Vec<Walker> = (0..protocol.n_walkers as u64)
        .map(|index| Walker {
            index,
            phi: vec![phi0.clone()],
            weight: 1.0,
            overlap: eval0.overlap,
            green: eval0.green.clone(),
            flagged: false,
        })
        .collect();
    let ctx = Context {
        system,
        prop: &prop,
        protocol,
        rng: NormalStream::new(seed, Stream::AuxField),
        estimator,
        e_ref: e_shift + prop.e_offset,
    };
    // the initial overlap seen by the estimator
    for w in walkers.iter_mut() {
        let (ov, _) = ctx.walker_overlap(&eval0, w, 0);
        w.overlap = ov;
    }
    let mut block_energies = Vec::with_capacity(protocol.n_blocks);
    let mut block_weights = Vec::with_capacity(protocol.n_blocks);
    for block in 0..protocol.n_blocks {
        for s in 0..protocol.steps_per_block {
            let step = (block * protocol.steps_per_block + s + 1) as u64;
            for_each_walker(&mut walkers, |w| ctx.step(w, step));
        }
        let measured = map_walkers(&walkers, |w| {
            if w.weight == 0.0 {
                return (0.0, 0.0);
            }
            match local_energy(
                &system.trial,
                &system.ham,
                w.alpha(),
                w.beta(),
                w.restricted(),
            ) {
                Ok(e) => (w.weight, w.weight * e.re),
                Err(_) => (0.0, 0.0),
            }
        });
        let total: f64 = measured.iter().map(|m| m.0).sum();
        let weighted: f64 = measured.iter().map(|m| m.1).sum();
        if total < 1e-6 * protocol.n_walkers as f64 {
            return Err(Error::WeightCollapse {
                total,
                n_walkers: protocol.n_walkers,
                step: (block + 1) * protocol.steps_per_block,
            });
        }
        // a common rescale keeps the weight cap relative to the population mean
        let scale = protocol.n_walkers as f64 / total;
        for w in walkers.iter_mut() {
            w.weight *= scale;
        }
        block_energies.push(weighted / total);
        block_weights.push(total);
        log::debug!("block {block}: E = {:.8}, W = {total:.3}", weighted / total);
    }
    let prod = &block_energies[n_equil..];
    Ok(EnergySeries {
        mean: stats::mean(prod),
        stderr: stats::blocking_error(prod),
        block_energies: block_energies.clone(),
        block_weights,
        steps_per_block: protocol.steps_per_block,
        dt: protocol.dt,
        n_equilibration: n_equil,
        e_shift,
        flagged_walkers: walkers.iter().filter(|w| w.flagged).count(),
    })
}
