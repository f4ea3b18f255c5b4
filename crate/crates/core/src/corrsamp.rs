//! Correlated-sampling forces: synchronized AFQMC runs at R ± δ that share
//! the Cholesky pivots, the orbital anchor, the trial, the random seed and
//! the overlap-estimator ensemble.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::afqmc::{run_projection, stats, AfqmcSystem, EnergySeries, Protocol};
use crate::alignment::{align_orbitals, AlignOptions};
use crate::chem::Geometry;
use crate::error::{Error, Result};
use crate::fci::{fci_for_geometry, reference_force, FciOptions};
use crate::hamiltonian::{
    build_embedding, cholesky_reference, cholesky_replay, transform_with, PivotArtifact,
};
use crate::pipeline::{prepare_reference, ActiveSpaceSpec, Reference, ReferenceOptions};
use crate::scf::{rhf_from_density, rhf_with_guess, ScfGuess};
use crate::trial::{vqe_optimize, OverlapEstimator, TrialKind, TrialState, VqeOptions};

/// Re-anchoring attempts before a replay failure is reported.
const MAX_REANCHORS: usize = 2;

/// A Cartesian displacement of one atom, in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Displacement {
    pub atom: usize,
    /// 0, 1, 2 for x, y, z.
    pub axis: usize,
    pub delta: f64,
}

impl Displacement {
    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Invalid(format!(
                "displacement {} must be positive",
                self.delta
            )));
        }
        if self.axis > 2 {
            return Err(Error::Invalid(format!(
                "axis {} is not one of 0, 1, 2",
                self.axis
            )));
        }
        if self.atom >= geometry.len() {
            return Err(Error::Invalid(format!(
                "atom {} out of range for {} atoms",
                self.atom,
                geometry.len()
            )));
        }
        Ok(())
    }
}

/// Everything both legs of a force evaluation share.
#[derive(Debug, Clone)]
pub struct CorrelatedRunPlan {
    pub reference: Reference,
    pub displacement: Displacement,
    pub protocol: Protocol,
    pub seed: u64,
    pub estimator: OverlapEstimator,
    pub align: AlignOptions,
    /// Turn alignment warnings into errors.
    pub strict_alignment: bool,
    pub pivots: PivotArtifact,
}

pub fn plan_correlated_run(
    reference: Reference,
    displacement: Displacement,
    protocol: Protocol,
    seed: u64,
    estimator: OverlapEstimator,
) -> Result<CorrelatedRunPlan> {
    displacement.validate(&reference.geometry)?;
    protocol.validate()?;
    let pivots = reference.cholesky.artifact();
    Ok(CorrelatedRunPlan {
        reference,
        displacement,
        protocol,
        seed,
        estimator,
        align: AlignOptions::default(),
        strict_alignment: false,
        pivots,
    })
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl CorrelatedRunPlan {
    pub fn pivot_hash(&self) -> String {
        sha256_hex(&self.pivots.to_json())
    }

    pub fn trial_hash(&self) -> String {
        sha256_hex(&self.reference.trial.to_json())
    }
}

/// One displaced run.
#[derive(Debug, Clone, Serialize)]
pub struct LegResult {
    pub delta: f64,
    pub series: EnergySeries,
    pub n_cholesky: usize,
    pub alignment_warnings: Vec<String>,
    /// Smallest ⟨ref_i|aligned_i⟩ over all orbitals.
    pub min_alignment_overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationDiagnostics {
    pub n_blocks: usize,
    pub rho: f64,
    /// From the paired block differences.
    pub sigma: f64,
    /// What two independent runs would give.
    pub sigma_uncorrelated: f64,
    /// √(σ₊² + σ₋² − 2ρσ₊σ₋)/(2δ), reported for consistency.
    pub sigma_formula: f64,
    /// `sigma` and `sigma_formula` differ by more than a factor of 3.
    pub formula_mismatch: bool,
    pub reduction_factor: f64,
}

/// Correlation statistics of paired post-equilibration block energies.
pub fn correlation_diagnostics(
    plus: &[f64],
    minus: &[f64],
    delta: f64,
) -> Result<CorrelationDiagnostics> {
    if plus.len() != minus.len() {
        return Err(Error::Dimension(format!(
            "{} and {} blocks cannot be paired",
            plus.len(),
            minus.len()
        )));
    }
    if plus.len() < 4 {
        return Err(Error::TooFewBlocks {
            needed: 4,
            got: plus.len(),
        });
    }
    let scale = 1.0 / (2.0 * delta);
    let diff: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a - b).collect();
    let sp = stats::blocking_error(plus);
    let sm = stats::blocking_error(minus);
    let rho = stats::correlation(plus, minus);
    let sigma = stats::blocking_error(&diff) * scale;
    let sigma_uncorrelated = (sp * sp + sm * sm).sqrt() * scale;
    let sigma_formula = (sp * sp + sm * sm - 2.0 * rho * sp * sm).max(0.0).sqrt() * scale;
    let (hi, lo) = if sigma > sigma_formula {
        (sigma, sigma_formula)
    } else {
        (sigma_formula, sigma)
    };
    let formula_mismatch = hi > 3.0 * lo && hi > 1e-12 * scale;
    let reduction_factor = if sigma > 0.0 {
        sigma_uncorrelated / sigma
    } else {
        f64::INFINITY
    };
    Ok(CorrelationDiagnostics {
        n_blocks: plus.len(),
        rho,
        sigma,
        sigma_uncorrelated,
        sigma_formula,
        formula_mismatch,
        reduction_factor,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ForceEstimate {
    /// Ha/Å.
    pub value: f64,
    pub sigma: f64,
    pub rho: f64,
    pub sigma_uncorrelated: f64,
    pub diagnostics: CorrelationDiagnostics,
    pub plus: LegResult,
    pub minus: LegResult,
    /// Midpoint energy from the paired block averages.
    pub energy: f64,
    pub energy_err: f64,
    pub seeds: [u64; 2],
    pub pivot_hash: String,
    pub trial_hash: String,
    pub reanchors: usize,
}

fn run_leg(
    plan: &CorrelatedRunPlan,
    pivots: &PivotArtifact,
    sign: f64,
    seed: u64,
) -> Result<LegResult> {
    let r = &plan.reference;
    let d = plan.displacement;
    let geom = r.geometry.displace(d.atom, d.axis, sign * d.delta)?;
    let (ints, mos) = rhf_from_density(&geom, &r.mos.density())?;
    let aligned = align_orbitals(
        &r.mos,
        &r.integrals.overlap,
        &mos,
        &ints.overlap,
        &plan.align,
    )?;
    if plan.strict_alignment && !aligned.warnings.is_empty() {
        return Err(Error::Numerical(format!(
            "alignment: {}",
            aligned.warnings.join("; ")
        )));
    }
    let ham = transform_with(&ints, &aligned.coefficients)?;
    // an FCI trial has no parameters to freeze; it is the exact state of each leg
    let trial: TrialState = if r.trial.kind == TrialKind::Fci {
        let (active, _) = build_embedding(&ham, &r.partition)?;
        let vqe = VqeOptions {
            eps_det: r.trial.eps_det,
            ..Default::default()
        };
        vqe_optimize(
            TrialKind::Fci,
            &active,
            r.partition.n_active_electrons,
            &vqe,
        )?
    } else {
        r.trial.clone()
    };
    let system = AfqmcSystem::new(&ham, &r.partition, &trial)?;
    let chol = cholesky_replay(&system.ham, pivots)?;
    let series = run_projection(&system, &chol, &plan.protocol, seed, &plan.estimator)?;
    Ok(LegResult {
        delta: sign * d.delta,
        series,
        n_cholesky: chol.len(),
        alignment_warnings: aligned.warnings,
        min_alignment_overlap: aligned
            .diagnostics
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
    })
}

fn run_pair(
    plan: &CorrelatedRunPlan,
    pivots: &PivotArtifact,
    seeds: [u64; 2],
) -> (Result<LegResult>, Result<LegResult>) {
    #[cfg(feature = "parallel")]
    {
        rayon::join(
            || run_leg(plan, pivots, 1.0, seeds[0]),
            || run_leg(plan, pivots, -1.0, seeds[1]),
        )
    }
    #[cfg(not(feature = "parallel"))]
    {
        (
            run_leg(plan, pivots, 1.0, seeds[0]),
            run_leg(plan, pivots, -1.0, seeds[1]),
        )
    }
}

/// Correlated force with the plan's seed on both legs.
pub fn execute_force(plan: &CorrelatedRunPlan) -> Result<ForceEstimate> {
    execute_force_with_seeds(plan, [plan.seed, plan.seed])
}

/// Control run: the −δ leg uses an unrelated seed.
pub fn execute_force_uncorrelated(plan: &CorrelatedRunPlan) -> Result<ForceEstimate> {
    execute_force_with_seeds(plan, [plan.seed, plan.seed ^ 0x9e37_79b9_7f4a_7c15])
}

pub fn execute_force_with_seeds(
    plan: &CorrelatedRunPlan,
    seeds: [u64; 2],
) -> Result<ForceEstimate> {
    let mut pivots = plan.pivots.clone();
    let mut reanchors = 0;
    let (plus, minus) = loop {
        match run_pair(plan, &pivots, seeds) {
            (Ok(p), Ok(m)) => break (p, m),
            (Err(Error::ReplayInvalid(msg)), _) | (_, Err(Error::ReplayInvalid(msg))) => {
                if reanchors == MAX_REANCHORS {
                    return Err(Error::ReplayInvalid(msg));
                }
                log::warn!("pivot replay failed ({msg}); re-anchoring on the displaced geometry");
                pivots = reanchor(plan)?;
                reanchors += 1;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    };
    let delta = plan.displacement.delta;
    let diagnostics =
        correlation_diagnostics(plus.series.production(), minus.series.production(), delta)?;
    let value = -(plus.series.mean - minus.series.mean) / (2.0 * delta);
    let midpoint: Vec<f64> = plus
        .series
        .production()
        .iter()
        .zip(minus.series.production())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Ok(ForceEstimate {
        value,
        sigma: diagnostics.sigma,
        rho: diagnostics.rho,
        sigma_uncorrelated: diagnostics.sigma_uncorrelated,
        energy: stats::mean(&midpoint),
        energy_err: stats::blocking_error(&midpoint),
        diagnostics,
        plus,
        minus,
        seeds,
        pivot_hash: sha256_hex(&pivots.to_json()),
        trial_hash: plan.trial_hash(),
        reanchors,
    })
}

/// Fresh pivots from the +δ geometry, which both legs then replay.
fn reanchor(plan: &CorrelatedRunPlan) -> Result<PivotArtifact> {
    let r = &plan.reference;
    let d = plan.displacement;
    let geom = r.geometry.displace(d.atom, d.axis, d.delta)?;
    let (ints, mos) = rhf_from_density(&geom, &r.mos.density())?;
    let aligned = align_orbitals(
        &r.mos,
        &r.integrals.overlap,
        &mos,
        &ints.overlap,
        &plan.align,
    )?;
    let ham = transform_with(&ints, &aligned.coefficients)?;
    let system = AfqmcSystem::new(&ham, &r.partition, &r.trial)?;
    Ok(cholesky_reference(&system.ham, plan.pivots.threshold)?.artifact())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rhf,
    Fci,
    /// Phaseless AFQMC with a single-determinant trial.
    #[serde(rename = "afqmc", alias = "ph-afqmc")]
    PhAfqmc,
    QcAfqmc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rhf => "rhf",
            Method::Fci => "fci",
            Method::PhAfqmc => "ph-afqmc",
            Method::QcAfqmc => "qc-afqmc",
        }
    }
}

/// Settings shared by every row of a force scan.
#[derive(Debug, Clone)]
pub struct ScanTemplate {
    pub methods: Vec<Method>,
    pub active_space: ActiveSpaceSpec,
    pub trial: TrialKind,
    pub reference: ReferenceOptions,
    pub protocol: Protocol,
    pub seed: u64,
    pub estimator: OverlapEstimator,
    pub displacement: Displacement,
    pub fci: FciOptions,
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub id: String,
    pub bond_length: f64,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRow {
    pub geometry_id: String,
    #[serde(rename = "bond_length_A")]
    pub bond_length: f64,
    pub method: String,
    #[serde(rename = "energy_Ha")]
    pub energy: Option<f64>,
    pub energy_err: Option<f64>,
    #[serde(rename = "force_HaA")]
    pub force: Option<f64>,
    pub force_err: Option<f64>,
    pub rho: Option<f64>,
    pub n_walkers: Option<usize>,
    pub n_blocks: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "delta_A")]
    pub delta: f64,
    pub seed: Option<u64>,
    /// Force minus the FCI force at the same geometry.
    pub force_vs_fci: Option<f64>,
    pub pivot_hash: Option<String>,
    pub trial_hash: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceTable {
    pub rows: Vec<ForceRow>,
}

pub const FORCE_TABLE_HEADER: &str =
    "geometry_id,bond_length_A,method,energy_Ha,energy_err,force_HaA,force_err,rho,n_walkers,n_blocks,dt,delta_A,seed";

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl ForceTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{FORCE_TABLE_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.geometry_id,
                r.bond_length,
                r.method,
                cell(&r.energy),
                cell(&r.energy_err),
                cell(&r.force),
                cell(&r.force_err),
                cell(&r.rho),
                cell(&r.n_walkers),
                cell(&r.n_blocks),
                cell(&r.dt),
                r.delta,
                cell(&r.seed),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

fn empty_row(point: &ScanPoint, method: Method, delta: f64) -> ForceRow {
    ForceRow {
        geometry_id: point.id.clone(),
        bond_length: point.bond_length,
        method: method.label().into(),
        energy: None,
        energy_err: None,
        force: None,
        force_err: None,
        rho: None,
        n_walkers: None,
        n_blocks: None,
        dt: None,
        delta,
        seed: None,
        force_vs_fci: None,
        pivot_hash: None,
        trial_hash: None,
        error: None,
    }
}

/// RHF energy and central-difference force, following the reference state.
pub fn rhf_force(geometry: &Geometry, d: Displacement, guess: ScfGuess) -> Result<(f64, f64)> {
    d.validate(geometry)?;
    let (_, mos) = rhf_with_guess(geometry, guess)?;
    let density = mos.density();
    let plus = rhf_from_density(&geometry.displace(d.atom, d.axis, d.delta)?, &density)?
        .1
        .e_total;
    let minus = rhf_from_density(&geometry.displace(d.atom, d.axis, -d.delta)?, &density)?
        .1
        .e_total;
    Ok((mos.e_total, -(plus - minus) / (2.0 * d.delta)))
}

fn fill_row(point: &ScanPoint, method: Method, t: &ScanTemplate, row: &mut ForceRow) -> Result<()> {
    let d = t.displacement;
    match method {
        Method::Rhf => {
            let (e, f) = rhf_force(&point.geometry, d, t.reference.scf_guess)?;
            row.energy = Some(e);
            row.force = Some(f);
        }
        Method::Fci => {
            d.validate(&point.geometry)?;
            row.energy = Some(fci_for_geometry(&point.geometry, &t.fci)?.1.e0);
            row.force = Some(reference_force(
                &point.geometry,
                d.atom,
                d.axis,
                d.delta,
                &t.fci,
            )?);
        }
        Method::PhAfqmc | Method::QcAfqmc => {
            let kind = if method == Method::PhAfqmc {
                TrialKind::SingleDeterminant
            } else {
                t.trial
            };
            let reference =
                prepare_reference(&point.geometry, &t.active_space, kind, &t.reference)?;
            let plan = plan_correlated_run(reference, d, t.protocol, t.seed, t.estimator)?;
            let f = execute_force(&plan)?;
            row.energy = Some(f.energy);
            row.energy_err = Some(f.energy_err);
            row.force = Some(f.value);
            row.force_err = Some(f.sigma);
            row.rho = Some(f.rho);
            row.n_walkers = Some(t.protocol.n_walkers);
            row.n_blocks = Some(t.protocol.n_blocks);
            row.dt = Some(t.protocol.dt);
            row.seed = Some(t.seed);
            row.pivot_hash = Some(f.pivot_hash);
            row.trial_hash = Some(f.trial_hash);
        }
    }
    Ok(())
}

/// One row per (geometry, method). Failures are recorded in the row and the
/// scan continues.
pub fn scan_forces(points: &[ScanPoint], template: &ScanTemplate) -> ForceTable {
    let mut rows = Vec::new();
    for point in points {
        let start = rows.len();
        for &method in &template.methods {
            let mut row = empty_row(point, method, template.displacement.delta);
            if let Err(e) = fill_row(point, method, template, &mut row) {
                log::warn!("{} {}: {e}", point.id, method.label());
                row.error = Some(e.to_string());
            }
            rows.push(row);
        }
        let fci = rows[start..]
            .iter()
            .find(|r| r.method == "fci")
            .and_then(|r| r.force);
        if let Some(reference) = fci {
            for r in rows[start..].iter_mut().filter(|r| r.method != "fci") {
                r.force_vs_fci = r.force.map(|f| f - reference);
            }
        }
    }
    ForceTable { rows }
}
