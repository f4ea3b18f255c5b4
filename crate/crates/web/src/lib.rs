//! WebAssembly bindings for the browser demo. Every export takes and
//! returns JSON text so the page needs no generated glue beyond strings.

use qmcf::afqmc::{run_projection, Protocol};
use qmcf::chem::Geometry;
use qmcf::fci::{fci_ground_state, FciOptions};
use qmcf::hamiltonian::transform_to_mo;
use qmcf::pipeline::{entropy_report, prepare_reference, ActiveSpaceSpec};
use qmcf::scf::rhf_for_geometry;
use qmcf::trial::{OverlapEstimator, TrialKind};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Demo systems are capped so one call stays interactive.
const MAX_ORBITALS: usize = 8;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub element: String,
    pub n: usize,
    pub spacing: f64,
}

impl Chain {
    fn geometry(&self) -> Result<Geometry, String> {
        let g = Geometry::linear_chain(&self.element, self.n, self.spacing).map_err(|e| e.to_string())?;
        let n_orb = qmcf::chem::BasisSet::sto3g(&g).map_err(|e| e.to_string())?.functions.len();
        if n_orb > MAX_ORBITALS {
            return Err(format!("{n_orb} orbitals is too many for the demo (max {MAX_ORBITALS})"));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub element: String,
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub r: f64,
    pub rhf: f64,
    pub fci: f64,
}

/// RHF and FCI energies along a symmetric stretch.
pub fn energy_curve(req: &CurveRequest) -> Result<Vec<CurvePoint>, String> {
    if req.points < 2 || req.points > 60 || !(req.r_min > 0.0 && req.r_max > req.r_min) {
        return Err("need 2 to 60 points and 0 < r_min < r_max".into());
    }
    (0..req.points)
        .map(|i| {
            let r = req.r_min + (req.r_max - req.r_min) * i as f64 / (req.points - 1) as f64;
            let g = Chain { element: req.element.clone(), n: req.n, spacing: r }.geometry()?;
            let (ints, mos) = rhf_for_geometry(&g).map_err(|e| e.to_string())?;
            let ham = transform_to_mo(&ints, &mos).map_err(|e| e.to_string())?;
            let fci = fci_ground_state(&ham, mos.n_occ, mos.n_occ, &FciOptions::default()).map_err(|e| e.to_string())?;
            Ok(CurvePoint { r, rhf: mos.e_total, fci: fci.e0 })
        })
        .collect()
}

/// Single-orbital entropies and the orbitals above the selection threshold.
pub fn entropies(chain: &Chain) -> Result<serde_json::Value, String> {
    let g = chain.geometry()?;
    let (ints, mos) = rhf_for_geometry(&g).map_err(|e| e.to_string())?;
    let ham = transform_to_mo(&ints, &mos).map_err(|e| e.to_string())?;
    let report = entropy_report(&ham, 2 * mos.n_occ, qmcf::fci::ENTROPY_THRESHOLD, &FciOptions::default())
        .map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "threshold": report.threshold,
        "selected": report.selected,
        "entropies": report.orbitals.iter().map(|o| o.entropy).collect::<Vec<_>>(),
        "orbital_energies": mos.energies.as_slice(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfqmcRequest {
    #[serde(flatten)]
    pub chain: Chain,
    pub trial: TrialKind,
    pub n_walkers: usize,
    pub n_blocks: usize,
    pub seed: u64,
}

/// A short AFQMC run with its block energies and the FCI reference.
pub fn afqmc(req: &AfqmcRequest) -> Result<serde_json::Value, String> {
    if req.n_walkers > 128 || req.n_blocks > 200 {
        return Err("the demo allows at most 128 walkers and 200 blocks".into());
    }
    let g = req.chain.geometry()?;
    let r = prepare_reference(&g, &ActiveSpaceSpec::Full, req.trial, &Default::default()).map_err(|e| e.to_string())?;
    let protocol = Protocol {
        n_walkers: req.n_walkers,
        n_blocks: req.n_blocks,
        ..Default::default()
    };
    let series = run_projection(&r.system, &r.cholesky, &protocol, req.seed, &OverlapEstimator::Exact)
        .map_err(|e| e.to_string())?;
    let fci = fci_ground_state(&r.ham, r.mos.n_occ, r.mos.n_occ, &FciOptions::default()).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "blocks": series.block_energies,
        "n_equilibration": series.n_equilibration,
        "mean": series.mean,
        "stderr": series.stderr,
        "trial_energy": r.trial.energy,
        "rhf": r.mos.e_total,
        "fci": fci.e0,
    }))
}

fn call<T: for<'de> Deserialize<'de>, R: Serialize>(input: &str, f: impl FnOnce(&T) -> Result<R, String>) -> Result<String, JsValue> {
    let req: T = serde_json::from_str(input).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let out = f(&req).map_err(|e| JsValue::from_str(&e))?;
    Ok(serde_json::to_string(&out).expect("response serializes"))
}

#[wasm_bindgen(js_name = energyCurve)]
pub fn energy_curve_js(request: &str) -> Result<String, JsValue> {
    call(request, energy_curve)
}

#[wasm_bindgen(js_name = orbitalEntropies)]
pub fn entropies_js(request: &str) -> Result<String, JsValue> {
    call(request, entropies)
}

#[wasm_bindgen(js_name = runAfqmc)]
pub fn afqmc_js(request: &str) -> Result<String, JsValue> {
    call(request, afqmc)
}
