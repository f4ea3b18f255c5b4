use std::fs;
use std::path::Path;

use qmcf::afqmc::run_projection;
use qmcf::corrsamp::{
    execute_force, plan_correlated_run, scan_forces, sha256_hex, Method, ScanPoint, ScanTemplate,
};
use qmcf::fci::{fci_ground_state, FciOptions};
use qmcf::hamiltonian::transform_to_mo;
use qmcf::pipeline::{entropy_report, prepare_reference, resolve_active_space, ActiveSpaceSpec};
use qmcf::scf::rhf_with_guess;
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Energy,
    Force,
    ActiveSpace,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: "config",
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message } })
    }
}

impl From<qmcf::Error> for Failure {
    fn from(e: qmcf::Error) -> Self {
        use qmcf::Error as E;
        let kind = match &e {
            E::ScfNotConverged { .. } | E::DavidsonNotConverged { .. } | E::Stagnation { .. } => "convergence",
            E::DimensionCap { .. } => "dimension-cap",
            E::WeightCollapse { .. } | E::ZeroOverlap => "sampling",
            E::ReplayInvalid(_) => "replay",
            E::Invalid(_) | E::TooFewBlocks { .. } => "input",
            _ => "computation",
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn fci_options(cfg: &RunConfig) -> FciOptions {
    FciOptions {
        dimension_cap: cfg.reference.fci_dimension_cap,
        ..Default::default()
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), text).map_err(Failure::io)
}

/// Runs one command, writing artifacts to the configured output directory.
pub fn run(kind: Kind, cfg: &RunConfig, base: &Path) -> Outcome {
    fs::create_dir_all(&cfg.output).map_err(Failure::io)?;
    let resolved = cfg.resolved_json();
    write(&cfg.output, "resolved_config.json", &serde_json::to_string_pretty(&resolved).unwrap())?;
    let result = match kind {
        Kind::Energy => energy(cfg, base),
        Kind::Force => force(cfg, base),
        Kind::ActiveSpace => active_space(cfg, base),
    };
    let mut summary = match result {
        Ok(v) => v,
        Err(f) => {
            let _ = write(&cfg.output, "error.json", &serde_json::to_string_pretty(&f.to_json()).unwrap());
            return Err(f);
        }
    };
    summary["config"] = resolved;
    summary["version"] = json!(env!("CARGO_PKG_VERSION"));
    write(&cfg.output, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(summary)
}

fn energy(cfg: &RunConfig, base: &Path) -> Outcome {
    let geom = cfg.system.geometry(base).map_err(Failure::config)?;
    match cfg.method {
        Method::Rhf => {
            let (_, mos) = rhf_with_guess(&geom, cfg.reference.scf_guess)?;
            Ok(json!({ "method": "rhf", "energy": mos.e_total, "scf_iterations": mos.iterations }))
        }
        Method::Fci => {
            let (ints, mos) = rhf_with_guess(&geom, cfg.reference.scf_guess)?;
            let ham = transform_to_mo(&ints, &mos)?;
            let fci = fci_ground_state(&ham, mos.n_occ, mos.n_occ, &fci_options(cfg))?;
            Ok(json!({ "method": "fci", "energy": fci.e0, "rhf_energy": mos.e_total, "dimension": fci.space.dim() }))
        }
        Method::PhAfqmc | Method::QcAfqmc => {
            let r = prepare_reference(&geom, &cfg.active_space, cfg.trial_kind(), &cfg.reference)?;
            let series = run_projection(&r.system, &r.cholesky, &cfg.protocol, cfg.seeds.global, &cfg.estimator())?;
            let pivots = r.cholesky.artifact().to_json();
            let trial = r.trial.to_json();
            write(&cfg.output, "energy.csv", &series.to_csv())?;
            write(&cfg.output, "pivots.json", &pivots)?;
            write(&cfg.output, "trial.json", &trial)?;
            Ok(json!({
                "method": cfg.method.label(),
                "energy": series.mean,
                "energy_err": series.stderr,
                "trial_energy": r.trial.energy,
                "rhf_energy": r.mos.e_total,
                "n_cholesky": r.cholesky.len(),
                "partition": r.partition,
                "flagged_walkers": series.flagged_walkers,
                "seed": cfg.seeds.global,
                "pivot_hash": sha256_hex(&pivots),
                "trial_hash": sha256_hex(&trial),
            }))
        }
    }
}

fn force(cfg: &RunConfig, base: &Path) -> Outcome {
    let fc = cfg
        .force
        .as_ref()
        .ok_or_else(|| Failure::config("the force command needs a 'force' section"))?;
    let d = fc.displacement();
    if let (None, Method::PhAfqmc | Method::QcAfqmc) = (&fc.grid, cfg.method) {
        let geom = cfg.system.geometry(base).map_err(Failure::config)?;
        let r = prepare_reference(&geom, &cfg.active_space, cfg.trial_kind(), &cfg.reference)?;
        let plan = plan_correlated_run(r, d, cfg.protocol, cfg.seeds.global, cfg.estimator())?;
        let f = execute_force(&plan)?;
        write(&cfg.output, "pivots.json", &plan.pivots.to_json())?;
        write(&cfg.output, "trial.json", &plan.reference.trial.to_json())?;
        write(&cfg.output, "energy_plus.csv", &f.plus.series.to_csv())?;
        write(&cfg.output, "energy_minus.csv", &f.minus.series.to_csv())?;
        let estimate = serde_json::to_value(&f).expect("force serializes");
        write(&cfg.output, "force.json", &serde_json::to_string_pretty(&estimate).unwrap())?;
        return Ok(json!({
            "method": cfg.method.label(),
            "force": f.value,
            "force_err": f.sigma,
            "rho": f.rho,
            "sigma_uncorrelated": f.sigma_uncorrelated,
            "energy": f.energy,
            "energy_err": f.energy_err,
            "seed": cfg.seeds.global,
            "pivot_hash": f.pivot_hash,
            "trial_hash": f.trial_hash,
            "reanchors": f.reanchors,
        }));
    }
    let points: Vec<ScanPoint> = match &fc.grid {
        Some(grid) => grid
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let sys = cfg.system.with_bond_length(r)?;
                Ok(ScanPoint {
                    id: format!("g{i}"),
                    bond_length: r,
                    geometry: sys.geometry(base)?,
                })
            })
            .collect::<Result<_, String>>()
            .map_err(Failure::config)?,
        None => vec![ScanPoint {
            id: "g0".into(),
            bond_length: cfg.system.bond_length().unwrap_or(f64::NAN),
            geometry: cfg.system.geometry(base).map_err(Failure::config)?,
        }],
    };
    let template = ScanTemplate {
        methods: vec![cfg.method],
        active_space: cfg.active_space.clone(),
        trial: cfg.trial_kind(),
        reference: cfg.reference,
        protocol: cfg.protocol,
        seed: cfg.seeds.global,
        estimator: cfg.estimator(),
        displacement: d,
        fci: fci_options(cfg),
    };
    let table = scan_forces(&points, &template);
    write(&cfg.output, "forces.csv", &table.to_csv())?;
    write(&cfg.output, "forces.json", &table.to_json())?;
    if let Some(row) = table.rows.iter().find(|r| r.error.is_some()) {
        return Err(Failure {
            kind: "computation",
            message: format!("{}: {}", row.geometry_id, row.error.as_deref().unwrap_or_default()),
        });
    }
    Ok(json!({ "method": cfg.method.label(), "rows": table.rows }))
}

fn active_space(cfg: &RunConfig, base: &Path) -> Outcome {
    let geom = cfg.system.geometry(base).map_err(Failure::config)?;
    let (ints, mos) = rhf_with_guess(&geom, cfg.reference.scf_guess)?;
    let ham = transform_to_mo(&ints, &mos)?;
    let n_el = 2 * mos.n_occ;
    let opts = fci_options(cfg);
    let threshold = match cfg.active_space {
        ActiveSpaceSpec::Entropy { threshold } => threshold,
        _ => qmcf::fci::ENTROPY_THRESHOLD,
    };
    if !matches!(cfg.active_space, ActiveSpaceSpec::Entropy { .. }) {
        let (part, _) = resolve_active_space(&cfg.active_space, &ham, n_el, &opts)?;
        return Ok(json!({
            "source": "manual",
            "recommended": part.active,
            "partition": part,
        }));
    }
    let report = entropy_report(&ham, n_el, threshold, &opts)?;
    write(&cfg.output, "entropy.json", &report.to_json())?;
    write(&cfg.output, "entropy.csv", &report.to_csv())?;
    let mut out = json!({
        "source": "entropy",
        "threshold": threshold,
        "recommended": report.selected,
        "max_entropy": report.max_entropy(),
        "entropies": report.orbitals.iter().map(|o| o.entropy).collect::<Vec<_>>(),
    });
    if report.selected.is_empty() {
        out["message"] = json!(format!(
            "no orbitals exceed threshold {threshold:.4}; largest entropy is {:.4}",
            report.max_entropy()
        ));
    }
    Ok(out)
}
