//! Run configuration: JSON with unknown keys rejected, dotted-path
//! overrides, and a resolved copy with every default filled in.

use std::path::{Path, PathBuf};

use qmcf::afqmc::Protocol;
use qmcf::chem::{parse_xyz, Geometry};
use qmcf::corrsamp::Displacement;
use qmcf::pipeline::{ActiveSpaceSpec, ReferenceOptions};
use qmcf::trial::{OverlapEstimator, TrialKind};
use qmcf::corrsamp::Method;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum System {
    /// Path to an XYZ file, relative to the config file.
    XyzPath(PathBuf),
    /// XYZ text.
    Xyz(String),
    /// Evenly spaced chain along z.
    Chain { element: String, n: usize, spacing: f64 },
    Diatomic { element: String, bond: f64 },
}

impl System {
    pub fn geometry(&self, base: &Path) -> Result<Geometry, String> {
        match self {
            System::XyzPath(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_xyz(&text).map_err(|e| e.to_string())
            }
            System::Xyz(text) => parse_xyz(text).map_err(|e| e.to_string()),
            System::Chain { element, n, spacing } => Geometry::linear_chain(element, *n, *spacing).map_err(|e| e.to_string()),
            System::Diatomic { element, bond } => Geometry::diatomic(element, *bond).map_err(|e| e.to_string()),
        }
    }

    /// The same system with its bond length replaced, for scans.
    pub fn with_bond_length(&self, r: f64) -> Result<System, String> {
        match self {
            System::Chain { element, n, .. } => Ok(System::Chain {
                element: element.clone(),
                n: *n,
                spacing: r,
            }),
            System::Diatomic { element, .. } => Ok(System::Diatomic {
                element: element.clone(),
                bond: r,
            }),
            _ => Err("a bond-length grid needs a chain or diatomic system".into()),
        }
    }

    pub fn bond_length(&self) -> Option<f64> {
        match self {
            System::Chain { spacing, .. } => Some(*spacing),
            System::Diatomic { bond, .. } => Some(*bond),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "sto-3g", alias = "STO-3G")]
    Sto3g,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub atom: usize,
    pub axis: usize,
    pub delta: f64,
    /// Bond lengths (Å) to scan; the configured system when absent.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
}

impl ForceConfig {
    pub fn displacement(&self) -> Displacement {
        Displacement {
            atom: self.atom,
            axis: self.axis,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub global: u64,
    #[serde(default)]
    pub shadow: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { global: 1, shadow: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum EstimatorConfig {
    Exact,
    Stochastic { n_samples: u64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: System,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    pub method: Method,
    #[serde(default = "default_trial")]
    pub trial: TrialKind,
    #[serde(default = "default_active_space")]
    pub active_space: ActiveSpaceSpec,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub force: Option<ForceConfig>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub reference: ReferenceOptions,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_basis() -> Basis {
    Basis::Sto3g
}
fn default_trial() -> TrialKind {
    TrialKind::Upccd
}
fn default_active_space() -> ActiveSpaceSpec {
    ActiveSpaceSpec::Full
}
fn default_estimator() -> EstimatorConfig {
    EstimatorConfig::Exact
}
fn default_output() -> PathBuf {
    PathBuf::from("qmcf-out")
}

impl RunConfig {
    pub fn estimator(&self) -> OverlapEstimator {
        match self.estimator {
            EstimatorConfig::Exact => OverlapEstimator::Exact,
            EstimatorConfig::Stochastic { n_samples, sigma } => OverlapEstimator::Stochastic {
                shadow_seed: self.seeds.shadow,
                n_samples,
                sigma,
            },
        }
    }

    /// Trial used by the method: ph-AFQMC always uses a single determinant.
    pub fn trial_kind(&self) -> TrialKind {
        match self.method {
            Method::PhAfqmc => TrialKind::SingleDeterminant,
            _ => self.trial,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.protocol.validate().map_err(|e| e.to_string())?;
        if let Some(f) = &self.force {
            if !(f.delta > 0.0) {
                return Err(format!("force.delta must be positive, got {}", f.delta));
            }
            if f.grid.is_some() {
                self.system.with_bond_length(1.0)?;
            }
        }
        Ok(())
    }

    pub fn resolved_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Sets `path` (dot separated) in `root`, creating objects as needed. The
/// value is parsed as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override '{assignment}' is not key=value"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("override path '{path}' has an empty segment"));
    }
    let mut cur = root;
    for key in &keys[..keys.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| format!("override path '{path}' crosses a non-object"))?;
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| format!("override path '{path}' crosses a non-object"))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

pub fn load(text: &str, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, String> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    if let Some(s) = seed {
        apply_override(&mut root, &format!("seeds.global={s}"))?;
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| format!("config: {e}"))?;
    cfg.validate()?;
    Ok(cfg)
}
