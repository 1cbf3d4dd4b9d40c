//! Experiment harness behind the `hdmn` binary: simulate travel traces,
//! filter them, score predictions and run experiment grids.

pub mod config;
pub mod evidence;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

use hdmn::HdmnError;
use hdmn_transport::{trips, Trajectory, TransportError, TransportHdmn, Variant};
use serde::{Deserialize, Serialize};

pub use config::{Algorithm, ExperimentConfig, Metric};
pub use report::Report;
pub use run::{cells, run_algorithm, run_cell, run_cells, Cell, CellOutcome, CellResult, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Inference(#[from] HdmnError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const PREDICTIONS_SCHEMA: &str = "hdmn-predictions/1";

/// Per-tick goals and per-trip route edges, as written by `filter`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predictions {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub variant: Variant,
    pub algorithm: String,
    pub goals: Vec<usize>,
    pub routes: Vec<Vec<usize>>,
}

impl Predictions {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Predictions = serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))?;
        if p.schema != PREDICTIONS_SCHEMA {
            return Err(CliError::Format(format!("unknown predictions schema `{}`", p.schema)));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("predictions serialize");
        s.push('\n');
        s
    }
}

/// The model a trajectory was simulated from: the scenario named in its
/// metadata, rebuilt with the trajectory's seed.
pub fn model_for(cfg: &ExperimentConfig, traj: &Trajectory, variant: Variant) -> Result<TransportHdmn> {
    let sc = cfg
        .scenarios
        .iter()
        .find(|s| s.name == traj.meta.scenario)
        .ok_or_else(|| CliError::Config(format!("no scenario named `{}` in the config", traj.meta.scenario)))?;
    Ok(sc.instantiate(variant, traj.meta.seed)?.0)
}

pub fn predict(
    model: &TransportHdmn,
    traj: &Trajectory,
    algorithm: Algorithm,
    prop: hdmn::propagate::PropagationOptions<f64>,
) -> Result<Predictions> {
    let f = run_algorithm(model, &traj.evidence(model), algorithm, traj.meta.seed, prop)?;
    let goals = model.predict_goals(&f.beliefs)?;
    let truth: Vec<usize> = traj.steps.iter().map(|s| s.goal).collect();
    let routes = model.predict_routes(&f.beliefs, &goals, &trips(&truth))?;
    Ok(Predictions {
        schema: PREDICTIONS_SCHEMA.into(),
        scenario: traj.meta.scenario.clone(),
        seed: traj.meta.seed,
        variant: model.variant,
        algorithm: algorithm.to_string(),
        goals,
        routes,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.into(), e))
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.into(), e))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::Io(path.into(), e))
}
