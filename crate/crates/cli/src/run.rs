use std::time::Instant;

use hdmn::filter::BeliefState;
use hdmn::propagate::PropagationOptions;
use hdmn::rbpf::{rbpf_filter, RbpfOptions};
use hdmn::{exact::exact_filter, ijgp::ijgp_s_filter, Evidence64};
use hdmn_transport::{predict_and_score, TransportHdmn, TransportScenario, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};
use crate::{CliError, Result};

/// One (scenario, variant, algorithm, seed) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub scenario: usize,
    pub variant: Variant,
    pub algorithm: Algorithm,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// Everything a cell reports except its wall time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellResult {
    pub scenario: String,
    pub variant: Variant,
    pub algorithm: String,
    pub seed: u64,
    pub status: Status,
    pub error: Option<String>,
    pub trips: Option<usize>,
    pub goal_accuracy: Option<f64>,
    pub route_fp: Option<f64>,
    pub route_fn: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub result: CellResult,
    pub wall_s: f64,
}

/// Filtered beliefs plus the particle filter's diagnostics.
pub struct Filtered {
    pub beliefs: Vec<BeliefState<f64>>,
    pub rejection_rate: Option<f64>,
    pub ess: Option<f64>,
}

pub fn run_algorithm(
    model: &TransportHdmn,
    evidence: &[Evidence64],
    algorithm: Algorithm,
    seed: u64,
    prop: PropagationOptions<f64>,
) -> Result<Filtered> {
    let dmn = &model.dmn;
    Ok(match algorithm {
        Algorithm::Exact => Filtered { beliefs: exact_filter(dmn, evidence)?, rejection_rate: None, ess: None },
        Algorithm::IjgpS { i } => Filtered {
            beliefs: ijgp_s_filter(dmn, evidence, i, &prop)?,
            rejection_rate: None,
            ess: None,
        },
        Algorithm::Rbpf { i, w, n } => {
            let mut opts = RbpfOptions::new(i, w, n, seed);
            opts.propagation = prop;
            let run = rbpf_filter(dmn, evidence, &opts)?;
            let ess = run.metrics.iter().map(|m| m.ess).sum::<f64>() / run.metrics.len().max(1) as f64;
            Filtered { rejection_rate: Some(run.rejection_rate()), ess: Some(ess), beliefs: run.beliefs }
        }
    })
}

/// The cell grid in report order: scenario, variant, algorithm, seed.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for scenario in 0..cfg.scenarios.len() {
        for &variant in &cfg.variants {
            for algorithm in cfg.grid() {
                for &seed in &cfg.seeds {
                    out.push(Cell { scenario, variant, algorithm, seed });
                }
            }
        }
    }
    out
}

pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> CellOutcome {
    let sc: &TransportScenario = &cfg.scenarios[cell.scenario];
    let mut result = CellResult {
        scenario: sc.name.clone(),
        variant: cell.variant,
        algorithm: cell.algorithm.to_string(),
        seed: cell.seed,
        status: Status::Failed,
        error: None,
        trips: None,
        goal_accuracy: None,
        route_fp: None,
        route_fn: None,
        rejection_rate: None,
        ess: None,
    };
    let mut wall_s = 0.0;
    let attempt = (|| -> Result<()> {
        let (model, traj) = sc.instantiate(cell.variant, cell.seed)?;
        let evidence = traj.evidence(&model);
        let start = Instant::now();
        let f = run_algorithm(&model, &evidence, cell.algorithm, cell.seed, cfg.propagation.into())?;
        wall_s = start.elapsed().as_secs_f64();
        let s = predict_and_score(&model, &f.beliefs, &traj)?;
        result.trips = Some(s.trips);
        result.goal_accuracy = Some(s.goal_accuracy);
        result.route_fp = Some(s.route_fp as f64);
        result.route_fn = Some(s.route_fn as f64);
        result.rejection_rate = f.rejection_rate;
        result.ess = f.ess;
        Ok(())
    })();
    match attempt {
        Ok(()) => result.status = Status::Ok,
        Err(e) => {
            log::warn!("{} {} {} seed {}: {e}", sc.name, cell.variant, cell.algorithm, cell.seed);
            result.error = Some(e.to_string());
        }
    }
    CellOutcome { result, wall_s }
}

/// Run every cell on at most `workers` threads. Results come back in cell
/// order whatever the scheduling.
pub fn run_cells(cfg: &ExperimentConfig, cells: &[Cell], workers: usize) -> Result<Vec<CellOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c)).collect()))
}
