//! Car-travel activity model on a road graph: time of day and day of week,
//! goals, routes between goals, a dwell counter with goal-switching rules,
//! location on the road graph, velocity and noisy GPS readings. Includes a
//! trajectory simulator, goal extraction from traces and goal/route
//! scoring.

pub mod goals;
pub mod graph;
pub mod io;
pub mod model;
pub mod score;
pub mod simulate;

use thiserror::Error;


pub use graph::RoadGraph;
pub use goals::{extract_goals, ExtractedGoal, GoalExtraction, TracePoint};
pub use io::{load_trajectory, read_trajectory, save_trajectory, write_trajectory};
pub use score::{predict_and_score, score_predictions, trips, Score};
pub use simulate::{simulate, Step, Trajectory, TrajectoryMeta, TransportScenario};
pub use model::{
    build_transport_model, goal_switch_constraints, next_counter, Goal, Tables, TransportHdmn, TransportParams, VarRegistry, Variant,
};



#[derive(Debug, Error)]
pub enum TransportError {
    #[error("road graph: {0}")]
    Graph(String),
    #[error("model: {0}")]
    Model(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Inference(#[from] hdmn::HdmnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TransportError> = std::result::Result<T, E>;
