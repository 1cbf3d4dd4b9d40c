//! Inference for hybrid dynamic mixed networks: discrete CPTs,
//! conditional linear-Gaussian CPDs and hard constraints over time.
//!
//! The algorithms are generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). The `*64` aliases at the crate root fix `f64`.

pub mod error;
pub mod exact;
pub mod filter;
pub mod ijgp;
pub mod joingraph;
pub mod linalg;
pub mod model;
pub mod potential;
pub mod propagate;
pub mod rbpf;
pub mod scalar;

pub use error::{HdmnError, Result};
pub use model::{
    ConstraintRelation, Cpd, DiscreteCpd, DynamicBuilder, DynamicMixedNetwork, Evidence, LgParams,
    LinearGaussianCpd, MixedNetwork, NetworkBuilder, Value, VarId, VarKind, VarTable, Variable,
};
pub use potential::HybridPotential;
pub use scalar::Real;

pub type MixedNetwork64 = MixedNetwork<f64>;
pub type DynamicMixedNetwork64 = DynamicMixedNetwork<f64>;
pub type HybridPotential64 = HybridPotential<f64>;
pub type Evidence64 = Evidence<f64>;
pub type RbpfOptions64 = rbpf::RbpfOptions<f64>;
pub type FilterRun64 = rbpf::FilterRun<f64>;
pub type BeliefState64 = filter::BeliefState<f64>;
