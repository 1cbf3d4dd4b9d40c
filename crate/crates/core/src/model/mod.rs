//! Variables, CPDs, constraints and the static and dynamic mixed-network
//! containers.

mod cpd;
mod dynamic;
pub mod format;
mod network;
pub mod relation;
mod variable;

pub use cpd::{Cpd, DiscreteCpd, LgParams, LinearGaussianCpd};
pub use dynamic::{DynamicBuilder, DynamicMixedNetwork};
pub use network::{Function, MixedNetwork, NetworkBuilder};
pub use relation::ConstraintRelation;
pub use variable::{Evidence, Value, VarId, VarKind, VarTable, Variable};
