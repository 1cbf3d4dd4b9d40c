use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Discrete { labels: Vec<String> },
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
}

impl Variable {
    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, VarKind::Discrete { .. })
    }

    /// Domain size for discrete variables, `None` for continuous ones.
    pub fn card(&self) -> Option<usize> {
        match &self.kind {
            VarKind::Discrete { labels } => Some(labels.len()),
            VarKind::Continuous => None,
        }
    }

    pub fn labels(&self) -> &[String] {
        match &self.kind {
            VarKind::Discrete { labels } => labels,
            VarKind::Continuous => &[],
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| l == label)
    }
}

/// An observed value.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value<S> {
    Discrete(usize),
    Continuous(S),
}

/// Assignment of values to (a subset of) variables.
pub type Evidence<S> = BTreeMap<VarId, Value<S>>;

/// Kind lookup shared by the structural algorithms.
pub trait VarTable {
    fn variable(&self, id: VarId) -> &Variable;
    fn num_vars(&self) -> usize;

    fn is_discrete(&self, id: VarId) -> bool {
        self.variable(id).is_discrete()
    }

    fn card(&self, id: VarId) -> usize {
        self.variable(id).card().unwrap_or(0)
    }
}

impl VarTable for [Variable] {
    fn variable(&self, id: VarId) -> &Variable {
        &self[id.0]
    }

    fn num_vars(&self) -> usize {
        self.len()
    }
}

impl VarTable for Vec<Variable> {
    fn variable(&self, id: VarId) -> &Variable {
        &self[id.0]
    }

    fn num_vars(&self) -> usize {
        self.len()
    }
}
