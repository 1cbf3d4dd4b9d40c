use serde::{Deserialize, Serialize};

use super::VarId;
use crate::scalar::Real;

/// Conditional probability table. Rows are parent configurations in
/// row-major order (first parent slowest); the child value varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCpd<S> {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: Vec<S>,
}

impl<S: Real> DiscreteCpd<S> {
    pub fn new(child: VarId, parents: Vec<VarId>, table: Vec<S>) -> Self {
        Self {
            child,
            parents,
            table,
        }
    }

    /// Root variable with the given prior.
    pub fn prior(child: VarId, probs: Vec<S>) -> Self {
        Self::new(child, Vec::new(), probs)
    }

    /// Build from a function of (parent values, child value).
    pub fn from_fn(
        child: VarId,
        child_card: usize,
        parents: Vec<VarId>,
        parent_cards: &[usize],
        mut p: impl FnMut(&[usize], usize) -> S,
    ) -> Self {
        let mut table = Vec::with_capacity(parent_cards.iter().product::<usize>() * child_card);
        super::relation::for_each_tuple(parent_cards, |pa| {
            for c in 0..child_card {
                table.push(p(pa, c));
            }
        });
        Self::new(child, parents, table)
    }

    pub fn scope(&self) -> Vec<VarId> {
        let mut s = self.parents.clone();
        s.push(self.child);
        s
    }

    /// P(child = c | parents = config index `row`).
    pub fn prob(&self, row: usize, child_card: usize, c: usize) -> S {
        self.table[row * child_card + c]
    }
}

/// Per-configuration parameters of a linear-Gaussian CPD:
/// `x ~ N(intercept + coefficients · z, variance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgParams<S> {
    pub intercept: S,
    pub coefficients: Vec<S>,
    pub variance: S,
}

impl<S: Real> LgParams<S> {
    pub fn new(intercept: S, coefficients: Vec<S>, variance: S) -> Self {
        Self {
            intercept,
            coefficients,
            variance,
        }
    }
}

/// Conditional linear-Gaussian CPD; one [`LgParams`] per discrete parent
/// configuration (row-major over `discrete_parents`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianCpd<S> {
    pub child: VarId,
    pub discrete_parents: Vec<VarId>,
    pub continuous_parents: Vec<VarId>,
    pub params: Vec<LgParams<S>>,
}

impl<S: Real> LinearGaussianCpd<S> {
    pub fn new(
        child: VarId,
        discrete_parents: Vec<VarId>,
        continuous_parents: Vec<VarId>,
        params: Vec<LgParams<S>>,
    ) -> Self {
        Self {
            child,
            discrete_parents,
            continuous_parents,
            params,
        }
    }

    pub fn scope(&self) -> Vec<VarId> {
        let mut s = self.discrete_parents.clone();
        s.extend(&self.continuous_parents);
        s.push(self.child);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cpd<S> {
    Discrete(DiscreteCpd<S>),
    LinearGaussian(LinearGaussianCpd<S>),
}

impl<S: Real> Cpd<S> {
    pub fn child(&self) -> VarId {
        match self {
            Cpd::Discrete(c) => c.child,
            Cpd::LinearGaussian(c) => c.child,
        }
    }

    pub fn parents(&self) -> Vec<VarId> {
        match self {
            Cpd::Discrete(c) => c.parents.clone(),
            Cpd::LinearGaussian(c) => {
                let mut p = c.discrete_parents.clone();
                p.extend(&c.continuous_parents);
                p
            }
        }
    }

    pub fn scope(&self) -> Vec<VarId> {
        match self {
            Cpd::Discrete(c) => c.scope(),
            Cpd::LinearGaussian(c) => c.scope(),
        }
    }

    pub fn relabel(&self, map: impl Fn(VarId) -> VarId) -> Self {
        match self {
            Cpd::Discrete(c) => Cpd::Discrete(DiscreteCpd {
                child: map(c.child),
                parents: c.parents.iter().map(|&p| map(p)).collect(),
                table: c.table.clone(),
            }),
            Cpd::LinearGaussian(c) => Cpd::LinearGaussian(LinearGaussianCpd {
                child: map(c.child),
                discrete_parents: c.discrete_parents.iter().map(|&p| map(p)).collect(),
                continuous_parents: c.continuous_parents.iter().map(|&p| map(p)).collect(),
                params: c.params.clone(),
            }),
        }
    }
}

impl<S> From<DiscreteCpd<S>> for Cpd<S> {
    fn from(c: DiscreteCpd<S>) -> Self {
        Cpd::Discrete(c)
    }
}

impl<S> From<LinearGaussianCpd<S>> for Cpd<S> {
    fn from(c: LinearGaussianCpd<S>) -> Self {
        Cpd::LinearGaussian(c)
    }
}
