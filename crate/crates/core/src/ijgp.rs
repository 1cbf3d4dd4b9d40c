//! Iterative join-graph propagation on static networks and its sliced
//! variant for filtering.

use std::collections::BTreeMap;

use crate::error::{HdmnError, Result};
use crate::exact::function_potential;
use crate::filter::{slice_filter, BeliefState};
use crate::joingraph::{build_join_graph, elimination_order, JoinGraph, Skeleton};
use crate::model::{DynamicMixedNetwork, Evidence, Function, MixedNetwork, Value, VarId, VarTable};
use crate::potential::HybridPotential;
use crate::propagate::{assemble_factors, calibrate_loopy, Calibrated, Marginal, PropagationOptions};
use crate::scalar::Real;

/// Join graph with converged (or iteration-capped) messages.
#[derive(Clone, Debug)]
pub struct CalibratedGraph<S> {
    pub graph: JoinGraph,
    pub cal: Calibrated<S>,
    evidence: Evidence<S>,
    cards: Vec<Option<usize>>,
    homes: BTreeMap<VarId, usize>,
}

impl<S: Real> CalibratedGraph<S> {
    pub fn iterations(&self) -> usize {
        self.cal.iterations
    }

    pub fn converged(&self) -> bool {
        self.cal.converged
    }

    /// Marginal of `v` from the cluster holding its CPD (the smallest
    /// cluster containing it if it has none).
    pub fn marginal(&self, v: VarId) -> Result<Marginal<S>> {
        if let Some(Value::Discrete(x)) = self.evidence.get(&v) {
            return Ok(Marginal::point(self.cards[v.0].unwrap_or(1), *x));
        }
        let c = self
            .homes
            .get(&v)
            .copied()
            .or_else(|| self.graph.smallest_containing(v))
            .ok_or_else(|| HdmnError::Internal(format!("{v} is not in the join graph")))?;
        self.cal.marginal_in(&self.graph, c, v)
    }

    /// Marginals of every unobserved variable.
    pub fn marginals(&self) -> Result<BTreeMap<VarId, Marginal<S>>> {
        (0..self.cards.len())
            .map(VarId)
            .filter(|v| !self.evidence.contains_key(v))
            .map(|v| self.marginal(v).map(|m| (v, m)))
            .collect()
    }
}

/// IJGP(i) on a static network.
pub fn ijgp<S: Real>(
    net: &MixedNetwork<S>,
    evidence: &Evidence<S>,
    i: usize,
    opts: &PropagationOptions<S>,
) -> Result<CalibratedGraph<S>> {
    let observed: Vec<VarId> = evidence.keys().copied().collect();
    let skel = Skeleton::from_network(net).without(&observed);
    let order = elimination_order(&skel);
    let graph = build_join_graph(&skel, &order, i)?;
    let funcs = net.functions();
    let pots: Vec<Option<HybridPotential<S>>> = funcs
        .iter()
        .map(|&f| function_potential(f, net).condition(evidence).map(Some))
        .collect::<Result<_>>()?;
    let cal = calibrate_loopy(&graph, assemble_factors(&graph, &pots)?, opts)?;
    let mut homes = BTreeMap::new();
    for (k, f) in funcs.iter().enumerate() {
        if let Function::Cpd(c) = f {
            if let Some(h) = graph.home_of(k) {
                homes.insert(c.child(), h);
            }
        }
    }
    let cards = (0..net.num_vars()).map(|v| net.variable(VarId(v)).card()).collect();
    Ok(CalibratedGraph {
        graph,
        cal,
        evidence: evidence.clone(),
        cards,
        homes,
    })
}

/// IJGP(i)-S filtering: the interface is split into groups of at most
/// `i + 1` discrete variables whose beliefs are carried between slices.
/// `i` above the slice width is clamped (exact filtering).
pub fn ijgp_s_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
    i: usize,
    opts: &PropagationOptions<S>,
) -> Result<Vec<BeliefState<S>>> {
    slice_filter(dmn, observations, Some(i), opts)
}
