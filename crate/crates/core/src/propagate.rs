//! Message passing over join trees and join graphs.
//!
//! A message is the marginal of the sender's factor times its other
//! incoming messages. When that marginal would have to collapse a Gaussian
//! mixture, the message is instead the weak marginal of the sender's full
//! belief divided by the reverse message, which keeps moments exact on a
//! strong tree.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{HdmnError, Result};
use crate::joingraph::JoinGraph;
use crate::model::VarId;
use crate::potential::HybridPotential;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions<S> {
    pub tol: S,
    pub max_iters: usize,
    pub damping: S,
    /// Damping switches on after this many iterations whenever the residual
    /// failed to decrease.
    pub damping_after: usize,
}

impl<S: Real> Default for PropagationOptions<S> {
    fn default() -> Self {
        Self {
            tol: S::lit(1e-6),
            max_iters: 30,
            damping: S::lit(0.5),
            damping_after: 10,
        }
    }
}

/// Single-variable marginal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Marginal<S> {
    Discrete(Vec<S>),
    Gaussian { mean: S, variance: S },
}

impl<S: Real> Marginal<S> {
    pub fn of(p: &HybridPotential<S>, v: VarId) -> Result<Self> {
        if p.discrete_scope().contains(&v) {
            p.discrete_distribution(v).map(Marginal::Discrete)
        } else {
            let (mean, variance) = p.continuous_moments(v)?;
            Ok(Marginal::Gaussian { mean, variance })
        }
    }

    pub fn probs(&self) -> Option<&[S]> {
        match self {
            Marginal::Discrete(p) => Some(p),
            Marginal::Gaussian { .. } => None,
        }
    }

    pub fn mean(&self) -> Option<S> {
        match self {
            Marginal::Gaussian { mean, .. } => Some(*mean),
            Marginal::Discrete(_) => None,
        }
    }

    pub fn variance(&self) -> Option<S> {
        match self {
            Marginal::Gaussian { variance, .. } => Some(*variance),
            Marginal::Discrete(_) => None,
        }
    }

    /// Point mass for an observed discrete value.
    pub fn point(card: usize, value: usize) -> Self {
        Marginal::Discrete((0..card).map(|k| if k == value { S::one() } else { S::zero() }).collect())
    }
}

/// Multiply each cluster's assigned function potentials. `None` entries
/// (dropped functions) are skipped.
pub fn assemble_factors<S: Real>(
    graph: &JoinGraph,
    potentials: &[Option<HybridPotential<S>>],
) -> Result<Vec<HybridPotential<S>>> {
    graph
        .clusters()
        .iter()
        .map(|c| HybridPotential::multiply_all(c.functions.iter().filter_map(|&f| potentials[f].as_ref())))
        .collect()
}

/// Calibrated messages over a join graph.
#[derive(Clone, Debug)]
pub struct Calibrated<S> {
    factors: Vec<HybridPotential<S>>,
    /// Per edge: message a→b, then b→a.
    messages: Vec<[HybridPotential<S>; 2]>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: S,
    /// Some message needed a moment-matched (weak) marginal.
    pub collapsed: bool,
}

enum Sent<S> {
    New(HybridPotential<S>, bool),
    Keep,
}

impl<S: Real> Calibrated<S> {
    fn new(graph: &JoinGraph, factors: Vec<HybridPotential<S>>) -> Result<Self> {
        if factors.len() != graph.clusters().len() {
            return Err(HdmnError::Internal("one factor per cluster expected".into()));
        }
        let unit = HybridPotential::unit();
        Ok(Self {
            factors,
            messages: vec![[unit.clone(), unit]; graph.edges().len()],
            iterations: 0,
            converged: false,
            residual: S::infinity(),
            collapsed: false,
        })
    }

    /// Message arriving at `c` along edge `e`.
    pub fn incoming(&self, graph: &JoinGraph, e: usize, c: usize) -> &HybridPotential<S> {
        if graph.edges()[e].b == c {
            &self.messages[e][0]
        } else {
            &self.messages[e][1]
        }
    }

    fn send(&self, graph: &JoinGraph, e: usize, from: usize) -> Result<Sent<S>> {
        let edge = &graph.edges()[e];
        let mut prod = self.factors[from].clone();
        for &e2 in graph.incident(from) {
            if e2 != e {
                prod = prod.multiply(self.incoming(graph, e2, from))?;
            }
        }
        match prod.marginalize_onto_tracked(&edge.sep) {
            Ok((m, false)) => return Ok(Sent::New(m, false)),
            Ok((_, true)) | Err(HdmnError::Degenerate { .. }) => {}
            Err(err) => return Err(err),
        }
        let back = self.incoming(graph, e, from);
        let full = prod.multiply(back)?;
        match full.marginalize_onto(&edge.sep) {
            Ok(wm) => Ok(Sent::New(wm.divide(back)?, true)),
            Err(HdmnError::Degenerate { .. }) => Ok(Sent::Keep),
            Err(err) => Err(err),
        }
    }

    fn slot(graph: &JoinGraph, e: usize, from: usize) -> usize {
        if graph.edges()[e].a == from {
            0
        } else {
            1
        }
    }

    pub fn belief(&self, graph: &JoinGraph, c: usize) -> Result<HybridPotential<S>> {
        let mut b = self.factors[c].clone();
        for &e in graph.incident(c) {
            b = b.multiply(self.incoming(graph, e, c))?;
        }
        Ok(b)
    }

    pub fn factor(&self, c: usize) -> &HybridPotential<S> {
        &self.factors[c]
    }

    /// Marginal of `v` read from cluster `c`.
    pub fn marginal_in(&self, graph: &JoinGraph, c: usize, v: VarId) -> Result<Marginal<S>> {
        let b = self.belief(graph, c)?;
        if b.is_all_zero() {
            return Err(HdmnError::Inconsistent { t: None });
        }
        Marginal::of(&b, v)
    }

    /// Marginal of `v` from the smallest cluster holding it.
    pub fn marginal(&self, graph: &JoinGraph, v: VarId) -> Result<Marginal<S>> {
        let c = graph
            .smallest_containing(v)
            .ok_or_else(|| HdmnError::Internal(format!("{v} is not in the join graph")))?;
        self.marginal_in(graph, c, v)
    }
}

/// Collect and distribute on a join tree. Messages are left unnormalized so
/// that any cluster's belief carries the total mass.
pub fn calibrate_tree<S: Real>(
    graph: &JoinGraph,
    factors: Vec<HybridPotential<S>>,
) -> Result<Calibrated<S>> {
    if !graph.is_tree() {
        return Err(HdmnError::Internal("two-pass calibration needs a tree".into()));
    }
    let mut cal = Calibrated::new(graph, factors)?;
    let root = tree_root(graph);
    // BFS from the root; parent edge per node
    let mut order = Vec::new();
    let mut parent_edge = vec![None; graph.clusters().len()];
    let mut seen = vec![false; graph.clusters().len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(c) = queue.pop_front() {
        order.push(c);
        for &e in graph.incident(c) {
            let o = graph.other(e, c);
            if !seen[o] {
                seen[o] = true;
                parent_edge[o] = Some(e);
                queue.push_back(o);
            }
        }
    }
    for &c in order.iter().rev() {
        if let Some(e) = parent_edge[c] {
            deliver(&mut cal, graph, e, c)?;
        }
    }
    for &c in &order {
        if let Some(e) = parent_edge[c] {
            let p = graph.other(e, c);
            deliver(&mut cal, graph, e, p)?;
        }
    }
    cal.iterations = 1;
    cal.converged = true;
    cal.residual = S::zero();
    Ok(cal)
}

/// Root used for tree calibration: the last cluster created.
pub fn tree_root(graph: &JoinGraph) -> usize {
    graph.clusters().len() - 1
}

fn deliver<S: Real>(cal: &mut Calibrated<S>, graph: &JoinGraph, e: usize, from: usize) -> Result<()> {
    if let Sent::New(m, weak) = cal.send(graph, e, from)? {
        cal.collapsed |= weak;
        cal.messages[e][Calibrated::<S>::slot(graph, e, from)] = m;
    }
    Ok(())
}

/// Iterative propagation with a fixed sequential schedule: every edge
/// forward in index order, then every edge backward in reverse order.
pub fn calibrate_loopy<S: Real>(
    graph: &JoinGraph,
    factors: Vec<HybridPotential<S>>,
    opts: &PropagationOptions<S>,
) -> Result<Calibrated<S>> {
    let mut cal = Calibrated::new(graph, factors)?;
    let ne = graph.edges().len();
    let schedule: Vec<(usize, usize)> = (0..ne)
        .map(|e| (e, graph.edges()[e].a))
        .chain((0..ne).rev().map(|e| (e, graph.edges()[e].b)))
        .collect();
    let mut prev_residual = S::infinity();
    let mut damp = false;
    for it in 1..=opts.max_iters {
        let mut residual = S::zero();
        for &(e, from) in &schedule {
            let Sent::New(m, weak) = cal.send(graph, e, from)? else {
                continue;
            };
            cal.collapsed |= weak;
            let m = shift_to_max(m);
            let slot = Calibrated::<S>::slot(graph, e, from);
            let old = &cal.messages[e][slot];
            let m = if damp { m.damped(old, opts.damping) } else { m };
            residual = residual.max(m.residual(old));
            cal.messages[e][slot] = m;
        }
        cal.iterations = it;
        cal.residual = residual;
        if residual < opts.tol {
            cal.converged = true;
            break;
        }
        if it >= opts.damping_after && residual >= prev_residual {
            damp = true;
        }
        prev_residual = residual;
    }
    if ne == 0 {
        cal.converged = true;
        cal.residual = S::zero();
    }
    Ok(cal)
}

fn shift_to_max<S: Real>(m: HybridPotential<S>) -> HybridPotential<S> {
    let top = (0..m.len())
        .map(|i| m.log_weight(i))
        .fold(S::neg_infinity(), |a, b| a.max(b));
    if top.is_finite() {
        m.scaled(-top)
    } else {
        m
    }
}
