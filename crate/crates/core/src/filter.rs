//! One-slice propagation shared by the exact filter, IJGP-S and the
//! particle filter.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{HdmnError, Result};
use crate::exact::function_potential;
use crate::joingraph::{paste_interfaces, SliceTemplate, SlicedJoinGraph};
use crate::model::{DynamicMixedNetwork, Evidence, Function, MixedNetwork, Value, VarId, VarTable};
use crate::potential::{Canonical, HybridPotential};
use crate::propagate::{
    assemble_factors, calibrate_loopy, calibrate_tree, tree_root, Calibrated, Marginal,
    PropagationOptions,
};
use crate::scalar::Real;

/// Filtered belief at one time step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeliefState<S> {
    pub t: usize,
    /// Keyed by state variable; continuous observations are omitted.
    pub marginals: BTreeMap<VarId, Marginal<S>>,
    /// Normalized interface beliefs (one per interface group), over state ids.
    #[serde(skip)]
    pub interface: Vec<HybridPotential<S>>,
    /// Cumulative `ln p(e_0..t)`; only available when the slice graph is a tree.
    pub log_likelihood: Option<S>,
    /// A Gaussian mixture was collapsed when forming the interface belief.
    pub collapsed: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of propagating one slice.
#[derive(Clone, Debug)]
pub struct SliceOutcome<S> {
    pub t: usize,
    pub cal: Calibrated<S>,
    /// Log-mass of the slice given the incoming beliefs (trees only).
    pub log_z: Option<S>,
    /// Outgoing interface beliefs, normalized, over state ids.
    pub forward: Vec<HybridPotential<S>>,
    pub collapsed: bool,
}

/// Slice templates plus precomputed function potentials.
#[derive(Clone, Debug)]
pub struct SliceEngine<'a, S> {
    dmn: &'a DynamicMixedNetwork<S>,
    pub sliced: SlicedJoinGraph,
    prior_base: Vec<HybridPotential<S>>,
    trans_base: Vec<HybridPotential<S>>,
    prior_cpd: Vec<Option<usize>>,
    trans_cpd: Vec<Option<usize>>,
    pub opts: PropagationOptions<S>,
    /// Skip constraint functions (for constraint-blind proposals).
    pub ignore_constraints: bool,
}

fn cpd_indices<S: Real>(net: &MixedNetwork<S>, n: usize, offset: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n];
    for (k, f) in net.functions().into_iter().enumerate() {
        if let Function::Cpd(c) = f {
            let id = c.child().0;
            if id >= offset && id - offset < n {
                out[id - offset] = Some(k);
            }
        }
    }
    out
}

/// Weight-one potential over a scope (zero information on continuous variables).
pub fn vacuous<S: Real>(scope: &[VarId], vars: &impl VarTable) -> HybridPotential<S> {
    let dvars: Vec<VarId> = scope.iter().copied().filter(|&v| vars.is_discrete(v)).collect();
    let cvars: Vec<VarId> = scope.iter().copied().filter(|&v| !vars.is_discrete(v)).collect();
    let cards: Vec<usize> = dvars.iter().map(|&v| vars.card(v)).collect();
    let n = cvars.len();
    let m: usize = cards.iter().product();
    let entries = (0..m)
        .map(|_| {
            Some(Canonical {
                g: S::zero(),
                h: vec![S::zero(); n],
                k: vec![S::zero(); n * n],
            })
        })
        .collect();
    HybridPotential::from_entries(&dvars, &cards, &cvars, entries).expect("sizes match")
}

impl<'a, S: Real> SliceEngine<'a, S> {
    /// `i = None` builds exact templates. `removed` state variables are
    /// conditioned away in both slice copies and must be supplied as
    /// evidence at every step.
    pub fn new(
        dmn: &'a DynamicMixedNetwork<S>,
        i: Option<usize>,
        removed: &[VarId],
        opts: PropagationOptions<S>,
    ) -> Result<Self> {
        let sliced = paste_interfaces(dmn, i, removed)?;
        let n = dmn.num_state();
        let pots = |net: &MixedNetwork<S>| -> Vec<HybridPotential<S>> {
            net.functions().into_iter().map(|f| function_potential(f, net)).collect()
        };
        Ok(Self {
            dmn,
            prior_base: pots(dmn.prior()),
            trans_base: pots(dmn.transition()),
            prior_cpd: cpd_indices(dmn.prior(), n, 0),
            trans_cpd: cpd_indices(dmn.transition(), n, n),
            sliced,
            opts,
            ignore_constraints: false,
        })
    }

    pub fn dmn(&self) -> &'a DynamicMixedNetwork<S> {
        self.dmn
    }

    pub fn template(&self, t: usize) -> &SliceTemplate {
        if t == 0 {
            &self.sliced.prior
        } else {
            &self.sliced.transition
        }
    }

    fn net(&self, t: usize) -> &MixedNetwork<S> {
        if t == 0 {
            self.dmn.prior()
        } else {
            self.dmn.transition()
        }
    }

    /// Template-side id of a state variable's slice-`t` copy.
    pub fn id_at(&self, t: usize, v: VarId) -> VarId {
        if t == 0 {
            v
        } else {
            self.dmn.cur(v)
        }
    }

    /// Cluster holding the CPD of `v`'s slice-`t` copy.
    pub fn home(&self, t: usize, v: VarId) -> Option<usize> {
        let f = if t == 0 { self.prior_cpd[v.0] } else { self.trans_cpd[v.0] }?;
        self.template(t).graph.home_of(f)
    }

    /// Evidence in template ids: `cur` on slice-`t` copies and, for `t > 0`,
    /// `prev` on previous-slice copies.
    pub fn slice_evidence(&self, t: usize, cur: &Evidence<S>, prev: &Evidence<S>) -> Evidence<S> {
        let mut ev: Evidence<S> = cur.iter().map(|(&v, x)| (self.id_at(t, v), *x)).collect();
        if t > 0 {
            ev.extend(prev.iter().map(|(&v, x)| (v, *x)));
        }
        ev
    }

    /// Function potentials of slice `t`, conditioned on the evidence. A
    /// missing observation of a leaf drops its CPD; any other missing value
    /// of a removed variable is an error.
    pub fn potentials(
        &self,
        t: usize,
        cur: &Evidence<S>,
        prev: &Evidence<S>,
        backward: &[HybridPotential<S>],
    ) -> Result<Vec<Option<HybridPotential<S>>>> {
        let net = self.net(t);
        let template = self.template(t);
        let mut dropped = Vec::new();
        for &v in &self.sliced.removed {
            if cur.contains_key(&v) {
                continue;
            }
            let id = self.id_at(t, v);
            let leaf = net.children(id).is_empty();
            if self.dmn.is_observed(v) && leaf {
                let f = if t == 0 { self.prior_cpd[v.0] } else { self.trans_cpd[v.0] };
                dropped.extend(f);
            } else {
                return Err(HdmnError::Model(format!(
                    "no value for {} at t={t}",
                    self.dmn.state()[v.0].name
                )));
            }
        }
        if t > 0 {
            for &v in &self.sliced.removed {
                if self.dmn.interface().contains(&v) && !prev.contains_key(&v) {
                    return Err(HdmnError::Model(format!(
                        "no previous-slice value for {} at t={t}",
                        self.dmn.state()[v.0].name
                    )));
                }
            }
        }
        let ev = self.slice_evidence(t, cur, prev);
        let base = if t == 0 { &self.prior_base } else { &self.trans_base };
        let funcs = net.functions();
        let mut pots = Vec::with_capacity(template.skeleton.scopes().len());
        for (f, p) in base.iter().enumerate() {
            let skip = dropped.contains(&f)
                || (self.ignore_constraints && matches!(funcs[f], Function::Constraint(_)));
            pots.push(if skip { None } else { Some(p.condition(&ev)?) });
        }
        if template.backward_scopes.len() != backward.len() {
            return Err(HdmnError::Internal(format!(
                "expected {} interface beliefs, got {}",
                template.backward_scopes.len(),
                backward.len()
            )));
        }
        for b in backward {
            pots.push(Some(b.condition(&ev)?));
        }
        for scope in &template.forward_scopes {
            pots.push(Some(vacuous(scope, net)));
        }
        debug_assert_eq!(pots.len(), template.skeleton.scopes().len());
        Ok(pots)
    }

    /// Propagate slice `t`. `backward` holds the interface beliefs from
    /// slice `t − 1` (ignored at `t = 0`).
    pub fn step(
        &self,
        t: usize,
        cur: &Evidence<S>,
        prev: &Evidence<S>,
        backward: &[HybridPotential<S>],
    ) -> Result<SliceOutcome<S>> {
        let backward = if t == 0 { &[][..] } else { backward };
        let template = self.template(t);
        let graph = &template.graph;
        let pots = self.potentials(t, cur, prev, backward)?;
        let factors = assemble_factors(graph, &pots)?;
        let cal = if graph.is_tree() {
            calibrate_tree(graph, factors)?
        } else {
            calibrate_loopy(graph, factors, &self.opts)?
        };
        let log_z = if graph.is_tree() {
            let z = cal.belief(graph, tree_root(graph))?.log_mass()?;
            if z == S::neg_infinity() {
                return Err(HdmnError::Inconsistent { t: Some(t) });
            }
            Some(z)
        } else {
            None
        };
        let n = self.dmn.num_state();
        let mut forward = Vec::with_capacity(template.forward.len());
        // weak messages may already have collapsed the forward clusters' beliefs
        let mut collapsed = cal.collapsed && !template.forward.is_empty();
        for (k, &c) in template.forward.iter().enumerate() {
            let b = cal.belief(graph, c)?;
            let (m, col) = b.marginalize_onto_tracked(&template.forward_scopes[k])?;
            collapsed |= col;
            if m.is_all_zero() {
                return Err(HdmnError::Inconsistent { t: Some(t) });
            }
            let (m, _) = m.normalized()?;
            forward.push(if t == 0 { m } else { m.relabel(|v| VarId(v.0 - n)) });
        }
        Ok(SliceOutcome {
            t,
            cal,
            log_z,
            forward,
            collapsed,
        })
    }

    /// Marginals of the unremoved state variables, read from the cluster
    /// holding each variable's CPD. Discrete evidence gives point masses.
    pub fn marginals(&self, out: &SliceOutcome<S>, cur: &Evidence<S>) -> Result<BTreeMap<VarId, Marginal<S>>> {
        let t = out.t;
        let graph = &self.template(t).graph;
        let mut beliefs: BTreeMap<usize, HybridPotential<S>> = BTreeMap::new();
        let mut res = BTreeMap::new();
        for (i, var) in self.dmn.state().iter().enumerate() {
            let v = VarId(i);
            match cur.get(&v) {
                Some(Value::Discrete(x)) => {
                    res.insert(v, Marginal::point(var.card().unwrap_or(1), *x));
                    continue;
                }
                Some(Value::Continuous(_)) => continue,
                None => {}
            }
            if self.sliced.removed.contains(&v) {
                continue;
            }
            let id = self.id_at(t, v);
            // home cluster first, then the others holding `v`, smallest first
            let mut candidates: Vec<usize> = self.home(t, v).into_iter().collect();
            let mut rest: Vec<usize> = (0..graph.clusters().len())
                .filter(|&c| graph.clusters()[c].vars.contains(&id) && !candidates.contains(&c))
                .collect();
            rest.sort_by_key(|&c| (graph.clusters()[c].vars.len(), c));
            candidates.extend(rest);
            let mut found = None;
            let mut last = None;
            for c in candidates {
                if let std::collections::btree_map::Entry::Vacant(e) = beliefs.entry(c) {
                    let b = out.cal.belief(graph, c)?;
                    if b.is_all_zero() {
                        return Err(HdmnError::Inconsistent { t: Some(t) });
                    }
                    e.insert(b);
                }
                // loopy weak-marginal messages can leave a cluster improper in a
                // continuous variable while another cluster still reads it fine
                match Marginal::of(&beliefs[&c], id) {
                    Ok(m) => {
                        found = Some(m);
                        break;
                    }
                    Err(e @ HdmnError::Degenerate { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            match (found, last) {
                (Some(m), _) => {
                    res.insert(v, m);
                }
                (None, Some(e)) => return Err(e),
                (None, None) => {}
            }
        }
        Ok(res)
    }
}

/// Filter with the slice templates: exact when `i` is `None` (or clamped
/// to the slice width), IJGP(i)-S otherwise.
pub fn slice_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
    i: Option<usize>,
    opts: &PropagationOptions<S>,
) -> Result<Vec<BeliefState<S>>> {
    let engine = SliceEngine::new(dmn, i, &[], *opts)?;
    let empty = Evidence::new();
    let mut out: Vec<BeliefState<S>> = Vec::with_capacity(observations.len());
    let mut loglik = Some(S::zero());
    for (t, cur) in observations.iter().enumerate() {
        let prev = if t == 0 { &empty } else { &observations[t - 1] };
        let backward = out.last().map_or(&[][..], |b| &b.interface[..]);
        let step = engine.step(t, cur, prev, backward).map_err(|e| at_step(e, t))?;
        loglik = match (loglik, step.log_z) {
            (Some(a), Some(z)) => Some(a + z),
            _ => None,
        };
        let marginals = engine.marginals(&step, cur).map_err(|e| at_step(e, t))?;
        out.push(BeliefState {
            t,
            marginals,
            interface: step.forward,
            log_likelihood: loglik,
            collapsed: step.collapsed,
            iterations: step.cal.iterations,
            converged: step.cal.converged,
        });
    }
    Ok(out)
}

pub(crate) fn at_step(e: HdmnError, t: usize) -> HdmnError {
    match e {
        HdmnError::Inconsistent { t: None } => HdmnError::Inconsistent { t: Some(t) },
        other => other,
    }
}
