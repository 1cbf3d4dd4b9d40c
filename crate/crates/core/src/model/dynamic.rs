use super::{
    ConstraintRelation, Cpd, LgParams, MixedNetwork, NetworkBuilder, VarId, VarKind, VarTable,
    Variable,
};
use crate::error::{HdmnError, Result};
use crate::scalar::Real;

const CUR_TAG: usize = 1 << 48;

/// Hybrid dynamic mixed network: a prior network over the state variables
/// and a two-slice transition network.
///
/// Id conventions: state variable `i` is `VarId(i)` in the prior network;
/// in the transition network its previous-slice copy is `VarId(i)` and its
/// current-slice copy is `VarId(n + i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicMixedNetwork<S> {
    state: Vec<Variable>,
    prior: MixedNetwork<S>,
    transition: MixedNetwork<S>,
    observed: Vec<VarId>,
    interface: Vec<VarId>,
}

impl<S: Real> DynamicMixedNetwork<S> {
    /// Assemble from already-built networks. `transition` must have `2n`
    /// variables following the id convention above, with the first `n`
    /// marked as inputs.
    pub fn new(
        prior: MixedNetwork<S>,
        transition: MixedNetwork<S>,
        observed: Vec<VarId>,
    ) -> Result<Self> {
        let n = prior.num_vars();
        if transition.num_vars() != 2 * n {
            return Err(HdmnError::Model(format!(
                "transition network has {} variables, expected {}",
                transition.num_vars(),
                2 * n
            )));
        }
        for i in 0..n {
            let p = prior.variable(VarId(i));
            let a = transition.variable(VarId(i));
            let b = transition.variable(VarId(n + i));
            if a.kind != p.kind || b.kind != p.kind {
                return Err(HdmnError::Model(format!(
                    "slice copies of {} disagree on kind",
                    p.name
                )));
            }
            if !transition.is_input(VarId(i)) || transition.cpd(VarId(i)).is_some() {
                return Err(HdmnError::Model(format!(
                    "previous-slice copy of {} must be a CPD-free root",
                    p.name
                )));
            }
            if transition.is_input(VarId(n + i)) {
                return Err(HdmnError::Model(format!(
                    "current-slice copy of {} must have a CPD",
                    p.name
                )));
            }
        }
        for &o in &observed {
            if o.0 >= n {
                return Err(HdmnError::Model(format!("observed variable {o} out of range")));
            }
        }
        let interface = (0..n)
            .map(VarId)
            .filter(|&v| transition.function_scopes().iter().any(|s| s.contains(&v)))
            .collect();
        let state = prior.variables().to_vec();
        Ok(Self {
            state,
            prior,
            transition,
            observed,
            interface,
        })
    }

    pub fn num_state(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &[Variable] {
        &self.state
    }

    pub fn prior(&self) -> &MixedNetwork<S> {
        &self.prior
    }

    pub fn transition(&self) -> &MixedNetwork<S> {
        &self.transition
    }

    /// State variables observed at every slice.
    pub fn observed(&self) -> &[VarId] {
        &self.observed
    }

    pub fn is_observed(&self, v: VarId) -> bool {
        self.observed.contains(&v)
    }

    /// State variables whose previous-slice copy is used by the transition.
    pub fn interface(&self) -> &[VarId] {
        &self.interface
    }

    pub fn prev(&self, v: VarId) -> VarId {
        v
    }

    pub fn cur(&self, v: VarId) -> VarId {
        VarId(self.state.len() + v.0)
    }

    /// State variable behind a transition-network id.
    pub fn state_of(&self, id: VarId) -> VarId {
        VarId(id.0 % self.state.len())
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.prior.find(name)
    }

    /// Static network over `T + 1` copies of the state; slice `t` variable
    /// `i` gets id `t·n + i` and name `name@t`.
    pub fn unroll(&self, horizon: usize) -> Result<MixedNetwork<S>> {
        if horizon == 0 {
            return Err(HdmnError::Parameter("unroll horizon must be at least 1".into()));
        }
        let n = self.state.len();
        let mut b = NetworkBuilder::new();
        for t in 0..=horizon {
            for v in &self.state {
                b.add_variable(format!("{}@{t}", v.name), v.kind.clone());
            }
        }
        for cpd in self.prior.cpds() {
            b.cpd(cpd.clone());
        }
        for c in self.prior.constraints() {
            b.constraint(c.clone());
        }
        for t in 1..=horizon {
            let map = |id: VarId| {
                if id.0 < n {
                    VarId((t - 1) * n + id.0)
                } else {
                    VarId(t * n + id.0 - n)
                }
            };
            for cpd in self.transition.cpds() {
                b.cpd(cpd.relabel(map));
            }
            for c in self.transition.constraints() {
                b.constraint(c.relabel(map));
            }
        }
        b.build()
    }
}

/// Builder for [`DynamicMixedNetwork`]: declare the state variables, then
/// add prior and transition functions. In transition functions refer to
/// slice copies through [`DynamicBuilder::prev`] and [`DynamicBuilder::cur`].
#[derive(Clone, Debug)]
pub struct DynamicBuilder<S> {
    state: Vec<(String, VarKind)>,
    prior_cpds: Vec<Cpd<S>>,
    prior_constraints: Vec<ConstraintRelation>,
    trans_cpds: Vec<Cpd<S>>,
    trans_constraints: Vec<ConstraintRelation>,
    observed: Vec<VarId>,
}

impl<S: Real> Default for DynamicBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> DynamicBuilder<S> {
    pub fn new() -> Self {
        Self {
            state: Vec::new(),
            prior_cpds: Vec::new(),
            prior_constraints: Vec::new(),
            trans_cpds: Vec::new(),
            trans_constraints: Vec::new(),
            observed: Vec::new(),
        }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        self.state.push((name.into(), kind));
        VarId(self.state.len() - 1)
    }

    pub fn discrete(&mut self, name: impl Into<String>, k: usize) -> VarId {
        let labels = (0..k).map(|i| i.to_string()).collect();
        self.add_variable(name, VarKind::Discrete { labels })
    }

    pub fn discrete_labeled(&mut self, name: impl Into<String>, labels: &[&str]) -> VarId {
        let labels = labels.iter().map(|s| s.to_string()).collect();
        self.add_variable(name, VarKind::Discrete { labels })
    }

    pub fn continuous(&mut self, name: impl Into<String>) -> VarId {
        self.add_variable(name, VarKind::Continuous)
    }

    pub fn card(&self, v: VarId) -> usize {
        match &self.state[v.0].1 {
            VarKind::Discrete { labels } => labels.len(),
            VarKind::Continuous => 0,
        }
    }

    /// Previous-slice copy, for use in transition functions.
    pub fn prev(&self, v: VarId) -> VarId {
        v
    }

    /// Current-slice copy, for use in transition functions.
    pub fn cur(&self, v: VarId) -> VarId {
        VarId(CUR_TAG | v.0)
    }

    pub fn observe(&mut self, v: VarId) -> &mut Self {
        if !self.observed.contains(&v) {
            self.observed.push(v);
        }
        self
    }

    pub fn prior_cpd(&mut self, cpd: impl Into<Cpd<S>>) -> &mut Self {
        self.prior_cpds.push(cpd.into());
        self
    }

    pub fn prior_table(&mut self, child: VarId, parents: &[VarId], table: Vec<S>) -> &mut Self {
        self.prior_cpd(super::DiscreteCpd::new(child, parents.to_vec(), table))
    }

    pub fn prior_linear_gaussian(
        &mut self,
        child: VarId,
        discrete_parents: &[VarId],
        continuous_parents: &[VarId],
        params: Vec<LgParams<S>>,
    ) -> &mut Self {
        self.prior_cpd(super::LinearGaussianCpd::new(
            child,
            discrete_parents.to_vec(),
            continuous_parents.to_vec(),
            params,
        ))
    }

    pub fn prior_constraint(&mut self, rel: ConstraintRelation) -> &mut Self {
        self.prior_constraints.push(rel);
        self
    }

    pub fn transition_cpd(&mut self, cpd: impl Into<Cpd<S>>) -> &mut Self {
        self.trans_cpds.push(cpd.into());
        self
    }

    pub fn transition_table(&mut self, child: VarId, parents: &[VarId], table: Vec<S>) -> &mut Self {
        self.transition_cpd(super::DiscreteCpd::new(child, parents.to_vec(), table))
    }

    pub fn transition_linear_gaussian(
        &mut self,
        child: VarId,
        discrete_parents: &[VarId],
        continuous_parents: &[VarId],
        params: Vec<LgParams<S>>,
    ) -> &mut Self {
        self.transition_cpd(super::LinearGaussianCpd::new(
            child,
            discrete_parents.to_vec(),
            continuous_parents.to_vec(),
            params,
        ))
    }

    pub fn transition_constraint(&mut self, rel: ConstraintRelation) -> &mut Self {
        self.trans_constraints.push(rel);
        self
    }

    pub fn build(self) -> Result<DynamicMixedNetwork<S>> {
        let n = self.state.len();
        let mut prior = NetworkBuilder::new();
        for (name, kind) in &self.state {
            prior.add_variable(name.clone(), kind.clone());
        }
        for c in self.prior_cpds {
            prior.cpd(c);
        }
        for c in self.prior_constraints {
            prior.constraint(c);
        }
        let prior = prior.build()?;

        let mut trans = NetworkBuilder::new();
        for (name, kind) in &self.state {
            let id = trans.add_variable(format!("{name}'"), kind.clone());
            trans.mark_input(id);
        }
        for (name, kind) in &self.state {
            trans.add_variable(name.clone(), kind.clone());
        }
        let map = |id: VarId| {
            if id.0 & CUR_TAG != 0 {
                VarId(n + (id.0 & !CUR_TAG))
            } else {
                id
            }
        };
        for c in self.trans_cpds {
            trans.cpd(c.relabel(map));
        }
        for c in self.trans_constraints {
            trans.constraint(c.relabel(map));
        }
        let trans = trans.build()?;
        DynamicMixedNetwork::new(prior, trans, self.observed)
    }
}
