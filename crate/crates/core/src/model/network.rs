use std::collections::{BTreeSet, HashMap};

use super::{ConstraintRelation, Cpd, DiscreteCpd, LgParams, LinearGaussianCpd, VarId, VarKind, VarTable, Variable};
use crate::error::{HdmnError, Result};
use crate::scalar::Real;

/// A model function: either a CPD or a hard constraint.
#[derive(Clone, Copy, Debug)]
pub enum Function<'a, S> {
    Cpd(&'a Cpd<S>),
    Constraint(&'a ConstraintRelation),
}

impl<S: Real> Function<'_, S> {
    pub fn scope(&self) -> Vec<VarId> {
        match self {
            Function::Cpd(c) => c.scope(),
            Function::Constraint(r) => r.scope().to_vec(),
        }
    }
}

/// A hybrid mixed network: a conditional linear-Gaussian Bayesian network
/// plus a set of hard constraints over its discrete variables.
///
/// Variables listed in `inputs` are parentless and carry no CPD; they are
/// conditioned on from outside (the previous-slice copies of a transition
/// network). All other variables have exactly one CPD.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedNetwork<S> {
    vars: Vec<Variable>,
    cpds: Vec<Option<Cpd<S>>>,
    constraints: Vec<ConstraintRelation>,
    inputs: Vec<VarId>,
}

impl<S> VarTable for MixedNetwork<S> {
    fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    fn num_vars(&self) -> usize {
        self.vars.len()
    }
}

impl<S: Real> MixedNetwork<S> {
    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn cpd(&self, id: VarId) -> Option<&Cpd<S>> {
        self.cpds[id.0].as_ref()
    }

    pub fn cpds(&self) -> impl Iterator<Item = &Cpd<S>> {
        self.cpds.iter().flatten()
    }

    pub fn constraints(&self) -> &[ConstraintRelation] {
        &self.constraints
    }

    pub fn inputs(&self) -> &[VarId] {
        &self.inputs
    }

    pub fn is_input(&self, id: VarId) -> bool {
        self.inputs.contains(&id)
    }

    pub fn parents(&self, id: VarId) -> Vec<VarId> {
        self.cpd(id).map(|c| c.parents()).unwrap_or_default()
    }

    pub fn children(&self, id: VarId) -> Vec<VarId> {
        self.cpds()
            .filter(|c| c.parents().contains(&id))
            .map(|c| c.child())
            .collect()
    }

    pub fn discrete_vars(&self) -> Vec<VarId> {
        self.vars.iter().filter(|v| v.is_discrete()).map(|v| v.id).collect()
    }

    pub fn continuous_vars(&self) -> Vec<VarId> {
        self.vars.iter().filter(|v| !v.is_discrete()).map(|v| v.id).collect()
    }

    /// CPDs (in child-id order) followed by constraints. Join-graph
    /// function references index into this list.
    pub fn functions(&self) -> Vec<Function<'_, S>> {
        self.cpds()
            .map(Function::Cpd)
            .chain(self.constraints.iter().map(Function::Constraint))
            .collect()
    }

    pub fn function_scopes(&self) -> Vec<Vec<VarId>> {
        self.functions().iter().map(|f| f.scope()).collect()
    }

    /// Parents-before-children order over all variables.
    pub fn topological_order(&self) -> Vec<VarId> {
        topo_order(&self.vars, |v| self.parents(v)).expect("validated acyclic")
    }

    pub fn cpd_count(&self) -> usize {
        self.cpds.iter().flatten().count()
    }
}

fn topo_order(vars: &[Variable], parents: impl Fn(VarId) -> Vec<VarId>) -> Option<Vec<VarId>> {
    let n = vars.len();
    let mut indeg = vec![0usize; n];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in vars {
        for p in parents(v.id) {
            indeg[v.id.0] += 1;
            kids[p.0].push(v.id.0);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(VarId(i));
        for &k in &kids[i] {
            indeg[k] -= 1;
            if indeg[k] == 0 {
                ready.insert(k);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Incremental construction of a [`MixedNetwork`]; all structural checks
/// run in [`NetworkBuilder::build`].
#[derive(Clone, Debug)]
pub struct NetworkBuilder<S> {
    vars: Vec<Variable>,
    cpds: Vec<Cpd<S>>,
    constraints: Vec<ConstraintRelation>,
    inputs: Vec<VarId>,
}

impl<S: Real> Default for NetworkBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> NetworkBuilder<S> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            cpds: Vec::new(),
            constraints: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            id,
            name: name.into(),
            kind,
        });
        id
    }

    /// Discrete variable with labels `"0".."k-1"`.
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

    /// Mark a variable as a CPD-free conditioning input.
    pub fn mark_input(&mut self, id: VarId) -> &mut Self {
        if !self.inputs.contains(&id) {
            self.inputs.push(id);
        }
        self
    }

    pub fn card(&self, id: VarId) -> usize {
        self.vars[id.0].card().unwrap_or(0)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cpd(&mut self, cpd: impl Into<Cpd<S>>) -> &mut Self {
        self.cpds.push(cpd.into());
        self
    }

    pub fn table(&mut self, child: VarId, parents: &[VarId], table: Vec<S>) -> &mut Self {
        self.cpd(DiscreteCpd::new(child, parents.to_vec(), table))
    }

    pub fn linear_gaussian(
        &mut self,
        child: VarId,
        discrete_parents: &[VarId],
        continuous_parents: &[VarId],
        params: Vec<LgParams<S>>,
    ) -> &mut Self {
        self.cpd(LinearGaussianCpd::new(
            child,
            discrete_parents.to_vec(),
            continuous_parents.to_vec(),
            params,
        ))
    }

    pub fn constraint(&mut self, rel: ConstraintRelation) -> &mut Self {
        self.constraints.push(rel);
        self
    }

    pub fn build(self) -> Result<MixedNetwork<S>> {
        let n = self.vars.len();
        let mut names = HashMap::new();
        for v in &self.vars {
            if let VarKind::Discrete { labels } = &v.kind {
                if labels.is_empty() {
                    return Err(HdmnError::Model(format!("{} has an empty domain", v.name)));
                }
            }
            if names.insert(v.name.clone(), v.id).is_some() {
                return Err(HdmnError::Model(format!("duplicate variable name {}", v.name)));
            }
        }
        let check_id = |id: VarId| -> Result<()> {
            if id.0 >= n {
                Err(HdmnError::Model(format!("unknown variable {id}")))
            } else {
                Ok(())
            }
        };
        let mut cpds: Vec<Option<Cpd<S>>> = vec![None; n];
        for cpd in self.cpds {
            for v in cpd.scope() {
                check_id(v)?;
            }
            let child = cpd.child();
            let name = &self.vars[child.0].name;
            if self.inputs.contains(&child) {
                return Err(HdmnError::Model(format!("input variable {name} cannot have a CPD")));
            }
            if cpds[child.0].is_some() {
                return Err(HdmnError::Model(format!("{name} has more than one CPD")));
            }
            let distinct: BTreeSet<_> = cpd.scope().into_iter().collect();
            if distinct.len() != cpd.scope().len() {
                return Err(HdmnError::Model(format!("CPD of {name} repeats a variable")));
            }
            validate_cpd(&self.vars, &cpd)?;
            cpds[child.0] = Some(cpd);
        }
        for v in &self.vars {
            if cpds[v.id.0].is_none() && !self.inputs.contains(&v.id) {
                return Err(HdmnError::Model(format!("{} has no CPD", v.name)));
            }
        }
        for rel in &self.constraints {
            for (&v, &c) in rel.scope().iter().zip(rel.cards()) {
                check_id(v)?;
                let var = &self.vars[v.0];
                match var.card() {
                    None => {
                        return Err(HdmnError::Model(format!(
                            "constraint over continuous variable {}",
                            var.name
                        )))
                    }
                    Some(k) if k != c => {
                        return Err(HdmnError::Model(format!(
                            "constraint domain for {} is {c}, variable has {k}",
                            var.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        let parents = |id: VarId| cpds[id.0].as_ref().map(|c| c.parents()).unwrap_or_default();
        if topo_order(&self.vars, parents).is_none() {
            return Err(HdmnError::Model("network graph has a directed cycle".into()));
        }
        Ok(MixedNetwork {
            vars: self.vars,
            cpds,
            constraints: self.constraints,
            inputs: self.inputs,
        })
    }
}

fn sum_tol<S: Real>() -> S {
    S::lit(1e-9).max(S::epsilon() * S::lit(64.0))
}

fn validate_cpd<S: Real>(vars: &[Variable], cpd: &Cpd<S>) -> Result<()> {
    let name = |v: VarId| vars[v.0].name.clone();
    match cpd {
        Cpd::Discrete(c) => {
            let k = vars[c.child.0].card().ok_or_else(|| {
                HdmnError::Model(format!("tabular CPD for continuous variable {}", name(c.child)))
            })?;
            let mut rows = 1usize;
            for &p in &c.parents {
                let pk = vars[p.0].card().ok_or_else(|| {
                    HdmnError::Model(format!(
                        "continuous variable {} cannot be a parent of discrete {}",
                        name(p),
                        name(c.child)
                    ))
                })?;
                rows *= pk;
            }
            if c.table.len() != rows * k {
                return Err(HdmnError::Model(format!(
                    "CPD of {} has {} entries, expected {}",
                    name(c.child),
                    c.table.len(),
                    rows * k
                )));
            }
            for (r, row) in c.table.chunks(k).enumerate() {
                if row.iter().any(|p| !(*p >= S::zero() && *p <= S::one())) {
                    return Err(HdmnError::Model(format!(
                        "CPD of {} row {r} has an entry outside [0,1]",
                        name(c.child)
                    )));
                }
                let s: S = row.iter().copied().sum();
                if (s - S::one()).abs() > sum_tol() {
                    return Err(HdmnError::Model(format!(
                        "CPD of {} row {r} sums to {s}",
                        name(c.child)
                    )));
                }
            }
        }
        Cpd::LinearGaussian(c) => {
            if vars[c.child.0].is_discrete() {
                return Err(HdmnError::Model(format!(
                    "linear-Gaussian CPD for discrete variable {}",
                    name(c.child)
                )));
            }
            let mut rows = 1usize;
            for &p in &c.discrete_parents {
                rows *= vars[p.0].card().ok_or_else(|| {
                    HdmnError::Model(format!("{} listed as discrete parent but is continuous", name(p)))
                })?;
            }
            for &p in &c.continuous_parents {
                if vars[p.0].is_discrete() {
                    return Err(HdmnError::Model(format!(
                        "{} listed as continuous parent but is discrete",
                        name(p)
                    )));
                }
            }
            if c.params.len() != rows {
                return Err(HdmnError::Model(format!(
                    "CPD of {} has {} parameter rows, expected {rows}",
                    name(c.child),
                    c.params.len()
                )));
            }
            for p in &c.params {
                if p.coefficients.len() != c.continuous_parents.len() {
                    return Err(HdmnError::Model(format!(
                        "CPD of {}: coefficient vector length {} != {}",
                        name(c.child),
                        p.coefficients.len(),
                        c.continuous_parents.len()
                    )));
                }
                if !(p.variance > S::zero()) || !p.variance.is_finite() {
                    return Err(HdmnError::Model(format!(
                        "CPD of {}: variance must be positive",
                        name(c.child)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_continuous_parent_of_discrete() {
        let mut b = NetworkBuilder::<f64>::new();
        let z = b.continuous("z");
        let d = b.discrete("d", 2);
        b.linear_gaussian(z, &[], &[], vec![LgParams::new(0.0, vec![], 1.0)]);
        b.table(d, &[z], vec![0.5, 0.5]);
        assert!(matches!(b.build(), Err(HdmnError::Model(_))));
    }

    #[test]
    fn rejects_cycle_and_missing_cpd() {
        let mut b = NetworkBuilder::<f64>::new();
        let a = b.discrete("a", 2);
        let c = b.discrete("c", 2);
        b.table(a, &[c], vec![0.5; 4]);
        b.table(c, &[a], vec![0.5; 4]);
        assert!(b.build().is_err());

        let mut b = NetworkBuilder::<f64>::new();
        b.discrete("a", 2);
        assert!(b.build().is_err());
    }

    #[test]
    fn rejects_bad_rows() {
        let mut b = NetworkBuilder::<f64>::new();
        let a = b.discrete("a", 2);
        b.table(a, &[], vec![0.5, 0.6]);
        assert!(b.build().is_err());
        let mut b = NetworkBuilder::<f64>::new();
        let z = b.continuous("z");
        b.linear_gaussian(z, &[], &[], vec![LgParams::new(0.0, vec![], 0.0)]);
        assert!(b.build().is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut b = NetworkBuilder::<f64>::new();
        let a = b.discrete("a", 2);
        let a2 = b.discrete("a", 2);
        b.table(a, &[], vec![0.5, 0.5]).table(a2, &[], vec![0.5, 0.5]);
        assert!(b.build().is_err());
    }

    #[test]
    fn functions_list_cpds_then_constraints() {
        let mut b = NetworkBuilder::<f64>::new();
        let a = b.discrete("a", 2);
        let c = b.discrete("c", 2);
        b.table(a, &[], vec![0.5, 0.5]).table(c, &[a], vec![0.5; 4]);
        b.constraint(ConstraintRelation::new(vec![a, c], vec![2, 2], vec![vec![0, 0]]).unwrap());
        let net = b.build().unwrap();
        let scopes = net.function_scopes();
        assert_eq!(scopes, vec![vec![a], vec![a, c], vec![a, c]]);
        assert_eq!(net.topological_order(), vec![a, c]);
        assert_eq!(net.children(a), vec![c]);
    }
}
