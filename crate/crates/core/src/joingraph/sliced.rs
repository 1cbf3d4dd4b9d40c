use std::collections::BTreeSet;

use super::{build_join_graph, build_join_tree, elimination_order, JoinGraph, Skeleton};
use crate::error::{HdmnError, Result};
use crate::model::{DynamicMixedNetwork, VarId};
use crate::scalar::Real;

/// Join graph of one slice network plus the extra interface factors that
/// carry beliefs between slices.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceTemplate {
    pub skeleton: Skeleton,
    pub order: Vec<VarId>,
    pub graph: JoinGraph,
    /// Number of network functions; interface factors are indexed after them.
    pub num_functions: usize,
    /// Scopes of the incoming belief factors (previous-slice ids).
    pub backward_scopes: Vec<Vec<VarId>>,
    pub backward: Vec<usize>,
    /// Scopes of the unit factors whose clusters yield the outgoing beliefs.
    pub forward_scopes: Vec<Vec<VarId>>,
    pub forward: Vec<usize>,
}

impl SliceTemplate {
    fn build(
        base: Skeleton,
        num_functions: usize,
        backward_scopes: Vec<Vec<VarId>>,
        forward_scopes: Vec<Vec<VarId>>,
        i: Option<usize>,
    ) -> Result<Self> {
        let mut skeleton = base;
        let b0 = skeleton.push_scopes(backward_scopes.clone());
        let f0 = skeleton.push_scopes(forward_scopes.clone());
        let order = elimination_order(&skeleton);
        let graph = match i {
            Some(i) => build_join_graph(&skeleton, &order, i)?,
            None => build_join_tree(&skeleton, &order)?,
        };
        let home = |f: usize| {
            graph.home_of(f).ok_or_else(|| {
                HdmnError::Construction("interface variables not covered by any cluster".into())
            })
        };
        let backward = (0..backward_scopes.len()).map(|k| home(b0 + k)).collect::<Result<_>>()?;
        let forward = (0..forward_scopes.len()).map(|k| home(f0 + k)).collect::<Result<_>>()?;
        Ok(Self {
            skeleton,
            order,
            graph,
            num_functions,
            backward_scopes,
            backward,
            forward_scopes,
            forward,
        })
    }

    pub fn backward_index(&self, k: usize) -> usize {
        self.num_functions + k
    }

    pub fn forward_index(&self, k: usize) -> usize {
        self.num_functions + self.backward_scopes.len() + k
    }
}

/// Slice templates for the prior and the transition network, built once
/// and reused at every time step.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicedJoinGraph {
    pub prior: SliceTemplate,
    pub transition: SliceTemplate,
    /// Interface groups as state ids.
    pub groups: Vec<Vec<VarId>>,
    /// State variables left out of the templates (observed or conditioned).
    pub removed: Vec<VarId>,
    pub requested_i: Option<usize>,
    /// `None` means the exact (single interface clique) template.
    pub effective_i: Option<usize>,
}

impl SlicedJoinGraph {
    /// State variables carried between slices.
    pub fn interface(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.groups.iter().flatten().copied().collect();
        v.sort();
        v
    }
}

/// Build the slice templates. `i = None` gives the exact template with the
/// whole interface as one clique; otherwise the interface is split into
/// groups of at most `i + 1` discrete variables. `removed` lists state
/// variables conditioned away on top of the observed ones. A requested `i`
/// above the width of the exact template is clamped with a warning.
pub fn paste_interfaces<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    i: Option<usize>,
    removed: &[VarId],
) -> Result<SlicedJoinGraph> {
    if i == Some(0) {
        return Err(HdmnError::Parameter("i-bound must be at least 1".into()));
    }
    let n = dmn.num_state();
    let mut gone: BTreeSet<VarId> = dmn.observed().iter().copied().collect();
    gone.extend(removed);
    let interface: Vec<VarId> = dmn
        .interface()
        .iter()
        .copied()
        .filter(|v| !gone.contains(v))
        .collect();
    let trans = dmn.transition();
    let mut drop: Vec<VarId> = gone.iter().flat_map(|&v| [v, dmn.cur(v)]).collect();
    drop.extend((0..n).map(VarId).filter(|v| !interface.contains(v)));
    let base = Skeleton::from_network(trans).without(&drop);
    let nf = base.scopes().len();
    let prior_gone: Vec<VarId> = gone.iter().copied().collect();
    let prior_base = Skeleton::from_network(dmn.prior()).without(&prior_gone);
    let pnf = prior_base.scopes().len();

    let build = |groups: &[Vec<VarId>], i: Option<usize>| -> Result<(SliceTemplate, SliceTemplate)> {
        let back: Vec<Vec<VarId>> = groups.to_vec();
        let fwd: Vec<Vec<VarId>> = groups
            .iter()
            .map(|g| g.iter().map(|&v| dmn.cur(v)).collect())
            .collect();
        let t = SliceTemplate::build(base.clone(), nf, back, fwd, i)?;
        let p = SliceTemplate::build(prior_base.clone(), pnf, Vec::new(), groups.to_vec(), i)?;
        Ok((t, p))
    };

    let whole = if interface.is_empty() {
        Vec::new()
    } else {
        vec![interface.clone()]
    };
    let (exact_t, exact_p) = build(&whole, None)?;
    let cap = exact_t.graph.discrete_width().max(exact_p.graph.discrete_width()).max(1);
    let effective = match i {
        None => None,
        Some(i) if i >= cap => {
            if i > cap {
                log::warn!("i-bound {i} exceeds the slice width {cap}; using {cap}");
            }
            None
        }
        Some(i) => Some(i),
    };
    let (transition, prior, groups) = match effective {
        None => (exact_t, exact_p, whole),
        Some(i) => {
            let groups = partition_interface(dmn, &base, &interface, i);
            let (t, p) = build(&groups, Some(i))?;
            (t, p, groups)
        }
    };
    Ok(SlicedJoinGraph {
        prior,
        transition,
        groups,
        removed: gone.into_iter().collect(),
        requested_i: i,
        effective_i: effective.or(i.map(|_| cap)),
    })
}

/// Disjoint groups of at most `i + 1` discrete interface variables, grown
/// greedily from the lowest free id by connection strength; continuous
/// interface variables join the group they share the most functions with.
fn partition_interface<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    skel: &Skeleton,
    interface: &[VarId],
    i: usize,
) -> Vec<Vec<VarId>> {
    let weight = |a: VarId, b: VarId| {
        skel.scopes()
            .iter()
            .filter(|s| {
                let has = |v: VarId| s.contains(&v) || s.contains(&dmn.cur(v));
                has(a) && has(b)
            })
            .count()
    };
    let disc: Vec<VarId> = interface.iter().copied().filter(|&v| skel.is_discrete(v)).collect();
    let cont: Vec<VarId> = interface.iter().copied().filter(|&v| !skel.is_discrete(v)).collect();
    let mut free: BTreeSet<VarId> = disc.iter().copied().collect();
    let mut groups: Vec<Vec<VarId>> = Vec::new();
    while let Some(&seed) = free.iter().next() {
        free.remove(&seed);
        let mut g = vec![seed];
        while g.len() < i + 1 {
            let best = free
                .iter()
                .map(|&c| (g.iter().map(|&m| weight(m, c)).sum::<usize>(), std::cmp::Reverse(c)))
                .filter(|&(w, _)| w > 0)
                .max();
            match best {
                Some((_, std::cmp::Reverse(c))) => {
                    free.remove(&c);
                    g.push(c);
                }
                None => break,
            }
        }
        groups.push(g);
    }
    if groups.is_empty() && !cont.is_empty() {
        groups.push(Vec::new());
    }
    for c in cont {
        let best = (0..groups.len())
            .max_by_key(|&k| (groups[k].iter().map(|&m| weight(m, c)).sum::<usize>(), std::cmp::Reverse(k)))
            .expect("at least one group");
        groups[best].push(c);
    }
    for g in &mut groups {
        g.sort();
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DynamicBuilder;

    #[test]
    fn chain_interface_is_one_cluster() {
        let mut b = DynamicBuilder::<f64>::new();
        let x = b.discrete("x", 2);
        b.prior_table(x, &[], vec![0.5, 0.5]);
        b.transition_table(b.cur(x), &[b.prev(x)], vec![0.9, 0.1, 0.2, 0.8]);
        let dmn = b.build().unwrap();
        let s = paste_interfaces(&dmn, None, &[]).unwrap();
        assert_eq!(s.groups, vec![vec![x]]);
        assert_eq!(s.transition.forward.len(), 1);
        assert_eq!(s.transition.forward_scopes, vec![vec![dmn.cur(x)]]);
        s.transition.graph.validate(&s.transition.skeleton).unwrap();
    }

    #[test]
    fn wide_interface_is_split() {
        let mut b = DynamicBuilder::<f64>::new();
        let xs: Vec<VarId> = (0..4).map(|k| b.discrete(format!("x{k}"), 2)).collect();
        for &x in &xs {
            b.prior_table(x, &[], vec![0.5, 0.5]);
        }
        // every current variable depends on all previous ones
        for &x in &xs {
            let parents: Vec<VarId> = xs.iter().map(|&p| b.prev(p)).collect();
            b.transition_table(b.cur(x), &parents, vec![0.5; 32]);
        }
        let dmn = b.build().unwrap();
        let s = paste_interfaces(&dmn, Some(1), &[]).unwrap();
        assert_eq!(s.effective_i, Some(1));
        assert_eq!(s.groups.len(), 2);
        assert!(s.groups.iter().all(|g| g.len() <= 2));
        assert_eq!(s.interface(), xs);
        s.transition.graph.validate(&s.transition.skeleton).unwrap();
        s.prior.graph.validate(&s.prior.skeleton).unwrap();
    }

    #[test]
    fn large_i_is_clamped_to_exact() {
        let mut b = DynamicBuilder::<f64>::new();
        let x = b.discrete("x", 2);
        b.prior_table(x, &[], vec![0.5, 0.5]);
        b.transition_table(b.cur(x), &[b.prev(x)], vec![0.9, 0.1, 0.2, 0.8]);
        let dmn = b.build().unwrap();
        let s = paste_interfaces(&dmn, Some(50), &[]).unwrap();
        assert_eq!(s.effective_i, Some(1));
        assert!(s.transition.graph.is_tree());
    }
}
