use std::collections::BTreeSet;

use super::{elimination_cliques, elimination_order, Skeleton};
use crate::model::VarId;

/// Discrete induced width along the default order: the largest number of
/// discrete variables in an elimination clique, minus one.
pub fn discrete_width(skel: &Skeleton) -> usize {
    let order = elimination_order(skel);
    elimination_cliques(skel, &order)
        .iter()
        .map(|c| skel.discrete_count(c))
        .max()
        .unwrap_or(0)
        .saturating_sub(1)
}

/// Greedy w-cutset. Returns the conditioned discrete variables `R` and the
/// remaining variables `Z`.
pub fn select_w_cutset(skel: &Skeleton, w: usize) -> (Vec<VarId>, Vec<VarId>) {
    let groups: Vec<Vec<VarId>> = skel.discrete_vars().map(|v| vec![v]).collect();
    let chosen = select_w_cutset_grouped(skel, w, &groups);
    let r: Vec<VarId> = chosen.iter().map(|&g| groups[g][0]).collect();
    let z = skel.vars().iter().copied().filter(|v| !r.contains(v)).collect();
    let mut r = r;
    r.sort();
    (r, z)
}

/// Greedy w-cutset where each candidate is a group of variables removed
/// together. Repeatedly removes the group that appears in the most
/// over-width elimination cliques; ties go to the highest degree, then to
/// the lowest variable id. Returns chosen group indices in selection order.
pub fn select_w_cutset_grouped(skel: &Skeleton, w: usize, groups: &[Vec<VarId>]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    loop {
        let removed: Vec<VarId> = chosen.iter().flat_map(|&g| groups[g].iter().copied()).collect();
        let rest = skel.without(&removed);
        let order = elimination_order(&rest);
        let over: Vec<BTreeSet<VarId>> = elimination_cliques(&rest, &order)
            .into_iter()
            .filter(|c| rest.discrete_count(c) > w + 1)
            .map(|c| c.into_iter().collect())
            .collect();
        if over.is_empty() {
            return chosen;
        }
        let adj = rest.adjacency();
        let best = groups
            .iter()
            .enumerate()
            .filter(|(g, _)| !chosen.contains(g))
            .map(|(g, members)| {
                let hits = over
                    .iter()
                    .filter(|c| members.iter().any(|v| c.contains(v)))
                    .count();
                let degree: usize = members.iter().map(|v| adj.get(v).map_or(0, |s| s.len())).sum();
                let low = members.iter().min().copied().unwrap_or(VarId(usize::MAX));
                (hits, degree, std::cmp::Reverse(low), g)
            })
            .filter(|&(hits, ..)| hits > 0)
            .max();
        match best {
            Some((.., g)) => chosen.push(g),
            // nothing left that helps; only continuous variables remain over width
            None => return chosen,
        }
    }
}
