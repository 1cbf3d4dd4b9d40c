//! Elimination orders, bucket trees, mini-bucket join graphs, interface
//! templates for dynamic networks and w-cutset selection.

mod cutset;
mod sliced;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{HdmnError, Result};
use crate::model::{MixedNetwork, VarId, VarTable};
use crate::scalar::Real;

pub use cutset::{discrete_width, select_w_cutset, select_w_cutset_grouped};
pub use sliced::{paste_interfaces, SliceTemplate, SlicedJoinGraph};

/// Structure a join graph is built from: the variables to cover, which of
/// them are discrete, and one scope per function (indexed like
/// [`MixedNetwork::functions`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skeleton {
    vars: Vec<VarId>,
    discrete: BTreeSet<VarId>,
    scopes: Vec<Vec<VarId>>,
}

impl Skeleton {
    /// Scope variables are added to `vars` automatically.
    pub fn new(vars: &[VarId], discrete: impl IntoIterator<Item = VarId>, scopes: Vec<Vec<VarId>>) -> Self {
        let mut all: BTreeSet<VarId> = vars.iter().copied().collect();
        let scopes: Vec<Vec<VarId>> = scopes
            .into_iter()
            .map(|mut s| {
                s.sort();
                s.dedup();
                all.extend(&s);
                s
            })
            .collect();
        let discrete = discrete.into_iter().filter(|v| all.contains(v)).collect();
        Self {
            vars: all.into_iter().collect(),
            discrete,
            scopes,
        }
    }

    pub fn from_network<S: Real>(net: &MixedNetwork<S>) -> Self {
        let vars: Vec<VarId> = (0..net.num_vars()).map(VarId).collect();
        Self::new(&vars, net.discrete_vars(), net.function_scopes())
    }

    /// Drop variables everywhere (conditioning); function indices are kept.
    pub fn without(&self, removed: &[VarId]) -> Self {
        let keep = |v: &VarId| !removed.contains(v);
        Self {
            vars: self.vars.iter().copied().filter(keep).collect(),
            discrete: self.discrete.iter().copied().filter(keep).collect(),
            scopes: self
                .scopes
                .iter()
                .map(|s| s.iter().copied().filter(keep).collect())
                .collect(),
        }
    }

    /// Append extra function scopes (e.g. interface factors); returns the
    /// index of the first one.
    pub fn push_scopes(&mut self, extra: impl IntoIterator<Item = Vec<VarId>>) -> usize {
        let first = self.scopes.len();
        for mut s in extra {
            s.sort();
            s.dedup();
            for v in &s {
                if let Err(p) = self.vars.binary_search(v) {
                    self.vars.insert(p, *v);
                }
            }
            self.scopes.push(s);
        }
        first
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn scopes(&self) -> &[Vec<VarId>] {
        &self.scopes
    }

    pub fn is_discrete(&self, v: VarId) -> bool {
        self.discrete.contains(&v)
    }

    pub fn discrete_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.discrete.iter().copied()
    }

    pub fn discrete_count(&self, vars: &[VarId]) -> usize {
        vars.iter().filter(|v| self.discrete.contains(v)).count()
    }

    /// Moral-graph adjacency (variables sharing a function scope).
    pub fn adjacency(&self) -> BTreeMap<VarId, BTreeSet<VarId>> {
        let mut adj: BTreeMap<VarId, BTreeSet<VarId>> =
            self.vars.iter().map(|&v| (v, BTreeSet::new())).collect();
        for s in &self.scopes {
            for &a in s {
                for &b in s {
                    if a != b {
                        adj.get_mut(&a).unwrap().insert(b);
                    }
                }
            }
        }
        adj
    }
}

/// Greedy min-fill order. Continuous variables are eliminated before
/// discrete ones so that clusters toward the root stay purely discrete;
/// ties go to the lowest id.
pub fn elimination_order(skel: &Skeleton) -> Vec<VarId> {
    let mut adj = skel.adjacency();
    let mut order = Vec::with_capacity(adj.len());
    while !adj.is_empty() {
        let any_continuous = adj.keys().any(|v| !skel.is_discrete(*v));
        let best = adj
            .iter()
            .filter(|(v, _)| !any_continuous || !skel.is_discrete(**v))
            .map(|(&v, nb)| (fill_in(&adj, nb), v))
            .min()
            .map(|(_, v)| v)
            .expect("nonempty");
        eliminate(&mut adj, best);
        order.push(best);
    }
    order
}

fn fill_in(adj: &BTreeMap<VarId, BTreeSet<VarId>>, nb: &BTreeSet<VarId>) -> usize {
    let nb: Vec<&VarId> = nb.iter().collect();
    let mut fill = 0;
    for (i, a) in nb.iter().enumerate() {
        for b in &nb[i + 1..] {
            if !adj[*a].contains(*b) {
                fill += 1;
            }
        }
    }
    fill
}

fn eliminate(adj: &mut BTreeMap<VarId, BTreeSet<VarId>>, v: VarId) -> BTreeSet<VarId> {
    let nb = adj.remove(&v).unwrap_or_default();
    for a in &nb {
        let set = adj.get_mut(a).unwrap();
        set.remove(&v);
        set.extend(nb.iter().filter(|b| *b != a));
    }
    nb
}

/// Elimination cliques (variable plus later neighbours) along `order`.
pub fn elimination_cliques(skel: &Skeleton, order: &[VarId]) -> Vec<Vec<VarId>> {
    let mut adj = skel.adjacency();
    order
        .iter()
        .map(|&v| {
            let nb = eliminate(&mut adj, v);
            let mut c: Vec<VarId> = nb.into_iter().collect();
            c.push(v);
            c.sort();
            c
        })
        .collect()
}

/// Induced width over all variables: largest elimination clique minus one.
pub fn induced_width(skel: &Skeleton, order: &[VarId]) -> usize {
    elimination_cliques(skel, order)
        .iter()
        .map(|c| c.len().saturating_sub(1))
        .max()
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    /// Sorted.
    pub vars: Vec<VarId>,
    /// Indices into the skeleton's scopes.
    pub functions: Vec<usize>,
    /// Bucket variable the cluster was created for.
    pub bucket: Option<VarId>,
    /// Holds a function whose scope alone exceeds the i-bound.
    pub oversize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// Message from a (mini-)bucket to a later bucket.
    Arc,
    /// Between mini-buckets of the same bucket.
    Chain,
    /// Joins otherwise disconnected components (empty separator).
    Link,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub sep: Vec<VarId>,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinGraph {
    clusters: Vec<Cluster>,
    edges: Vec<Edge>,
    adjacent: Vec<Vec<usize>>,
    is_tree: bool,
    i_bound: Option<usize>,
    discrete: BTreeSet<VarId>,
}

impl JoinGraph {
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_tree(&self) -> bool {
        self.is_tree
    }

    pub fn i_bound(&self) -> Option<usize> {
        self.i_bound
    }

    /// Edge indices incident to cluster `c`.
    pub fn incident(&self, c: usize) -> &[usize] {
        &self.adjacent[c]
    }

    pub fn other(&self, edge: usize, c: usize) -> usize {
        let e = &self.edges[edge];
        if e.a == c {
            e.b
        } else {
            e.a
        }
    }

    pub fn discrete_count(&self, c: usize) -> usize {
        self.clusters[c]
            .vars
            .iter()
            .filter(|v| self.discrete.contains(v))
            .count()
    }

    /// Largest number of discrete variables in a cluster, minus one.
    pub fn discrete_width(&self) -> usize {
        (0..self.clusters.len())
            .map(|c| self.discrete_count(c))
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// Largest number of continuous variables in a cluster.
    pub fn max_continuous(&self) -> usize {
        (0..self.clusters.len())
            .map(|c| self.clusters[c].vars.len() - self.discrete_count(c))
            .max()
            .unwrap_or(0)
    }

    /// Cluster a function was assigned to.
    pub fn home_of(&self, function: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.functions.contains(&function))
    }

    /// Smallest cluster containing `v` (lowest id on ties).
    pub fn smallest_containing(&self, v: VarId) -> Option<usize> {
        self.clusters
            .iter()
            .filter(|c| c.vars.binary_search(&v).is_ok())
            .min_by_key(|c| (c.vars.len(), c.id))
            .map(|c| c.id)
    }

    /// Check structural invariants against the skeleton it was built from.
    pub fn validate(&self, skel: &Skeleton) -> Result<()> {
        let bad = |m: String| Err(HdmnError::Construction(m));
        let mut seen = vec![0usize; skel.scopes().len()];
        for c in &self.clusters {
            for &f in &c.functions {
                seen[f] += 1;
                if skel.scopes()[f].iter().any(|v| c.vars.binary_search(v).is_err()) {
                    return bad(format!("function {f} not covered by cluster {}", c.id));
                }
            }
            if let Some(i) = self.i_bound {
                if !c.oversize && self.discrete_count(c.id) > i + 1 {
                    return bad(format!("cluster {} exceeds the i-bound", c.id));
                }
            }
        }
        if let Some(f) = seen.iter().position(|&n| n != 1) {
            return bad(format!("function {f} assigned {} times", seen[f]));
        }
        for e in &self.edges {
            for v in &e.sep {
                if self.clusters[e.a].vars.binary_search(v).is_err()
                    || self.clusters[e.b].vars.binary_search(v).is_err()
                {
                    return bad(format!("separator variable {v} missing from an endpoint"));
                }
            }
        }
        if self.is_tree && self.edges.len() + 1 != self.clusters.len() {
            return bad("tree has the wrong number of edges".into());
        }
        for &v in skel.vars() {
            let holders: Vec<usize> = self
                .clusters
                .iter()
                .filter(|c| c.vars.binary_search(&v).is_ok())
                .map(|c| c.id)
                .collect();
            if holders.is_empty() {
                return bad(format!("variable {v} not covered"));
            }
            // connectivity through edges whose separator carries v
            let mut reached = BTreeSet::from([holders[0]]);
            let mut stack = vec![holders[0]];
            while let Some(c) = stack.pop() {
                for &ei in &self.adjacent[c] {
                    let e = &self.edges[ei];
                    if e.sep.contains(&v) {
                        let o = self.other(ei, c);
                        if reached.insert(o) {
                            stack.push(o);
                        }
                    }
                }
            }
            if holders.iter().any(|h| !reached.contains(h)) {
                return bad(format!("clusters holding {v} are not connected"));
            }
        }
        Ok(())
    }

    /// Graphviz rendering; `name` labels variables.
    pub fn to_dot(&self, name: impl Fn(VarId) -> String) -> String {
        let list = |vs: &[VarId]| vs.iter().map(|&v| name(v)).collect::<Vec<_>>().join(",");
        let mut s = String::from("graph joingraph {\n  node [shape=box];\n");
        for c in &self.clusters {
            writeln!(s, "  c{} [label=\"{}: {}\"];", c.id, c.id, list(&c.vars)).unwrap();
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::Arc => "solid",
                EdgeKind::Chain => "dashed",
                EdgeKind::Link => "dotted",
            };
            writeln!(s, "  c{} -- c{} [label=\"{}\", style={style}];", e.a, e.b, list(&e.sep)).unwrap();
        }
        s.push_str("}\n");
        s
    }
}

struct Item {
    scope: Vec<VarId>,
    function: Option<usize>,
    from: Option<usize>,
}

/// Bucket tree along `order`: one cluster per variable, holding the
/// functions whose earliest-eliminated variable it is.
pub fn build_join_tree(skel: &Skeleton, order: &[VarId]) -> Result<JoinGraph> {
    bucket_graph(skel, order, None)
}

/// Mini-bucket join graph: every bucket is split into mini-buckets of at
/// most `i + 1` discrete variables (continuous variables do not count).
pub fn build_join_graph(skel: &Skeleton, order: &[VarId], i: usize) -> Result<JoinGraph> {
    if i < 1 {
        return Err(HdmnError::Parameter("i-bound must be at least 1".into()));
    }
    bucket_graph(skel, order, Some(i))
}

fn bucket_graph(skel: &Skeleton, order: &[VarId], i: Option<usize>) -> Result<JoinGraph> {
    let mut sorted = order.to_vec();
    sorted.sort();
    if sorted != skel.vars() {
        return Err(HdmnError::Construction(
            "elimination order is not a permutation of the variables".into(),
        ));
    }
    let pos: BTreeMap<VarId, usize> = order.iter().enumerate().map(|(p, &v)| (v, p)).collect();
    let first = |scope: &[VarId]| scope.iter().map(|v| pos[v]).min();
    let mut buckets: Vec<Vec<Item>> = (0..order.len()).map(|_| Vec::new()).collect();
    let mut constants = Vec::new();
    for (f, scope) in skel.scopes().iter().enumerate() {
        match first(scope) {
            Some(b) => buckets[b].push(Item {
                scope: scope.clone(),
                function: Some(f),
                from: None,
            }),
            None => constants.push(f),
        }
    }
    let limit = i.map_or(usize::MAX, |i| i + 1);
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut edges = Vec::new();
    let mut roots = Vec::new();
    let mut is_tree = true;
    let mut oversize_functions = 0;
    for (b, &x) in order.iter().enumerate() {
        let mut items = std::mem::take(&mut buckets[b]);
        items.sort_by_key(|it| (std::cmp::Reverse(skel.discrete_count(&it.scope)), it.from.is_some()));
        // (union of variables, items, oversize)
        let mut minis: Vec<(BTreeSet<VarId>, Vec<Item>, bool)> = Vec::new();
        for it in items {
            let own = skel.discrete_count(&it.scope);
            if own > limit {
                if it.function.is_some() {
                    oversize_functions += 1;
                }
                let vars = it.scope.iter().copied().collect();
                minis.push((vars, vec![it], true));
                continue;
            }
            let fit = minis.iter().position(|(vars, _, over)| {
                !over && {
                    let union: Vec<VarId> = vars.iter().chain(&it.scope).copied().collect::<BTreeSet<_>>().into_iter().collect();
                    skel.discrete_count(&union) <= limit
                }
            });
            match fit {
                Some(m) => {
                    minis[m].0.extend(&it.scope);
                    minis[m].1.push(it);
                }
                None => minis.push((it.scope.iter().copied().collect(), vec![it], false)),
            }
        }
        if minis.is_empty() {
            minis.push((BTreeSet::from([x]), Vec::new(), false));
        }
        if minis.len() > 1 {
            is_tree = false;
        }
        let mut ids = Vec::new();
        for (vars, its, over) in minis {
            let id = clusters.len();
            let vars: Vec<VarId> = vars.into_iter().collect();
            let mut functions = Vec::new();
            for it in its {
                if let Some(f) = it.function {
                    functions.push(f);
                }
                if let Some(src) = it.from {
                    edges.push(Edge {
                        a: src,
                        b: id,
                        sep: it.scope,
                        kind: EdgeKind::Arc,
                    });
                }
            }
            let msg: Vec<VarId> = vars.iter().copied().filter(|&v| v != x).collect();
            match first(&msg) {
                Some(nb) => buckets[nb].push(Item {
                    scope: msg,
                    function: None,
                    from: Some(id),
                }),
                None => roots.push(id),
            }
            clusters.push(Cluster {
                id,
                vars,
                functions,
                bucket: Some(x),
                oversize: over,
            });
            ids.push(id);
        }
        for w in ids.windows(2) {
            edges.push(Edge {
                a: w[0],
                b: w[1],
                sep: vec![x],
                kind: EdgeKind::Chain,
            });
        }
    }
    if oversize_functions > 0 {
        // warn once; templates are rebuilt per run and would repeat it
        static WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
        let msg = format!(
            "{oversize_functions} function(s) have more than {limit} discrete variables and were given their own clusters"
        );
        if WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
            log::debug!("{msg}");
        } else {
            log::warn!("{msg}");
        }
    }
    if clusters.is_empty() {
        clusters.push(Cluster {
            id: 0,
            vars: Vec::new(),
            functions: Vec::new(),
            bucket: None,
            oversize: false,
        });
        roots.push(0);
    }
    clusters[roots[0]].functions.extend(constants);
    for w in roots.windows(2) {
        edges.push(Edge {
            a: w[0],
            b: w[1],
            sep: Vec::new(),
            kind: EdgeKind::Link,
        });
    }
    let mut adjacent = vec![Vec::new(); clusters.len()];
    for (k, e) in edges.iter().enumerate() {
        adjacent[e.a].push(k);
        adjacent[e.b].push(k);
    }
    Ok(JoinGraph {
        clusters,
        edges,
        adjacent,
        is_tree,
        i_bound: i,
        discrete: skel.discrete.clone(),
    })
}
