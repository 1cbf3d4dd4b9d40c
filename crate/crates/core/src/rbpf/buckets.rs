use std::collections::BTreeSet;

use rand::Rng;

use crate::error::Result;
use crate::joingraph::JoinGraph;
use crate::model::VarId;
use crate::propagate::Calibrated;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
struct Bucket<S> {
    /// Position in sampling order of each discrete variable of the table.
    slots: Vec<usize>,
    strides: Vec<usize>,
    /// Index of the bucket's own variable among `slots`.
    own: usize,
    card: usize,
    logw: Vec<S>,
}

/// Sequential sampler over the cutset built from calibrated cluster
/// beliefs. Bucket `k` holds a table over variable `k` and variables
/// sampled before it.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedBuckets<S> {
    vars: Vec<VarId>,
    buckets: Vec<Bucket<S>>,
}

impl<S: Real> OrderedBuckets<S> {
    /// Sampling order is the reverse of `order` restricted to `cutset`.
    /// Each variable reads the belief of the cluster containing it that
    /// overlaps most with the variables already placed (smaller cluster,
    /// then lower id, on ties).
    pub fn build(
        graph: &JoinGraph,
        cal: &Calibrated<S>,
        order: &[VarId],
        cutset: &[VarId],
    ) -> Result<Self> {
        let vars: Vec<VarId> = order.iter().rev().copied().filter(|v| cutset.contains(v)).collect();
        let mut placed: BTreeSet<VarId> = BTreeSet::new();
        let mut buckets = Vec::with_capacity(vars.len());
        for &x in &vars {
            placed.insert(x);
            let home = graph
                .clusters()
                .iter()
                .filter(|c| c.vars.contains(&x))
                .max_by_key(|c| {
                    let overlap = c.vars.iter().filter(|v| placed.contains(v)).count();
                    (overlap, std::cmp::Reverse(c.vars.len()), std::cmp::Reverse(c.id))
                })
                .ok_or_else(|| crate::HdmnError::Internal(format!("{x} is in no cluster")))?;
            let keep: Vec<VarId> = home.vars.iter().copied().filter(|v| placed.contains(v)).collect();
            let table = cal.belief(graph, home.id)?.marginalize_onto(&keep)?;
            let scope = table.discrete_scope().to_vec();
            let cards = table.cards().to_vec();
            let slots = scope
                .iter()
                .map(|v| vars.iter().position(|u| u == v).expect("placed variable"))
                .collect();
            let own = scope.iter().position(|&v| v == x).expect("own variable in table");
            buckets.push(Bucket {
                slots,
                strides: crate::potential::strides(&cards),
                own,
                card: cards[own],
                logw: (0..table.len()).map(|i| table.log_weight(i)).collect(),
            });
        }
        Ok(Self { vars, buckets })
    }

    /// Variables in sampling order.
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    /// Conditional distribution of bucket `k` given earlier values
    /// (unnormalized log weights).
    pub fn conditional(&self, k: usize, values: &[usize]) -> Vec<S> {
        let b = &self.buckets[k];
        let base: usize = (0..b.slots.len())
            .filter(|&j| j != b.own)
            .map(|j| b.strides[j] * values[b.slots[j]])
            .sum();
        (0..b.card).map(|x| b.logw[base + x * b.strides[b.own]]).collect()
    }

    /// One sequential draw: values in sampling order and `ln Q`. `None` when
    /// some conditioned bucket is all zero.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(Vec<usize>, S)> {
        let mut values = vec![0usize; self.vars.len()];
        let mut log_q = S::zero();
        for k in 0..self.buckets.len() {
            let lw = self.conditional(k, &values);
            let (x, lp) = draw_log(&lw, rng)?;
            values[k] = x;
            log_q = log_q + lp;
        }
        Some((values, log_q))
    }
}

/// Draw an index from unnormalized log weights; returns it with its log
/// probability.
pub(crate) fn draw_log<S: Real, R: Rng + ?Sized>(lw: &[S], rng: &mut R) -> Option<(usize, S)> {
    let top = lw.iter().copied().fold(S::neg_infinity(), S::max);
    if top == S::neg_infinity() || top.is_nan() {
        return None;
    }
    let w: Vec<f64> = lw.iter().map(|&l| (l - top).exp().to_f64_lossy()).collect();
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = w.iter().rposition(|&x| x > 0.0).expect("some positive weight");
    for (i, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc && x > 0.0 {
            pick = i;
            break;
        }
    }
    Some((pick, S::lit((w[pick] / total).ln())))
}
