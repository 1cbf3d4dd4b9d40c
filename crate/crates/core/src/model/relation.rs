use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::VarId;
use crate::error::{HdmnError, Result};

/// A hard constraint: the set of allowed value tuples over a discrete scope.
///
/// Tuples are kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRelation {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    tuples: Vec<Vec<usize>>,
}

impl ConstraintRelation {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, tuples: Vec<Vec<usize>>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(HdmnError::Model("relation scope/cards length mismatch".into()));
        }
        let distinct: BTreeSet<_> = scope.iter().collect();
        if distinct.len() != scope.len() {
            return Err(HdmnError::Model("relation scope repeats a variable".into()));
        }
        if cards.contains(&0) {
            return Err(HdmnError::Model("relation over empty domain".into()));
        }
        for t in &tuples {
            if t.len() != scope.len() {
                return Err(HdmnError::Model(format!(
                    "tuple {t:?} has arity {} but scope has {}",
                    t.len(),
                    scope.len()
                )));
            }
            if let Some((i, _)) = t.iter().zip(&cards).enumerate().find(|(_, (v, c))| *v >= *c) {
                return Err(HdmnError::Model(format!(
                    "tuple {t:?}: value out of domain for {}",
                    scope[i]
                )));
            }
        }
        let tuples: BTreeSet<Vec<usize>> = tuples.into_iter().collect();
        Ok(Self {
            scope,
            cards,
            tuples: tuples.into_iter().collect(),
        })
    }

    /// Relation holding every tuple for which `allowed` returns true.
    pub fn from_predicate(
        scope: Vec<VarId>,
        cards: Vec<usize>,
        mut allowed: impl FnMut(&[usize]) -> bool,
    ) -> Result<Self> {
        let mut tuples = Vec::new();
        for_each_tuple(&cards, |t| {
            if allowed(t) {
                tuples.push(t.to_vec());
            }
        });
        Self::new(scope, cards, tuples)
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn allows(&self, tuple: &[usize]) -> bool {
        self.tuples
            .binary_search_by(|t| t.as_slice().cmp(tuple))
            .is_ok()
    }

    /// Check against a full assignment indexed by variable id.
    pub fn allows_assignment(&self, value_of: impl Fn(VarId) -> usize) -> bool {
        let t: Vec<usize> = self.scope.iter().map(|&v| value_of(v)).collect();
        self.allows(&t)
    }

    /// Natural join: tuples over the union scope agreeing on shared variables.
    pub fn join(&self, other: &Self) -> Result<Self> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            match self.scope.iter().position(|s| s == v) {
                Some(i) if self.cards[i] != *c => {
                    return Err(HdmnError::Model(format!("domain mismatch for {v} in join")))
                }
                Some(_) => {}
                None => {
                    scope.push(*v);
                    cards.push(*c);
                }
            }
        }
        let shared: Vec<(usize, usize)> = other
            .scope
            .iter()
            .enumerate()
            .filter_map(|(j, v)| self.scope.iter().position(|s| s == v).map(|i| (i, j)))
            .collect();
        let extra: Vec<usize> = (0..other.scope.len())
            .filter(|j| !shared.iter().any(|&(_, s)| s == *j))
            .collect();
        let mut tuples = Vec::new();
        for a in &self.tuples {
            for b in &other.tuples {
                if shared.iter().all(|&(i, j)| a[i] == b[j]) {
                    let mut t = a.clone();
                    t.extend(extra.iter().map(|&j| b[j]));
                    tuples.push(t);
                }
            }
        }
        Self::new(scope, cards, tuples)
    }

    /// Projection onto `onto` (in the given order); variables absent from
    /// the scope are ignored.
    pub fn project(&self, onto: &[VarId]) -> Self {
        let idx: Vec<usize> = onto
            .iter()
            .filter_map(|v| self.scope.iter().position(|s| s == v))
            .collect();
        let scope = idx.iter().map(|&i| self.scope[i]).collect();
        let cards = idx.iter().map(|&i| self.cards[i]).collect();
        let tuples: BTreeSet<Vec<usize>> = self
            .tuples
            .iter()
            .map(|t| idx.iter().map(|&i| t[i]).collect())
            .collect();
        Self {
            scope,
            cards,
            tuples: tuples.into_iter().collect(),
        }
    }

    /// Replace variable ids (e.g. when unrolling a template).
    pub fn relabel(&self, map: impl Fn(VarId) -> VarId) -> Self {
        Self {
            scope: self.scope.iter().map(|&v| map(v)).collect(),
            cards: self.cards.clone(),
            tuples: self.tuples.clone(),
        }
    }
}

/// Row-major enumeration (last position fastest).
pub fn for_each_tuple(cards: &[usize], mut f: impl FnMut(&[usize])) {
    if cards.contains(&0) {
        return;
    }
    let mut t = vec![0usize; cards.len()];
    loop {
        f(&t);
        let mut i = cards.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < cards[i] {
                break;
            }
            t[i] = 0;
        }
    }
}
