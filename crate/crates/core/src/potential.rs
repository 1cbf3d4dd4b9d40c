//! Conditional-Gaussian potentials in canonical form.
//!
//! A [`HybridPotential`] maps every tuple of its discrete scope either to
//! ZERO or to `exp(g + hᵀx − ½ xᵀKx)` over its continuous scope. Scopes are
//! kept sorted by variable id; tuples are row-major with the last discrete
//! variable varying fastest.

use std::collections::BTreeSet;

use crate::error::{HdmnError, Result};
use crate::linalg;
use crate::model::{ConstraintRelation, Cpd, Evidence, Value, VarId, VarTable};
use crate::scalar::{log_sum_exp, Real};

/// One live entry in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct Canonical<S> {
    pub g: S,
    pub h: Vec<S>,
    pub k: Vec<S>,
}

/// Moment-form view of a normalizable entry: total log-mass, mean, covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<S> {
    pub log_mass: S,
    pub mean: Vec<S>,
    pub cov: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridPotential<S> {
    dvars: Vec<VarId>,
    cards: Vec<usize>,
    cvars: Vec<VarId>,
    live: Vec<bool>,
    g: Vec<S>,
    h: Vec<S>,
    k: Vec<S>,
}

pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// For each variable of `target`, its stride inside a table over `src` (0 if absent).
fn strides_in(target: &[VarId], src: &[VarId], src_cards: &[usize]) -> Vec<usize> {
    let s = strides(src_cards);
    target
        .iter()
        .map(|v| src.iter().position(|x| x == v).map_or(0, |i| s[i]))
        .collect()
}

/// Source index for every row-major tuple of `cards`, given per-position strides.
fn index_map(cards: &[usize], src_strides: &[usize]) -> Vec<usize> {
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut t = vec![0usize; cards.len()];
    let mut idx = 0usize;
    for _ in 0..total {
        out.push(idx);
        for j in (0..cards.len()).rev() {
            t[j] += 1;
            idx += src_strides[j];
            if t[j] < cards[j] {
                break;
            }
            idx -= src_strides[j] * cards[j];
            t[j] = 0;
        }
    }
    out
}

fn same_within<S: Real>(a: &[S], b: &[S]) -> bool {
    let tol = S::epsilon().sqrt() * S::lit(1e-2);
    a.iter()
        .zip(b)
        .all(|(x, y)| (*x - *y).abs() <= tol * (S::one() + x.abs().max(y.abs())))
}

/// Canonical parameters of a (log-)weighted Gaussian in moment form.
pub fn canonical_from_moments<S: Real>(
    log_mass: S,
    mean: &[S],
    cov: &[S],
) -> Option<Canonical<S>> {
    let n = mean.len();
    let (k, logdet_cov) = linalg::spd_inverse(cov, n)?;
    let h = linalg::mat_vec(&k, n, mean);
    let quad = linalg::dot(mean, &h);
    let g = log_mass - S::lit(0.5) * quad - S::lit(0.5) * (S::lit(n as f64) * S::ln_2pi() + logdet_cov);
    Some(Canonical { g, h, k })
}

/// Moment form of a canonical entry, or `None` if `K` is not positive definite.
pub fn moments_from_canonical<S: Real>(g: S, h: &[S], k: &[S]) -> Option<Moments<S>> {
    let n = h.len();
    if n == 0 {
        return Some(Moments {
            log_mass: g,
            mean: Vec::new(),
            cov: Vec::new(),
        });
    }
    let (cov, logdet_k) = linalg::spd_inverse(k, n)?;
    let mean = linalg::mat_vec(&cov, n, h);
    let log_mass =
        g + S::lit(0.5) * (S::lit(n as f64) * S::ln_2pi() - logdet_k + linalg::dot(h, &mean));
    Some(Moments {
        log_mass,
        mean,
        cov,
    })
}

impl<S: Real> HybridPotential<S> {
    fn blank(dvars: Vec<VarId>, cards: Vec<usize>, cvars: Vec<VarId>) -> Self {
        let m: usize = cards.iter().product();
        let n = cvars.len();
        Self {
            dvars,
            cards,
            cvars,
            live: vec![false; m],
            g: vec![S::zero(); m],
            h: vec![S::zero(); m * n],
            k: vec![S::zero(); m * n * n],
        }
    }

    /// The multiplicative identity: empty scope, weight 1.
    pub fn unit() -> Self {
        let mut p = Self::blank(Vec::new(), Vec::new(), Vec::new());
        p.live[0] = true;
        p
    }

    /// Constant potential (weight 1 everywhere) over a discrete scope.
    pub fn uniform(dvars: &[VarId], cards: &[usize]) -> Self {
        let m: usize = cards.iter().product();
        Self::from_log_table(dvars, cards, vec![S::zero(); m])
            .expect("uniform table has matching size")
    }

    /// Build from entries listed row-major over `dvars` in the given order,
    /// each over `cvars` in the given order. Scopes are sorted internally.
    pub fn from_entries(
        dvars: &[VarId],
        cards: &[usize],
        cvars: &[VarId],
        entries: Vec<Option<Canonical<S>>>,
    ) -> Result<Self> {
        let m: usize = cards.iter().product();
        let n = cvars.len();
        if dvars.len() != cards.len() || entries.len() != m {
            return Err(HdmnError::Internal(format!(
                "potential table has {} entries, expected {m}",
                entries.len()
            )));
        }
        let mut p = Self::blank(dvars.to_vec(), cards.to_vec(), cvars.to_vec());
        for (i, e) in entries.into_iter().enumerate() {
            if let Some(c) = e {
                if c.h.len() != n || c.k.len() != n * n {
                    return Err(HdmnError::Internal("canonical entry dimension mismatch".into()));
                }
                p.live[i] = true;
                p.g[i] = c.g;
                p.h[i * n..(i + 1) * n].copy_from_slice(&c.h);
                p.k[i * n * n..(i + 1) * n * n].copy_from_slice(&c.k);
            }
        }
        Ok(p.sorted())
    }

    /// Discrete potential from log-weights; `-inf` entries become ZERO.
    pub fn from_log_table(dvars: &[VarId], cards: &[usize], logw: Vec<S>) -> Result<Self> {
        let entries = logw
            .into_iter()
            .map(|g| {
                (g > S::neg_infinity()).then(|| Canonical {
                    g,
                    h: Vec::new(),
                    k: Vec::new(),
                })
            })
            .collect();
        Self::from_entries(dvars, cards, &[], entries)
    }

    /// Discrete potential from nonnegative weights; exact zeros become ZERO.
    pub fn from_table(dvars: &[VarId], cards: &[usize], weights: &[S]) -> Result<Self> {
        Self::from_log_table(
            dvars,
            cards,
            weights
                .iter()
                .map(|&w| if w > S::zero() { w.ln() } else { S::neg_infinity() })
                .collect(),
        )
    }

    /// 0/1 potential of a constraint relation.
    pub fn from_relation(rel: &ConstraintRelation) -> Self {
        let cards = rel.cards();
        let st = strides(cards);
        let m: usize = cards.iter().product();
        let mut logw = vec![S::neg_infinity(); m];
        for t in rel.tuples() {
            let i: usize = t.iter().zip(&st).map(|(v, s)| v * s).sum();
            logw[i] = S::zero();
        }
        Self::from_log_table(rel.scope(), cards, logw).expect("relation table has matching size")
    }

    /// Canonical-form potential of a CPD.
    pub fn from_cpd(cpd: &Cpd<S>, vars: &(impl VarTable + ?Sized)) -> Self {
        match cpd {
            Cpd::Discrete(c) => {
                let mut scope = c.parents.clone();
                scope.push(c.child);
                let cards: Vec<usize> = scope.iter().map(|&v| vars.card(v)).collect();
                Self::from_table(&scope, &cards, &c.table).expect("validated CPD size")
            }
            Cpd::LinearGaussian(c) => {
                let cards: Vec<usize> = c.discrete_parents.iter().map(|&v| vars.card(v)).collect();
                let mut cvars = vec![c.child];
                cvars.extend(&c.continuous_parents);
                let n = cvars.len();
                let half = S::lit(0.5);
                let entries = c
                    .params
                    .iter()
                    .map(|p| {
                        // x − βᵀz − α ~ N(0, γ): quadratic form in (x, z).
                        let mut coef = vec![S::one()];
                        coef.extend(p.coefficients.iter().map(|b| -*b));
                        let prec = S::one() / p.variance;
                        let mut k = vec![S::zero(); n * n];
                        let mut h = vec![S::zero(); n];
                        for i in 0..n {
                            h[i] = coef[i] * p.intercept * prec;
                            for j in 0..n {
                                k[i * n + j] = coef[i] * coef[j] * prec;
                            }
                        }
                        let g = -half * p.intercept * p.intercept * prec
                            - half * (S::ln_2pi() + p.variance.ln());
                        Some(Canonical { g, h, k })
                    })
                    .collect();
                Self::from_entries(&c.discrete_parents, &cards, &cvars, entries)
                    .expect("validated CPD size")
            }
        }
    }

    /// Weighted Gaussian over `cvars` from moments.
    pub fn gaussian(cvars: &[VarId], mean: &[S], cov: &[S], log_mass: S) -> Result<Self> {
        let c = canonical_from_moments(log_mass, mean, cov)
            .ok_or_else(|| HdmnError::Degenerate { vars: cvars.to_vec() })?;
        Self::from_entries(&[], &[], cvars, vec![Some(c)])
    }

    fn sorted(self) -> Self {
        let sorted_d = self.dvars.windows(2).all(|w| w[0] < w[1]);
        let sorted_c = self.cvars.windows(2).all(|w| w[0] < w[1]);
        if sorted_d && sorted_c {
            return self;
        }
        let mut dorder: Vec<usize> = (0..self.dvars.len()).collect();
        dorder.sort_by_key(|&i| self.dvars[i]);
        let mut corder: Vec<usize> = (0..self.cvars.len()).collect();
        corder.sort_by_key(|&i| self.cvars[i]);
        let dvars: Vec<VarId> = dorder.iter().map(|&i| self.dvars[i]).collect();
        let cards: Vec<usize> = dorder.iter().map(|&i| self.cards[i]).collect();
        let cvars: Vec<VarId> = corder.iter().map(|&i| self.cvars[i]).collect();
        let src = index_map(&cards, &strides_in(&dvars, &self.dvars, &self.cards));
        let n = cvars.len();
        let mut out = Self::blank(dvars, cards, cvars);
        for (r, &s) in src.iter().enumerate() {
            out.live[r] = self.live[s];
            out.g[r] = self.g[s];
            for a in 0..n {
                out.h[r * n + a] = self.h[s * n + corder[a]];
                for b in 0..n {
                    out.k[r * n * n + a * n + b] = self.k[s * n * n + corder[a] * n + corder[b]];
                }
            }
        }
        out
    }

    pub fn discrete_scope(&self) -> &[VarId] {
        &self.dvars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn continuous_scope(&self) -> &[VarId] {
        &self.cvars
    }

    pub fn scope(&self) -> Vec<VarId> {
        let mut s: Vec<VarId> = self.dvars.iter().chain(&self.cvars).copied().collect();
        s.sort();
        s
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.dvars.binary_search(&v).is_ok() || self.cvars.binary_search(&v).is_ok()
    }

    /// Number of discrete tuples.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn is_zero(&self, i: usize) -> bool {
        !self.live[i]
    }

    pub fn is_all_zero(&self) -> bool {
        !self.live.iter().any(|&l| l)
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    pub fn entry(&self, i: usize) -> Option<Canonical<S>> {
        let n = self.cvars.len();
        self.live[i].then(|| Canonical {
            g: self.g[i],
            h: self.h[i * n..(i + 1) * n].to_vec(),
            k: self.k[i * n * n..(i + 1) * n * n].to_vec(),
        })
    }

    /// Log-weight `g` of entry `i` (`-inf` for ZERO).
    pub fn log_weight(&self, i: usize) -> S {
        if self.live[i] {
            self.g[i]
        } else {
            S::neg_infinity()
        }
    }

    /// Row-major tuple index of a full discrete assignment (in scope order).
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(strides(&self.cards)).map(|(v, s)| v * s).sum()
    }

    pub fn tuple_of(&self, mut i: usize) -> Vec<usize> {
        let mut t = vec![0; self.cards.len()];
        for j in (0..self.cards.len()).rev() {
            t[j] = i % self.cards[j];
            i /= self.cards[j];
        }
        t
    }

    pub fn entry_moments(&self, i: usize) -> Result<Option<Moments<S>>> {
        if !self.live[i] {
            return Ok(None);
        }
        let n = self.cvars.len();
        moments_from_canonical(
            self.g[i],
            &self.h[i * n..(i + 1) * n],
            &self.k[i * n * n..(i + 1) * n * n],
        )
        .map(Some)
        .ok_or_else(|| HdmnError::Degenerate {
            vars: self.cvars.clone(),
        })
    }

    /// Pointwise product over the union scope.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        for v in &self.dvars {
            if other.cvars.binary_search(v).is_ok() {
                return Err(HdmnError::Model(format!("{v} is discrete in one operand and continuous in the other")));
            }
        }
        for v in &other.dvars {
            if self.cvars.binary_search(v).is_ok() {
                return Err(HdmnError::Model(format!("{v} is discrete in one operand and continuous in the other")));
            }
        }
        let mut dvars = Vec::new();
        let mut cards = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.dvars.len() || j < other.dvars.len() {
            let take_a = j >= other.dvars.len()
                || (i < self.dvars.len() && self.dvars[i] <= other.dvars[j]);
            if take_a {
                if j < other.dvars.len() && self.dvars[i] == other.dvars[j] {
                    if self.cards[i] != other.cards[j] {
                        return Err(HdmnError::Model(format!(
                            "domain size mismatch for {}",
                            self.dvars[i]
                        )));
                    }
                    j += 1;
                }
                dvars.push(self.dvars[i]);
                cards.push(self.cards[i]);
                i += 1;
            } else {
                dvars.push(other.dvars[j]);
                cards.push(other.cards[j]);
                j += 1;
            }
        }
        let cset: BTreeSet<VarId> = self.cvars.iter().chain(&other.cvars).copied().collect();
        let cvars: Vec<VarId> = cset.into_iter().collect();
        let n = cvars.len();
        let amap: Vec<usize> = self.cvars.iter().map(|v| cvars.binary_search(v).unwrap()).collect();
        let bmap: Vec<usize> = other.cvars.iter().map(|v| cvars.binary_search(v).unwrap()).collect();
        let ai = index_map(&cards, &strides_in(&dvars, &self.dvars, &self.cards));
        let bi = index_map(&cards, &strides_in(&dvars, &other.dvars, &other.cards));
        let mut out = Self::blank(dvars, cards, cvars);
        let (na, nb) = (self.cvars.len(), other.cvars.len());
        for r in 0..out.live.len() {
            let (a, b) = (ai[r], bi[r]);
            if !self.live[a] || !other.live[b] {
                continue;
            }
            out.live[r] = true;
            out.g[r] = self.g[a] + other.g[b];
            let h = &mut out.h[r * n..(r + 1) * n];
            for (x, &p) in amap.iter().enumerate() {
                h[p] = h[p] + self.h[a * na + x];
            }
            for (x, &p) in bmap.iter().enumerate() {
                h[p] = h[p] + other.h[b * nb + x];
            }
            let k = &mut out.k[r * n * n..(r + 1) * n * n];
            for (x, &p) in amap.iter().enumerate() {
                for (y, &q) in amap.iter().enumerate() {
                    k[p * n + q] = k[p * n + q] + self.k[a * na * na + x * na + y];
                }
            }
            for (x, &p) in bmap.iter().enumerate() {
                for (y, &q) in bmap.iter().enumerate() {
                    k[p * n + q] = k[p * n + q] + other.k[b * nb * nb + x * nb + y];
                }
            }
        }
        Ok(out)
    }

    pub fn multiply_all<'a>(items: impl IntoIterator<Item = &'a Self>) -> Result<Self> {
        let mut acc = Self::unit();
        for p in items {
            acc = acc.multiply(p)?;
        }
        Ok(acc)
    }

    /// Quotient `self / other` for EP-style message updates. `other`'s scope
    /// must be contained in `self`'s; ZERO in either operand yields ZERO.
    pub fn divide(&self, other: &Self) -> Result<Self> {
        if other.dvars.iter().any(|v| self.dvars.binary_search(v).is_err())
            || other.cvars.iter().any(|v| self.cvars.binary_search(v).is_err())
        {
            return Err(HdmnError::Internal("divisor scope not contained in dividend".into()));
        }
        let n = self.cvars.len();
        let nb = other.cvars.len();
        let bmap: Vec<usize> = other.cvars.iter().map(|v| self.cvars.binary_search(v).unwrap()).collect();
        let bi = index_map(&self.cards, &strides_in(&self.dvars, &other.dvars, &other.cards));
        let mut out = self.clone();
        for r in 0..out.live.len() {
            let b = bi[r];
            if !out.live[r] {
                continue;
            }
            if !other.live[b] {
                out.live[r] = false;
                continue;
            }
            out.g[r] = out.g[r] - other.g[b];
            for (x, &p) in bmap.iter().enumerate() {
                out.h[r * n + p] = out.h[r * n + p] - other.h[b * nb + x];
                for (y, &q) in bmap.iter().enumerate() {
                    out.k[r * n * n + p * n + q] =
                        out.k[r * n * n + p * n + q] - other.k[b * nb * nb + x * nb + y];
                }
            }
        }
        Ok(out)
    }

    /// Marginalize out `elim`, which must be a subset of the scope.
    pub fn marginalize(&self, elim: &[VarId]) -> Result<Self> {
        if let Some(v) = elim.iter().find(|v| !self.contains(**v)) {
            return Err(HdmnError::Internal(format!("cannot eliminate {v}: not in scope")));
        }
        let keep: Vec<VarId> = self.scope().into_iter().filter(|v| !elim.contains(v)).collect();
        self.marginalize_onto(&keep)
    }

    /// Marginal over `keep ∩ scope`.
    pub fn marginalize_onto(&self, keep: &[VarId]) -> Result<Self> {
        self.marginalize_onto_tracked(keep).map(|(p, _)| p)
    }

    /// Like [`Self::marginalize_onto`], also reporting whether any discrete
    /// summation collapsed distinct Gaussians into a moment-matched one.
    pub fn marginalize_onto_tracked(&self, keep: &[VarId]) -> Result<(Self, bool)> {
        let integrated = self.integrate_continuous(keep)?;
        integrated.sum_discrete(keep)
    }

    fn integrate_continuous(&self, keep: &[VarId]) -> Result<Self> {
        let elim: Vec<usize> = (0..self.cvars.len())
            .filter(|&i| !keep.contains(&self.cvars[i]))
            .collect();
        if elim.is_empty() {
            return Ok(self.clone());
        }
        let rest: Vec<usize> = (0..self.cvars.len())
            .filter(|&i| keep.contains(&self.cvars[i]))
            .collect();
        let n = self.cvars.len();
        let (e, r) = (elim.len(), rest.len());
        let cvars: Vec<VarId> = rest.iter().map(|&i| self.cvars[i]).collect();
        let mut out = Self::blank(self.dvars.clone(), self.cards.clone(), cvars);
        let half = S::lit(0.5);
        for t in 0..self.live.len() {
            if !self.live[t] {
                continue;
            }
            let h = &self.h[t * n..(t + 1) * n];
            let k = &self.k[t * n * n..(t + 1) * n * n];
            let kee: Vec<S> = elim.iter().flat_map(|&a| elim.iter().map(move |&b| k[a * n + b])).collect();
            let l = linalg::cholesky(&kee, e).ok_or_else(|| HdmnError::Degenerate {
                vars: elim.iter().map(|&i| self.cvars[i]).collect(),
            })?;
            let he: Vec<S> = elim.iter().map(|&a| h[a]).collect();
            let u = linalg::chol_solve(&l, e, &he);
            // columns of K_EE⁻¹ K_ER
            let cols: Vec<Vec<S>> = rest
                .iter()
                .map(|&b| {
                    let ker: Vec<S> = elim.iter().map(|&a| k[a * n + b]).collect();
                    linalg::chol_solve(&l, e, &ker)
                })
                .collect();
            let mut kk = vec![S::zero(); r * r];
            let mut hh = vec![S::zero(); r];
            for (x, &a) in rest.iter().enumerate() {
                let kre: Vec<S> = elim.iter().map(|&b| k[a * n + b]).collect();
                hh[x] = h[a] - linalg::dot(&kre, &u);
                for (y, &b) in rest.iter().enumerate() {
                    kk[x * r + y] = k[a * n + b] - linalg::dot(&kre, &cols[y]);
                }
            }
            let kk = linalg::clamp_psd(&kk, r).unwrap_or_else(|| {
                let mut s = kk.clone();
                linalg::symmetrize(&mut s, r);
                s
            });
            out.live[t] = true;
            out.g[t] = self.g[t]
                + half * (S::lit(e as f64) * S::ln_2pi() - linalg::chol_logdet(&l, e) + linalg::dot(&he, &u));
            out.h[t * r..(t + 1) * r].copy_from_slice(&hh);
            out.k[t * r * r..(t + 1) * r * r].copy_from_slice(&kk);
        }
        Ok(out)
    }

    fn sum_discrete(&self, keep: &[VarId]) -> Result<(Self, bool)> {
        let kept: Vec<usize> = (0..self.dvars.len())
            .filter(|&i| keep.contains(&self.dvars[i]))
            .collect();
        if kept.len() == self.dvars.len() {
            return Ok((self.clone(), false));
        }
        let dvars: Vec<VarId> = kept.iter().map(|&i| self.dvars[i]).collect();
        let cards: Vec<usize> = kept.iter().map(|&i| self.cards[i]).collect();
        let target = index_map(&self.cards, &strides_in(&self.dvars, &dvars, &cards));
        let m: usize = cards.iter().product();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (src, &dst) in target.iter().enumerate() {
            if self.live[src] {
                groups[dst].push(src);
            }
        }
        let n = self.cvars.len();
        let mut out = Self::blank(dvars, cards, self.cvars.clone());
        let mut collapsed = false;
        for (r, grp) in groups.iter().enumerate() {
            match grp.len() {
                0 => continue,
                1 => {
                    let s = grp[0];
                    out.live[r] = true;
                    out.g[r] = self.g[s];
                    out.h[r * n..(r + 1) * n].copy_from_slice(&self.h[s * n..(s + 1) * n]);
                    out.k[r * n * n..(r + 1) * n * n].copy_from_slice(&self.k[s * n * n..(s + 1) * n * n]);
                    continue;
                }
                _ => {}
            }
            let s0 = grp[0];
            let identical = n == 0
                || grp.iter().all(|&s| {
                    same_within(&self.h[s * n..(s + 1) * n], &self.h[s0 * n..(s0 + 1) * n])
                        && same_within(
                            &self.k[s * n * n..(s + 1) * n * n],
                            &self.k[s0 * n * n..(s0 + 1) * n * n],
                        )
                });
            out.live[r] = true;
            if identical {
                out.g[r] = log_sum_exp(grp.iter().map(|&s| self.g[s]));
                out.h[r * n..(r + 1) * n].copy_from_slice(&self.h[s0 * n..(s0 + 1) * n]);
                out.k[r * n * n..(r + 1) * n * n].copy_from_slice(&self.k[s0 * n * n..(s0 + 1) * n * n]);
                continue;
            }
            collapsed = true;
            let comps: Vec<Moments<S>> = grp
                .iter()
                .map(|&s| self.entry_moments(s).map(|m| m.expect("live")))
                .collect::<Result<_>>()?;
            let c = collapse_mixture(&comps, n).ok_or_else(|| HdmnError::Degenerate {
                vars: self.cvars.clone(),
            })?;
            out.g[r] = c.g;
            out.h[r * n..(r + 1) * n].copy_from_slice(&c.h);
            out.k[r * n * n..(r + 1) * n * n].copy_from_slice(&c.k);
        }
        Ok((out, collapsed))
    }

    /// Instantiate evidence. Variables outside the scope are ignored.
    pub fn condition(&self, evidence: &Evidence<S>) -> Result<Self> {
        let dsel: Vec<(usize, usize)> = self
            .dvars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match evidence.get(v) {
                Some(Value::Discrete(x)) => Some(Ok((i, *x))),
                Some(Value::Continuous(_)) => Some(Err(HdmnError::Model(format!(
                    "continuous evidence for discrete variable {v}"
                )))),
                None => None,
            })
            .collect::<Result<_>>()?;
        for &(i, x) in &dsel {
            if x >= self.cards[i] {
                return Err(HdmnError::Model(format!(
                    "evidence value {x} out of domain for {}",
                    self.dvars[i]
                )));
            }
        }
        let cobs: Vec<(usize, S)> = self
            .cvars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match evidence.get(v) {
                Some(Value::Continuous(x)) => Some(Ok((i, *x))),
                Some(Value::Discrete(_)) => Some(Err(HdmnError::Model(format!(
                    "discrete evidence for continuous variable {v}"
                )))),
                None => None,
            })
            .collect::<Result<_>>()?;
        if dsel.is_empty() && cobs.is_empty() {
            return Ok(self.clone());
        }
        // discrete selection
        let keep_d: Vec<usize> = (0..self.dvars.len())
            .filter(|i| !dsel.iter().any(|(j, _)| j == i))
            .collect();
        let dvars: Vec<VarId> = keep_d.iter().map(|&i| self.dvars[i]).collect();
        let cards: Vec<usize> = keep_d.iter().map(|&i| self.cards[i]).collect();
        let st = strides(&self.cards);
        let base: usize = dsel.iter().map(|&(i, x)| x * st[i]).sum();
        let sub_strides: Vec<usize> = keep_d.iter().map(|&i| st[i]).collect();
        let src: Vec<usize> = index_map(&cards, &sub_strides).into_iter().map(|i| i + base).collect();

        let n = self.cvars.len();
        let rest: Vec<usize> = (0..n).filter(|i| !cobs.iter().any(|(j, _)| j == i)).collect();
        let r = rest.len();
        let cvars: Vec<VarId> = rest.iter().map(|&i| self.cvars[i]).collect();
        let mut out = Self::blank(dvars, cards, cvars);
        let half = S::lit(0.5);
        for (t, &s) in src.iter().enumerate() {
            if !self.live[s] {
                continue;
            }
            let h = &self.h[s * n..(s + 1) * n];
            let k = &self.k[s * n * n..(s + 1) * n * n];
            let mut g = self.g[s];
            for &(a, xa) in &cobs {
                g = g + h[a] * xa;
                for &(b, xb) in &cobs {
                    g = g - half * xa * k[a * n + b] * xb;
                }
            }
            out.live[t] = true;
            out.g[t] = g;
            for (x, &a) in rest.iter().enumerate() {
                let mut hv = h[a];
                for &(b, xb) in &cobs {
                    hv = hv - k[a * n + b] * xb;
                }
                out.h[t * r + x] = hv;
                for (y, &b) in rest.iter().enumerate() {
                    out.k[t * r * r + x * r + y] = k[a * n + b];
                }
            }
        }
        Ok(out)
    }

    /// Total log-mass (sum over tuples, integral over the continuous scope).
    pub fn log_mass(&self) -> Result<S> {
        let mut masses = Vec::with_capacity(self.live.len());
        for i in 0..self.live.len() {
            if let Some(m) = self.entry_moments(i)? {
                masses.push(m.log_mass);
            }
        }
        Ok(log_sum_exp(masses))
    }

    /// Rescale to total mass 1; returns the potential and the log-normalizer.
    pub fn normalized(&self) -> Result<(Self, S)> {
        let z = self.log_mass()?;
        if z == S::neg_infinity() {
            return Err(HdmnError::Inconsistent { t: None });
        }
        let mut out = self.clone();
        for (g, l) in out.g.iter_mut().zip(&out.live) {
            if *l {
                *g = *g - z;
            }
        }
        Ok((out, z))
    }

    /// Bit-exact content key, for memoizing work on identical potentials.
    pub fn fingerprint(&self, out: &mut Vec<u64>) {
        out.push(self.dvars.len() as u64);
        out.extend(self.dvars.iter().map(|v| v.0 as u64));
        out.push(self.cvars.len() as u64);
        out.extend(self.cvars.iter().map(|v| v.0 as u64));
        for (i, &l) in self.live.iter().enumerate() {
            if !l {
                out.push(u64::MAX);
                continue;
            }
            let n = self.cvars.len();
            out.push(self.g[i].to_f64_lossy().to_bits());
            out.extend(self.h[i * n..(i + 1) * n].iter().map(|x| x.to_f64_lossy().to_bits()));
            out.extend(self.k[i * n * n..(i + 1) * n * n].iter().map(|x| x.to_f64_lossy().to_bits()));
        }
    }

    /// Shift all log-weights by `delta`.
    pub fn scaled(&self, delta: S) -> Self {
        let mut out = self.clone();
        for g in out.g.iter_mut() {
            *g = *g + delta;
        }
        out
    }

    /// Normalized distribution of a discrete variable in scope.
    pub fn discrete_distribution(&self, v: VarId) -> Result<Vec<S>> {
        if self.dvars.binary_search(&v).is_err() {
            return Err(HdmnError::Internal(format!("{v} is not a discrete variable of this potential")));
        }
        let m = self.marginalize_onto(&[v])?;
        let logw: Vec<S> = (0..m.len())
            .map(|i| m.entry_moments(i).map(|x| x.map_or(S::neg_infinity(), |x| x.log_mass)))
            .collect::<Result<_>>()?;
        let z = log_sum_exp(logw.iter().copied());
        if z == S::neg_infinity() {
            return Err(HdmnError::Inconsistent { t: None });
        }
        Ok(logw.into_iter().map(|l| (l - z).exp()).collect())
    }

    /// Mean and variance of the (weak) marginal of a continuous variable.
    pub fn continuous_moments(&self, v: VarId) -> Result<(S, S)> {
        if self.cvars.binary_search(&v).is_err() {
            return Err(HdmnError::Internal(format!("{v} is not a continuous variable of this potential")));
        }
        let m = self.marginalize_onto(&[v])?;
        let mo = m.entry_moments(0)?.ok_or(HdmnError::Inconsistent { t: None })?;
        Ok((mo.mean[0], mo.cov[0]))
    }

    /// Replace variable ids; scopes are re-sorted.
    pub fn relabel(&self, map: impl Fn(VarId) -> VarId) -> Self {
        let mut out = self.clone();
        out.dvars = self.dvars.iter().map(|&v| map(v)).collect();
        out.cvars = self.cvars.iter().map(|&v| map(v)).collect();
        out.sorted()
    }

    /// Largest parameter difference to a potential over the same scope, with
    /// log-weights compared after shifting both to a common maximum.
    pub fn residual(&self, other: &Self) -> S {
        if self.dvars != other.dvars || self.cvars != other.cvars || self.live != other.live {
            return S::infinity();
        }
        let shift = |p: &Self| {
            p.g.iter()
                .zip(&p.live)
                .filter(|(_, l)| **l)
                .fold(S::neg_infinity(), |m, (g, _)| m.max(*g))
        };
        let (sa, sb) = (shift(self), shift(other));
        let mut r = S::zero();
        for i in 0..self.live.len() {
            if self.live[i] {
                r = r.max(((self.g[i] - sa).exp() - (other.g[i] - sb).exp()).abs());
            }
        }
        for (a, b) in self.h.iter().zip(&other.h).chain(self.k.iter().zip(&other.k)) {
            r = r.max((*a - *b).abs() / (S::one() + a.abs().max(b.abs())));
        }
        r
    }

    /// Geometric damping `new^(1−α) · old^α` in canonical parameters; ZERO
    /// follows `self` (the new value).
    pub fn damped(&self, old: &Self, alpha: S) -> Self {
        if self.dvars != old.dvars || self.cvars != old.cvars {
            return self.clone();
        }
        let beta = S::one() - alpha;
        let mut out = self.clone();
        let n = self.cvars.len();
        for i in 0..self.live.len() {
            if !self.live[i] || !old.live[i] {
                continue;
            }
            out.g[i] = beta * self.g[i] + alpha * old.g[i];
            for j in i * n..(i + 1) * n {
                out.h[j] = beta * self.h[j] + alpha * old.h[j];
            }
            for j in i * n * n..(i + 1) * n * n {
                out.k[j] = beta * self.k[j] + alpha * old.k[j];
            }
        }
        out
    }
}

/// Moment-matched single Gaussian for a weighted mixture.
fn collapse_mixture<S: Real>(comps: &[Moments<S>], n: usize) -> Option<Canonical<S>> {
    let total = log_sum_exp(comps.iter().map(|c| c.log_mass));
    let w: Vec<S> = comps.iter().map(|c| (c.log_mass - total).exp()).collect();
    let mut mean = vec![S::zero(); n];
    for (c, &wi) in comps.iter().zip(&w) {
        for a in 0..n {
            mean[a] = mean[a] + wi * c.mean[a];
        }
    }
    let mut cov = vec![S::zero(); n * n];
    for (c, &wi) in comps.iter().zip(&w) {
        for a in 0..n {
            for b in 0..n {
                let da = c.mean[a] - mean[a];
                let db = c.mean[b] - mean[b];
                cov[a * n + b] = cov[a * n + b] + wi * (c.cov[a * n + b] + da * db);
            }
        }
    }
    linalg::symmetrize(&mut cov, n);
    canonical_from_moments(total, &mean, &cov)
}
