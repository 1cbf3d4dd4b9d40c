//! Exact inference: brute-force enumeration, join-tree clustering and exact
//! recursive filtering.

use std::collections::BTreeMap;

use crate::error::{HdmnError, Result};
use crate::filter::{slice_filter, BeliefState};
use crate::joingraph::{build_join_tree, elimination_order, Skeleton};
use crate::linalg;
use crate::model::{
    relation::for_each_tuple, Cpd, DynamicMixedNetwork, Evidence, Function, MixedNetwork, Value,
    VarId, VarTable,
};
use crate::potential::HybridPotential;
use crate::propagate::{assemble_factors, calibrate_tree, tree_root, Marginal, PropagationOptions};
use crate::scalar::{log_sum_exp, Real};

/// Marginals of every unobserved variable plus the log-probability (density)
/// of the evidence.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior<S> {
    pub marginals: BTreeMap<VarId, Marginal<S>>,
    pub log_evidence: S,
    /// Some message needed a weak marginal (moments stay exact on a tree).
    pub collapsed: bool,
}

const BRUTE_FORCE_LIMIT: usize = 1_000_000;

pub(crate) fn function_potential<S: Real>(f: Function<'_, S>, vars: &impl VarTable) -> HybridPotential<S> {
    match f {
        Function::Cpd(c) => HybridPotential::from_cpd(c, vars),
        Function::Constraint(r) => HybridPotential::from_relation(r),
    }
}

/// Enumerate every discrete configuration, integrate the continuous part in
/// moment form and normalize.
pub fn brute_force_marginals<S: Real>(net: &MixedNetwork<S>, evidence: &Evidence<S>) -> Result<Posterior<S>> {
    let order = net.topological_order();
    let hidden_d: Vec<VarId> = order
        .iter()
        .copied()
        .filter(|&v| net.is_discrete(v) && !evidence.contains_key(&v))
        .collect();
    let cards: Vec<usize> = hidden_d.iter().map(|&v| net.card(v)).collect();
    let total = cards.iter().try_fold(1usize, |a, &c| a.checked_mul(c));
    if total.is_none_or(|t| t > BRUTE_FORCE_LIMIT) {
        return Err(HdmnError::Parameter("too many discrete configurations for brute force".into()));
    }
    let cont: Vec<VarId> = order.iter().copied().filter(|&v| !net.is_discrete(v)).collect();
    for &v in order.iter() {
        if net.is_input(v) && !evidence.contains_key(&v) {
            return Err(HdmnError::Model(format!("input {v} needs evidence for brute force")));
        }
    }
    let mut dvalue: BTreeMap<VarId, usize> = BTreeMap::new();
    for (&v, val) in evidence {
        if let Value::Discrete(x) = val {
            dvalue.insert(v, *x);
        }
    }
    // Gaussian block: continuous variables that are not inputs, in topological order
    let gauss: Vec<VarId> = cont.iter().copied().filter(|&v| !net.is_input(v)).collect();
    let gpos: BTreeMap<VarId, usize> = gauss.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let obs: Vec<usize> = (0..gauss.len()).filter(|&i| evidence.contains_key(&gauss[i])).collect();
    let hid: Vec<usize> = (0..gauss.len()).filter(|&i| !evidence.contains_key(&gauss[i])).collect();
    let cval = |v: VarId| match evidence.get(&v) {
        Some(Value::Continuous(x)) => *x,
        _ => S::zero(),
    };

    struct Row<S> {
        logw: S,
        dvals: Vec<usize>,
        mean: Vec<S>,
        var: Vec<S>,
    }
    let mut rows: Vec<Row<S>> = Vec::new();
    let g = gauss.len();
    for_each_tuple(&cards, |t| {
        let mut val = dvalue.clone();
        for (k, &v) in hidden_d.iter().enumerate() {
            val.insert(v, t[k]);
        }
        if !net.constraints().iter().all(|r| r.allows_assignment(|v| val[&v])) {
            return;
        }
        let mut logw = S::zero();
        for &v in &order {
            if let Some(Cpd::Discrete(c)) = net.cpd(v) {
                let row = c.parents.iter().fold(0, |acc, p| acc * net.card(*p) + val[p]);
                let p = c.prob(row, net.card(v), val[&v]);
                if p <= S::zero() {
                    return;
                }
                logw = logw + p.ln();
            }
        }
        // joint moments of the Gaussian block
        let mut mu = vec![S::zero(); g];
        let mut sigma = vec![S::zero(); g * g];
        for (i, &v) in gauss.iter().enumerate() {
            let Some(Cpd::LinearGaussian(c)) = net.cpd(v) else {
                unreachable!("continuous non-input has a linear-Gaussian CPD")
            };
            let row = c.discrete_parents.iter().fold(0, |acc, p| acc * net.card(*p) + val[p]);
            let p = &c.params[row];
            let mut m = p.intercept;
            let mut beta = vec![S::zero(); g];
            for (b, z) in p.coefficients.iter().zip(&c.continuous_parents) {
                match gpos.get(z) {
                    Some(&j) => beta[j] = beta[j] + *b,
                    None => m = m + *b * cval(*z),
                }
            }
            for j in 0..i {
                m = m + beta[j] * mu[j];
            }
            mu[i] = m;
            for j in 0..i {
                let c_ij = (0..i).map(|k| beta[k] * sigma[k * g + j]).fold(S::zero(), |a, b| a + b);
                sigma[i * g + j] = c_ij;
                sigma[j * g + i] = c_ij;
            }
            let mut vii = p.variance;
            for a in 0..i {
                for b in 0..i {
                    vii = vii + beta[a] * sigma[a * g + b] * beta[b];
                }
            }
            sigma[i * g + i] = vii;
        }
        // condition on observed continuous values
        let no = obs.len();
        let (mean, var) = if no == 0 {
            (
                hid.iter().map(|&i| mu[i]).collect(),
                hid.iter().map(|&i| sigma[i * g + i]).collect(),
            )
        } else {
            let soo: Vec<S> = obs.iter().flat_map(|&a| obs.iter().map(move |&b| (a, b))).map(|(a, b)| sigma[a * g + b]).collect();
            let l = linalg::cholesky(&soo, no).expect("observation covariance is positive definite");
            let resid: Vec<S> = obs.iter().map(|&a| cval(gauss[a]) - mu[a]).collect();
            let alpha = linalg::chol_solve(&l, no, &resid);
            let half = S::lit(0.5);
            logw = logw
                - half * (S::lit(no as f64) * S::ln_2pi() + linalg::chol_logdet(&l, no) + linalg::dot(&resid, &alpha));
            let mut mean = Vec::new();
            let mut var = Vec::new();
            for &h in &hid {
                let sho: Vec<S> = obs.iter().map(|&a| sigma[h * g + a]).collect();
                let w = linalg::chol_solve(&l, no, &sho);
                mean.push(mu[h] + linalg::dot(&sho, &alpha));
                var.push(sigma[h * g + h] - linalg::dot(&sho, &w));
            }
            (mean, var)
        };
        rows.push(Row {
            logw,
            dvals: t.to_vec(),
            mean,
            var,
        });
    });
    let z = log_sum_exp(rows.iter().map(|r| r.logw));
    if z == S::neg_infinity() {
        return Err(HdmnError::Inconsistent { t: None });
    }
    let mut marginals = BTreeMap::new();
    for (k, &v) in hidden_d.iter().enumerate() {
        let mut p = vec![S::zero(); cards[k]];
        for r in &rows {
            p[r.dvals[k]] = p[r.dvals[k]] + (r.logw - z).exp();
        }
        marginals.insert(v, Marginal::Discrete(p));
    }
    for (k, &h) in hid.iter().enumerate() {
        let (mut m, mut s2) = (S::zero(), S::zero());
        for r in &rows {
            let w = (r.logw - z).exp();
            m = m + w * r.mean[k];
            s2 = s2 + w * (r.var[k] + r.mean[k] * r.mean[k]);
        }
        marginals.insert(
            gauss[h],
            Marginal::Gaussian {
                mean: m,
                variance: s2 - m * m,
            },
        );
    }
    Ok(Posterior {
        marginals,
        log_evidence: z,
        collapsed: false,
    })
}

/// Two-pass calibration on a strong join tree. `queries = None` asks for
/// every unobserved variable.
pub fn jtc_infer<S: Real>(
    net: &MixedNetwork<S>,
    evidence: &Evidence<S>,
    queries: Option<&[VarId]>,
) -> Result<Posterior<S>> {
    let observed: Vec<VarId> = evidence.keys().copied().collect();
    let skel = Skeleton::from_network(net).without(&observed);
    let order = elimination_order(&skel);
    let jt = build_join_tree(&skel, &order)?;
    let pots: Vec<Option<HybridPotential<S>>> = net
        .functions()
        .into_iter()
        .map(|f| function_potential(f, net).condition(evidence).map(Some))
        .collect::<Result<_>>()?;
    let cal = calibrate_tree(&jt, assemble_factors(&jt, &pots)?)?;
    let root = cal.belief(&jt, tree_root(&jt))?;
    let z = root.log_mass()?;
    if z == S::neg_infinity() {
        return Err(HdmnError::Inconsistent { t: None });
    }
    let all: Vec<VarId>;
    let queries = match queries {
        Some(q) => q,
        None => {
            all = skel.vars().to_vec();
            &all
        }
    };
    let mut marginals = BTreeMap::new();
    for &v in queries {
        let m = match evidence.get(&v) {
            Some(Value::Discrete(x)) => Marginal::point(net.card(v), *x),
            Some(Value::Continuous(_)) => continue,
            None => cal.marginal(&jt, v)?,
        };
        marginals.insert(v, m);
    }
    Ok(Posterior {
        marginals,
        log_evidence: z,
        collapsed: cal.collapsed,
    })
}

/// Exact recursive filtering. `observations[t]` holds slice-`t` evidence
/// keyed by state variable ids. The continuous belief per discrete
/// interface tuple is kept as one Gaussian; steps where that loses
/// information are flagged in [`BeliefState::collapsed`].
pub fn exact_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
) -> Result<Vec<BeliefState<S>>> {
    slice_filter(dmn, observations, None, &PropagationOptions::default())
}
