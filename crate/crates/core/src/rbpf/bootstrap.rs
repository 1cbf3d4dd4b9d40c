use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{effective_sample_size, particle_rng, resample_rng, systematic, FilterRun, Particle, ParticleSet, SliceMetrics};
use crate::error::{HdmnError, Result};
use crate::filter::BeliefState;
use crate::model::{Cpd, DynamicMixedNetwork, Evidence, MixedNetwork, Value, VarId, VarTable};
use crate::propagate::Marginal;
use crate::scalar::{log_sum_exp, Real};

fn discrete(v: Option<Value<impl Real>>) -> usize {
    match v {
        Some(Value::Discrete(x)) => x,
        _ => 0,
    }
}

fn continuous<S: Real>(v: Option<Value<S>>) -> S {
    match v {
        Some(Value::Continuous(x)) => x,
        _ => S::zero(),
    }
}

fn row<S: Real>(parents: &[VarId], net: &MixedNetwork<S>, vals: &[Option<Value<S>>]) -> usize {
    parents.iter().fold(0, |r, &p| r * net.card(p) + discrete(vals[p.0]))
}

/// Sample (or, for an observed value, score) one variable from its CPD.
fn visit<S: Real, R: Rng + ?Sized>(
    net: &MixedNetwork<S>,
    cpd: &Cpd<S>,
    vals: &[Option<Value<S>>],
    observed: Option<Value<S>>,
    rng: &mut R,
) -> (Value<S>, S) {
    match cpd {
        Cpd::Discrete(c) => {
            let k = net.card(c.child);
            let base = row(&c.parents, net, vals) * k;
            let probs = &c.table[base..base + k];
            if let Some(v) = observed {
                return (v, probs[discrete(Some(v))].ln());
            }
            let u = S::lit(rng.random::<f64>());
            let mut acc = S::zero();
            let last = probs.iter().rposition(|&p| p > S::zero()).unwrap_or(0);
            for (x, &p) in probs.iter().enumerate() {
                acc = acc + p;
                if p > S::zero() && (u < acc || x == last) {
                    return (Value::Discrete(x), S::zero());
                }
            }
            (Value::Discrete(last), S::zero())
        }
        Cpd::LinearGaussian(c) => {
            let p = &c.params[row(&c.discrete_parents, net, vals)];
            let mean = p.intercept
                + p.coefficients
                    .iter()
                    .zip(&c.continuous_parents)
                    .map(|(&b, &z)| b * continuous(vals[z.0]))
                    .sum::<S>();
            if let Some(v) = observed {
                let d = continuous(Some(v)) - mean;
                let half = S::lit(0.5);
                return (v, -half * (S::ln_2pi() + p.variance.ln()) - half * d * d / p.variance);
            }
            let normal = Normal::new(mean.to_f64_lossy(), p.variance.to_f64_lossy().sqrt()).expect("positive variance");
            (Value::Continuous(S::lit(normal.sample(rng))), S::zero())
        }
    }
}

/// Ancestral sample of one slice given the previous state values; returns
/// the new state and the log-likelihood of the observations (`-inf` on a
/// violated constraint).
fn propagate_one<S: Real, R: Rng + ?Sized>(
    dmn: &DynamicMixedNetwork<S>,
    t: usize,
    prev: &[Value<S>],
    obs: &Evidence<S>,
    rng: &mut R,
) -> (Vec<Value<S>>, S) {
    let n = dmn.num_state();
    let net = if t == 0 { dmn.prior() } else { dmn.transition() };
    let offset = if t == 0 { 0 } else { n };
    let mut vals: Vec<Option<Value<S>>> = vec![None; net.num_vars()];
    if t > 0 {
        for (v, x) in prev.iter().enumerate() {
            vals[v] = Some(*x);
        }
    }
    let mut logw = S::zero();
    for id in net.topological_order() {
        if vals[id.0].is_some() {
            continue;
        }
        let Some(cpd) = net.cpd(id) else { continue };
        let (x, lw) = visit(net, cpd, &vals, obs.get(&dmn.state_of(id)).copied(), rng);
        vals[id.0] = Some(x);
        logw = logw + lw;
    }
    for c in net.constraints() {
        if !c.allows_assignment(|v| discrete(vals[v.0])) {
            logw = S::neg_infinity();
        }
    }
    let state = (0..n).map(|v| vals[offset + v].expect("every state variable sampled")).collect();
    (state, logw)
}

/// Plain bootstrap particle filter: every unobserved state variable is
/// sampled from the transition model and particles are weighted by the
/// observation likelihood. Baseline for the Rao-Blackwellised filter.
pub fn bootstrap_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
    n: usize,
    seed: u64,
) -> Result<FilterRun<S>> {
    if n == 0 {
        return Err(HdmnError::Parameter("need at least one particle".into()));
    }
    let nstate = dmn.num_state();
    let mut states: Vec<Vec<Value<S>>> = vec![Vec::new(); n];
    let mut beliefs = Vec::with_capacity(observations.len());
    let mut metrics = Vec::with_capacity(observations.len());
    let mut loglik = S::zero();
    let mut total_rejections = 0;
    let mut last = ParticleSet {
        particles: Vec::new(),
        ess: S::zero(),
        rejections: 0,
        stream: 0,
    };
    for (t, obs) in observations.iter().enumerate() {
        let start = Instant::now();
        let stepped: Vec<(Vec<Value<S>>, S)> = states
            .par_iter()
            .enumerate()
            .map(|(k, prev)| propagate_one(dmn, t, prev, obs, &mut particle_rng(seed, t, k)))
            .collect();
        let lse = log_sum_exp(stepped.iter().map(|s| s.1));
        let rejections = stepped.iter().filter(|s| s.1 == S::neg_infinity()).count();
        total_rejections += rejections;
        if lse == S::neg_infinity() {
            return Err(HdmnError::FilterFailure {
                t,
                rejections: total_rejections,
                proposals: n * (t + 1),
            });
        }
        loglik = loglik + lse - S::lit(n as f64).ln();
        let weights: Vec<S> = stepped.iter().map(|s| (s.1 - lse).exp()).collect();
        let mut marginals = BTreeMap::new();
        for v in 0..nstate {
            let var = &dmn.state()[v];
            match obs.get(&VarId(v)) {
                Some(Value::Continuous(_)) => continue,
                Some(Value::Discrete(x)) => {
                    marginals.insert(VarId(v), Marginal::point(var.card().unwrap_or(1), *x));
                    continue;
                }
                None => {}
            }
            let m = match var.card() {
                Some(k) => {
                    let mut p = vec![S::zero(); k];
                    for (s, &w) in stepped.iter().zip(&weights) {
                        p[discrete(Some(s.0[v]))] = p[discrete(Some(s.0[v]))] + w;
                    }
                    Marginal::Discrete(p)
                }
                None => {
                    let mean: S = stepped.iter().zip(&weights).map(|(s, &w)| w * continuous(Some(s.0[v]))).sum();
                    let var: S = stepped
                        .iter()
                        .zip(&weights)
                        .map(|(s, &w)| {
                            let d = continuous(Some(s.0[v])) - mean;
                            w * d * d
                        })
                        .sum();
                    Marginal::Gaussian { mean, variance: var }
                }
            };
            marginals.insert(VarId(v), m);
        }
        let ess = effective_sample_size(&weights);
        beliefs.push(BeliefState {
            t,
            marginals,
            interface: Vec::new(),
            log_likelihood: Some(loglik),
            collapsed: false,
            iterations: 0,
            converged: true,
        });
        let (mut rng, stream) = resample_rng(seed, t);
        let idx = systematic(&weights, n, rng.random::<f64>());
        states = idx.iter().map(|&j| stepped[j].0.clone()).collect();
        last = ParticleSet {
            particles: idx
                .iter()
                .map(|&j| Particle {
                    r: stepped[j].0.iter().map(|&x| discrete(Some(x))).collect(),
                    z: Vec::new().into(),
                    log_weight: -S::lit(n as f64).ln(),
                })
                .collect(),
            ess: S::lit(n as f64),
            rejections: total_rejections,
            stream,
        };
        metrics.push(SliceMetrics {
            t,
            ess: ess.to_f64_lossy(),
            rejections,
            samples: n,
            live: n - rejections,
            proposals_built: 0,
            resampled: true,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(FilterRun {
        beliefs,
        metrics,
        cutset: (0..nstate).map(VarId).filter(|&v| !dmn.is_observed(v)).collect(),
        history: Vec::new(),
        last,
    })
}
