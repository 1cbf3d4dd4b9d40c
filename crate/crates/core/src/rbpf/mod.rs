//! Rao-Blackwellised particle filtering with IJGP proposals.
//!
//! Discrete state variables in a w-cutset `R` are sampled; the remaining
//! state `Z` is tracked exactly per particle by a join tree conditioned on
//! the sampled values. Each slice: IJGP(i) on the slice given the
//! particle's past, sequential sampling of `R` from the calibrated beliefs,
//! an exact step that yields the new `Z` belief and the weight, then
//! resampling.

mod bootstrap;
mod buckets;
mod resample;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HdmnError, Result};
use crate::filter::{BeliefState, SliceEngine};
use crate::joingraph::{paste_interfaces, select_w_cutset_grouped};
use crate::model::{DynamicMixedNetwork, Evidence, Value, VarId};
use crate::potential::HybridPotential;
use crate::propagate::{Marginal, PropagationOptions};
use crate::scalar::{log_sum_exp, Real};

pub use bootstrap::bootstrap_filter;
pub use buckets::OrderedBuckets;
pub use resample::{effective_sample_size, systematic};

/// Where cutset samples come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ProposalKind {
    /// IJGP(i) over probabilities and constraints.
    #[default]
    Ijgp,
    /// The same propagation with the constraints left out.
    ConstraintBlind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbpfOptions<S> {
    pub i: usize,
    pub w: usize,
    pub n: usize,
    pub seed: u64,
    pub proposal: ProposalKind,
    /// Resample only when ESS drops below this fraction of `n`; `None`
    /// resamples every slice.
    pub adaptive: Option<S>,
    /// Fresh attempts after a sampling dead-end before the particle dies.
    pub retries: usize,
    /// Keep every slice's cutset samples in the run.
    pub record: bool,
    pub propagation: PropagationOptions<S>,
}

impl<S: Real> RbpfOptions<S> {
    pub fn new(i: usize, w: usize, n: usize, seed: u64) -> Self {
        Self {
            i,
            w,
            n,
            seed,
            proposal: ProposalKind::Ijgp,
            adaptive: None,
            retries: 25,
            record: false,
            propagation: PropagationOptions::default(),
        }
    }
}

/// A cutset assignment with its exact belief over the rest of the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle<S> {
    /// Values of the cutset variables, in cutset order.
    pub r: Vec<usize>,
    /// Normalized interface belief over the non-cutset variables.
    pub z: Arc<[HybridPotential<S>]>,
    pub log_weight: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet<S> {
    pub particles: Vec<Particle<S>>,
    pub ess: S,
    pub rejections: usize,
    /// RNG stream of the last resampling draw.
    pub stream: u64,
}

impl<S: Real> ParticleSet<S> {
    /// Normalized weights (all zero when no particle is live).
    pub fn weights(&self) -> Vec<S> {
        let lse = log_sum_exp(self.particles.iter().map(|p| p.log_weight));
        self.particles
            .iter()
            .map(|p| if lse.is_finite() { (p.log_weight - lse).exp() } else { S::zero() })
            .collect()
    }

    pub fn live(&self) -> usize {
        self.particles.iter().filter(|p| p.log_weight > S::neg_infinity()).count()
    }
}

/// Per-slice run record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceMetrics {
    pub t: usize,
    pub ess: f64,
    /// Dead-end draws plus completed samples with zero target mass.
    pub rejections: usize,
    /// Cutset samples actually drawn, retries included.
    pub samples: usize,
    pub live: usize,
    pub proposals_built: usize,
    pub resampled: bool,
    pub wall_ms: f64,
}

impl SliceMetrics {
    pub fn rejection_rate(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.rejections as f64 / self.samples as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterRun<S> {
    pub beliefs: Vec<BeliefState<S>>,
    pub metrics: Vec<SliceMetrics>,
    /// Sampled state variables.
    pub cutset: Vec<VarId>,
    /// Per slice, every particle's cutset values before resampling (only
    /// with `record`).
    pub history: Vec<Vec<Vec<usize>>>,
    pub last: ParticleSet<S>,
}

impl<S> FilterRun<S> {
    pub fn rejection_rate(&self) -> f64 {
        let r: usize = self.metrics.iter().map(|m| m.rejections).sum();
        let n: usize = self.metrics.iter().map(|m| m.samples).sum();
        if n == 0 {
            0.0
        } else {
            r as f64 / n as f64
        }
    }
}

/// Cutset for the particle filter: discrete unobserved state variables,
/// each removed with both slice copies, until the exact transition template
/// has discrete width at most `w`.
pub fn rbpf_cutset<S: Real>(dmn: &DynamicMixedNetwork<S>, w: usize) -> Result<Vec<VarId>> {
    let sliced = paste_interfaces(dmn, None, &[])?;
    let candidates: Vec<VarId> = (0..dmn.num_state())
        .map(VarId)
        .filter(|&v| dmn.state()[v.0].is_discrete() && !dmn.is_observed(v))
        .collect();
    let groups: Vec<Vec<VarId>> = candidates.iter().map(|&v| vec![dmn.prev(v), dmn.cur(v)]).collect();
    let mut r: Vec<VarId> = select_w_cutset_grouped(&sliced.transition.skeleton, w, &groups)
        .into_iter()
        .map(|g| candidates[g])
        .collect();
    r.sort();
    Ok(r)
}

/// Counter-based stream for particle `k` at slice `t`.
pub fn particle_rng(seed: u64, t: usize, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 32) | k as u64);
    rng
}

fn resample_rng(seed: u64, t: usize) -> (ChaCha8Rng, u64) {
    let stream = (1u64 << 63) | t as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (rng, stream)
}

/// Resample to `n` equally weighted particles.
pub fn resample<S: Real, R: Rng + ?Sized>(ps: &ParticleSet<S>, n: usize, t: usize, rng: &mut R) -> Result<ParticleSet<S>> {
    if ps.live() == 0 {
        return Err(HdmnError::FilterFailure {
            t,
            rejections: ps.rejections,
            proposals: ps.particles.len(),
        });
    }
    let idx = systematic(&ps.weights(), n, rng.random::<f64>());
    let lw = -S::lit(n as f64).ln();
    Ok(ParticleSet {
        particles: idx
            .into_iter()
            .map(|j| Particle {
                log_weight: lw,
                ..ps.particles[j].clone()
            })
            .collect(),
        ess: S::lit(n as f64),
        rejections: ps.rejections,
        stream: ps.stream,
    })
}

struct Proposal<S> {
    buckets: OrderedBuckets<S>,
    iterations: usize,
    converged: bool,
}

struct Exact<S> {
    log_z: S,
    z: Arc<[HybridPotential<S>]>,
    marginals: BTreeMap<VarId, Marginal<S>>,
    collapsed: bool,
}

struct Draw<S> {
    r: Option<Vec<usize>>,
    log_q: S,
    samples: usize,
    dead_ends: usize,
}

fn with_cutset<S: Real>(obs: &Evidence<S>, cutset: &[VarId], r: &[usize]) -> Evidence<S> {
    let mut ev = obs.clone();
    for (&v, &x) in cutset.iter().zip(r) {
        ev.insert(v, Value::Discrete(x));
    }
    ev
}

fn parent_key<S: Real>(p: &Particle<S>) -> Vec<u64> {
    let mut key: Vec<u64> = p.r.iter().map(|&x| x as u64).collect();
    for z in p.z.iter() {
        z.fingerprint(&mut key);
    }
    key
}

/// Calibrated IJGP(i) slice given one particle's past, as ordered buckets
/// over the cutset. `None` when the slice has no consistent completion.
fn build_proposal<S: Real>(
    engine: &SliceEngine<'_, S>,
    t: usize,
    cur: &Evidence<S>,
    prev: &Evidence<S>,
    cutset: &[VarId],
    parent: &Particle<S>,
) -> Result<Option<Proposal<S>>> {
    let template = engine.template(t);
    let backward = if t == 0 {
        Vec::new()
    } else {
        template
            .backward_scopes
            .iter()
            .map(|scope| match parent.z.first() {
                Some(z) => z.marginalize_onto(scope),
                None => Ok(HybridPotential::unit()),
            })
            .collect::<Result<Vec<_>>>()?
    };
    let prev = with_cutset(prev, cutset, &parent.r);
    let out = match engine.step(t, cur, &prev, &backward) {
        Ok(out) => out,
        Err(HdmnError::Inconsistent { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let ids: Vec<VarId> = cutset.iter().map(|&v| engine.id_at(t, v)).collect();
    let buckets = match OrderedBuckets::build(&template.graph, &out.cal, &template.order, &ids) {
        Ok(b) => b,
        Err(HdmnError::Inconsistent { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(Proposal {
        buckets,
        iterations: out.cal.iterations,
        converged: out.cal.converged,
    }))
}

/// Exact belief over the non-cutset state given the parent and the new
/// cutset values. `None` when the sample has zero target mass.
fn exact_step<S: Real>(
    engine: &SliceEngine<'_, S>,
    t: usize,
    cur: &Evidence<S>,
    prev: &Evidence<S>,
    cutset: &[VarId],
    parent: &Particle<S>,
    r: &[usize],
) -> Result<Option<Exact<S>>> {
    let cur = with_cutset(cur, cutset, r);
    let prev = with_cutset(prev, cutset, &parent.r);
    let out = match engine.step(t, &cur, &prev, &parent.z) {
        Ok(out) => out,
        Err(HdmnError::Inconsistent { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let marginals = match engine.marginals(&out, &cur) {
        Ok(m) => m,
        Err(HdmnError::Inconsistent { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let log_z = out.log_z.ok_or_else(|| HdmnError::Internal("exact step needs a join tree".into()))?;
    Ok(Some(Exact {
        log_z,
        z: out.forward.into(),
        marginals,
        collapsed: out.collapsed,
    }))
}

fn draw<S: Real>(proposal: Option<&Proposal<S>>, order: &[usize], retries: usize, rng: &mut ChaCha8Rng) -> Draw<S> {
    let Some(p) = proposal else {
        return Draw {
            r: None,
            log_q: S::zero(),
            samples: 1,
            dead_ends: 1,
        };
    };
    for attempt in 0..=retries {
        if let Some((vals, log_q)) = p.buckets.sample(rng) {
            // sampling order -> cutset order
            let r = order.iter().map(|&k| vals[k]).collect();
            return Draw {
                r: Some(r),
                log_q,
                samples: attempt + 1,
                dead_ends: attempt,
            };
        }
    }
    Draw {
        r: None,
        log_q: S::zero(),
        samples: retries + 1,
        dead_ends: retries + 1,
    }
}

/// Weighted mixture of per-particle marginals.
pub(crate) fn mix<S: Real>(parts: &[(S, &BTreeMap<VarId, Marginal<S>>)]) -> BTreeMap<VarId, Marginal<S>> {
    let mut out: BTreeMap<VarId, Marginal<S>> = BTreeMap::new();
    let mut second: BTreeMap<VarId, S> = BTreeMap::new();
    for &(w, ms) in parts {
        for (&v, m) in ms {
            match m {
                Marginal::Discrete(p) => {
                    let e = out.entry(v).or_insert_with(|| Marginal::Discrete(vec![S::zero(); p.len()]));
                    if let Marginal::Discrete(acc) = e {
                        for (a, &x) in acc.iter_mut().zip(p) {
                            *a = *a + w * x;
                        }
                    }
                }
                Marginal::Gaussian { mean, variance } => {
                    let e = out.entry(v).or_insert(Marginal::Gaussian {
                        mean: S::zero(),
                        variance: S::zero(),
                    });
                    if let Marginal::Gaussian { mean: acc, .. } = e {
                        *acc = *acc + w * *mean;
                    }
                    let s = second.entry(v).or_insert(S::zero());
                    *s = *s + w * (*variance + *mean * *mean);
                }
            }
        }
    }
    for (v, s) in second {
        if let Some(Marginal::Gaussian { mean, variance }) = out.get_mut(&v) {
            *variance = (s - *mean * *mean).max(S::zero());
        }
    }
    out
}

/// IJGP-RBPF(i, w, N) with default options.
pub fn ijgp_rbpf_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
    i: usize,
    w: usize,
    n: usize,
    seed: u64,
) -> Result<FilterRun<S>> {
    rbpf_filter(dmn, observations, &RbpfOptions::new(i, w, n, seed))
}

/// The particle filter. Per slice, proposals are built once per distinct
/// parent (cutset values and exact belief) and exact steps once per
/// distinct (parent, sample) pair; particles then differ only in their
/// random streams, which keeps results independent of thread scheduling.
pub fn rbpf_filter<S: Real>(
    dmn: &DynamicMixedNetwork<S>,
    observations: &[Evidence<S>],
    opts: &RbpfOptions<S>,
) -> Result<FilterRun<S>> {
    if opts.n == 0 {
        return Err(HdmnError::Parameter("need at least one particle".into()));
    }
    if opts.i == 0 {
        return Err(HdmnError::Parameter("i-bound must be at least 1".into()));
    }
    let n = opts.n;
    let cutset = rbpf_cutset(dmn, opts.w)?;
    let mut proposer = SliceEngine::new(dmn, Some(opts.i), &[], opts.propagation)?;
    proposer.ignore_constraints = opts.proposal == ProposalKind::ConstraintBlind;
    let exact = SliceEngine::new(dmn, None, &cutset, opts.propagation)?;
    let ids0: Vec<VarId> = cutset.clone();
    let ids1: Vec<VarId> = cutset.iter().map(|&v| dmn.cur(v)).collect();
    let orders: Vec<Vec<usize>> = [(0usize, &ids0), (1, &ids1)]
        .iter()
        .map(|&(t, ids)| {
            let order = &proposer.template(t).order;
            let sampling: Vec<VarId> = order.iter().rev().copied().filter(|v| ids.contains(v)).collect();
            ids.iter().map(|v| sampling.iter().position(|u| u == v).expect("cutset in template")).collect()
        })
        .collect();

    let empty = Evidence::new();
    let root = Particle {
        r: Vec::new(),
        z: Arc::from(Vec::new()),
        log_weight: -S::lit(n as f64).ln(),
    };
    let mut set = ParticleSet {
        particles: vec![root; n],
        ess: S::lit(n as f64),
        rejections: 0,
        stream: 0,
    };
    let mut beliefs = Vec::with_capacity(observations.len());
    let mut metrics = Vec::with_capacity(observations.len());
    let mut history = Vec::new();
    let mut loglik = S::zero();
    let mut total_samples = 0usize;

    for (t, cur) in observations.iter().enumerate() {
        let start = Instant::now();
        let prev = if t == 0 { &empty } else { &observations[t - 1] };

        let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut parents: Vec<usize> = Vec::new();
        let parent_of: Vec<Option<usize>> = set
            .particles
            .iter()
            .enumerate()
            .map(|(k, p)| {
                (p.log_weight > S::neg_infinity()).then(|| {
                    *keys.entry(parent_key(p)).or_insert_with(|| {
                        parents.push(k);
                        parents.len() - 1
                    })
                })
            })
            .collect();
        let proposals: Vec<Option<Proposal<S>>> = parents
            .par_iter()
            .map(|&k| build_proposal(&proposer, t, cur, prev, &cutset, &set.particles[k]))
            .collect::<Result<_>>()
            .map_err(|e| crate::filter::at_step(e, t))?;

        let order = &orders[t.min(1)];
        let draws: Vec<Draw<S>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let Some(p) = parent_of[k] else {
                    return Draw {
                        r: None,
                        log_q: S::zero(),
                        samples: 0,
                        dead_ends: 0,
                    };
                };
                let mut rng = particle_rng(opts.seed, t, k);
                draw(proposals[p].as_ref(), order, opts.retries, &mut rng)
            })
            .collect();

        let mut pairs: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut jobs: Vec<(usize, Vec<usize>)> = Vec::new();
        let job_of: Vec<Option<usize>> = draws
            .iter()
            .enumerate()
            .map(|(k, d)| {
                d.r.as_ref().map(|r| {
                    let key = (parent_of[k].expect("live parent"), r.clone());
                    *pairs.entry(key.clone()).or_insert_with(|| {
                        jobs.push(key);
                        jobs.len() - 1
                    })
                })
            })
            .collect();
        let exacts: Vec<Option<Exact<S>>> = jobs
            .par_iter()
            .map(|(p, r)| exact_step(&exact, t, cur, prev, &cutset, &set.particles[parents[*p]], r))
            .collect::<Result<_>>()
            .map_err(|e| crate::filter::at_step(e, t))?;

        let mut rejections = 0usize;
        let mut samples = 0usize;
        let mut next = Vec::with_capacity(n);
        let mut job_weight: Vec<S> = vec![S::neg_infinity(); jobs.len()];
        for (k, d) in draws.iter().enumerate() {
            samples += d.samples;
            rejections += d.dead_ends;
            let ex = job_of[k].and_then(|j| exacts[j].as_ref().map(|e| (j, e)));
            let p = &set.particles[k];
            match (&d.r, ex) {
                (Some(r), Some((j, e))) => {
                    let lw = p.log_weight + e.log_z - d.log_q;
                    job_weight[j] = log_sum_exp([job_weight[j], lw]);
                    next.push(Particle {
                        r: r.clone(),
                        z: e.z.clone(),
                        log_weight: lw,
                    });
                }
                (r, _) => {
                    if r.is_some() {
                        rejections += 1;
                    }
                    next.push(Particle {
                        r: r.clone().unwrap_or_default(),
                        z: Arc::from(Vec::new()),
                        log_weight: S::neg_infinity(),
                    });
                }
            }
        }
        total_samples += samples;
        set.rejections += rejections;
        let before = log_sum_exp(set.particles.iter().map(|p| p.log_weight));
        let lse = log_sum_exp(next.iter().map(|p| p.log_weight));
        if lse == S::neg_infinity() {
            return Err(HdmnError::FilterFailure {
                t,
                rejections: set.rejections,
                proposals: total_samples,
            });
        }
        loglik = loglik + lse - before;
        for p in &mut next {
            p.log_weight = p.log_weight - lse;
        }
        if opts.record {
            history.push(next.iter().map(|p| p.r.clone()).collect());
        }
        let mut current = ParticleSet {
            particles: next,
            ess: S::zero(),
            rejections: set.rejections,
            stream: set.stream,
        };
        current.ess = effective_sample_size(&current.weights());

        let parts: Vec<(S, &BTreeMap<VarId, Marginal<S>>)> = exacts
            .iter()
            .zip(&job_weight)
            .filter_map(|(e, &lw)| e.as_ref().map(|e| ((lw - lse).exp(), &e.marginals)))
            .filter(|(w, _)| *w > S::zero())
            .collect();
        let collapsed = exacts.iter().flatten().any(|e| e.collapsed);
        beliefs.push(BeliefState {
            t,
            marginals: mix(&parts),
            interface: Vec::new(),
            log_likelihood: Some(loglik),
            collapsed,
            iterations: proposals.iter().flatten().map(|p| p.iterations).max().unwrap_or(0),
            converged: proposals.iter().flatten().all(|p| p.converged),
        });

        let live = current.live();
        let ess = current.ess;
        let resampled = opts.adaptive.is_none_or(|f| ess < f * S::lit(n as f64));
        set = if resampled {
            let (mut rng, stream) = resample_rng(opts.seed, t);
            let mut s = resample(&current, n, t, &mut rng)?;
            s.stream = stream;
            s
        } else {
            current
        };
        metrics.push(SliceMetrics {
            t,
            ess: ess.to_f64_lossy(),
            rejections,
            samples,
            live,
            proposals_built: parents.len(),
            resampled,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        log::debug!("t={t} ess={ess} live={live} rejections={rejections}");
    }
    Ok(FilterRun {
        beliefs,
        metrics,
        cutset,
        history,
        last: set,
    })
}
