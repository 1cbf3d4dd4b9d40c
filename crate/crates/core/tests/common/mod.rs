#![allow(dead_code)]

use hdmn::model::{ConstraintRelation, LgParams};
use hdmn::{DynamicBuilder, DynamicMixedNetwork, Evidence, MixedNetwork, NetworkBuilder, Value, VarId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn normalized(rng: &mut impl Rng, k: usize, allow_zero: bool) -> Vec<f64> {
    let mut p: Vec<f64> = (0..k)
        .map(|_| if allow_zero && rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub fn table(rng: &mut impl Rng, rows: usize, k: usize) -> Vec<f64> {
    (0..rows).flat_map(|_| normalized(rng, k, true)).collect()
}

/// Random conditional linear-Gaussian network with constraints and evidence.
pub fn random_hmn(seed: u64, nd: usize, nc: usize) -> (MixedNetwork<f64>, Evidence<f64>) {
    random_hmn_with(seed, nd, nc, 3, 2)
}

/// As [`random_hmn`] with domain sizes in `2..=max_card` and up to
/// `max_constraints` pairwise constraints.
pub fn random_hmn_with(
    seed: u64,
    nd: usize,
    nc: usize,
    max_card: usize,
    max_constraints: usize,
) -> (MixedNetwork<f64>, Evidence<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetworkBuilder::<f64>::new();
    let d: Vec<VarId> = (0..nd).map(|i| b.discrete(format!("d{i}"), rng.random_range(2..=max_card))).collect();
    let c: Vec<VarId> = (0..nc).map(|i| b.continuous(format!("c{i}"))).collect();
    for (i, &v) in d.iter().enumerate() {
        let mut parents: Vec<VarId> = d[..i].to_vec();
        parents.shuffle(&mut rng);
        parents.truncate(rng.random_range(0..=2.min(i)));
        let rows: usize = parents.iter().map(|&p| b.card(p)).product();
        let t = table(&mut rng, rows, b.card(v));
        b.table(v, &parents, t);
    }
    for (i, &v) in c.iter().enumerate() {
        let mut dp: Vec<VarId> = d.clone();
        dp.shuffle(&mut rng);
        dp.truncate(rng.random_range(0..=2.min(nd)));
        let mut cp: Vec<VarId> = c[..i].to_vec();
        cp.shuffle(&mut rng);
        cp.truncate(rng.random_range(0..=2.min(i)));
        let rows: usize = dp.iter().map(|&p| b.card(p)).product();
        let params = (0..rows)
            .map(|_| {
                LgParams::new(
                    rng.random_range(-2.0..2.0),
                    cp.iter().map(|_| rng.random_range(-1.5..1.5)).collect(),
                    rng.random_range(0.2..2.0),
                )
            })
            .collect();
        b.linear_gaussian(v, &dp, &cp, params);
    }
    for _ in 0..rng.random_range(0..=max_constraints) {
        if nd < 2 {
            break;
        }
        let mut pair = d.clone();
        pair.shuffle(&mut rng);
        let scope = vec![pair[0], pair[1]];
        let cards = vec![b.card(scope[0]), b.card(scope[1])];
        let rel = ConstraintRelation::from_predicate(scope, cards, |_| rng.random_bool(0.7)).unwrap();
        if !rel.is_empty() {
            b.constraint(rel);
        }
    }
    let net = b.build().unwrap();
    let mut ev = Evidence::new();
    for &v in &c {
        if rng.random_bool(0.3) {
            ev.insert(v, Value::Continuous(rng.random_range(-2.0..2.0)));
        }
    }
    (net, ev)
}

/// Small hybrid dynamic model: discrete mode m (2), discrete switch s (2)
/// constrained against m, continuous position x driven by the mode, and an
/// observed reading y of x. With `coupled = false` the dynamics of x
/// ignore the mode, so no Gaussian mixture ever forms.
pub fn small_dynamic_with(seed: u64, coupled: bool) -> DynamicMixedNetwork<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DynamicBuilder::<f64>::new();
    let m = b.discrete("m", 2);
    let s = b.discrete("s", 2);
    let x = b.continuous("x");
    let y = b.continuous("y");
    b.prior_table(m, &[], normalized(&mut rng, 2, false));
    b.prior_table(s, &[m], table(&mut rng, 2, 2));
    if coupled {
        b.prior_linear_gaussian(x, &[m], &[], vec![LgParams::new(0.0, vec![], 1.0), LgParams::new(2.0, vec![], 1.5)]);
    } else {
        b.prior_linear_gaussian(x, &[], &[], vec![LgParams::new(1.0, vec![], 1.0)]);
    }
    b.prior_linear_gaussian(y, &[], &[x], vec![LgParams::new(0.0, vec![1.0], 0.5)]);
    b.transition_table(b.cur(m), &[b.prev(m)], vec![0.8, 0.2, 0.3, 0.7]);
    b.transition_table(b.cur(s), &[b.prev(s), b.cur(m)], table(&mut rng, 4, 2));
    if coupled {
        b.transition_linear_gaussian(
            b.cur(x),
            &[b.cur(m)],
            &[b.prev(x)],
            vec![LgParams::new(0.0, vec![0.9], 0.3), LgParams::new(1.0, vec![0.9], 0.6)],
        );
    } else {
        b.transition_linear_gaussian(b.cur(x), &[], &[b.prev(x)], vec![LgParams::new(0.5, vec![0.9], 0.4)]);
    }
    b.transition_linear_gaussian(b.cur(y), &[], &[b.cur(x)], vec![LgParams::new(0.0, vec![1.0], 0.5)]);
    // s may not switch on while m stays in mode 0
    let rel = ConstraintRelation::from_predicate(vec![b.prev(s), b.cur(s), b.cur(m)], vec![2, 2, 2], |t| {
        !(t[0] == 0 && t[1] == 1 && t[2] == 0)
    })
    .unwrap();
    b.transition_constraint(rel);
    b.observe(y);
    b.build().unwrap()
}

pub fn small_dynamic(seed: u64) -> DynamicMixedNetwork<f64> {
    small_dynamic_with(seed, true)
}

pub fn readings(seed: u64, len: usize) -> Vec<Evidence<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..len)
        .map(|_| {
            let mut e = Evidence::new();
            e.insert(VarId(3), Value::Continuous(rng.random_range(-1.0..4.0)));
            e
        })
        .collect()
}

/// Binary HMM with hidden x and observed o.
pub struct Hmm {
    pub prior: [f64; 2],
    pub trans: [[f64; 2]; 2],
    pub emit: [[f64; 2]; 2],
}

impl Hmm {
    pub fn standard() -> Self {
        Self {
            prior: [0.6, 0.4],
            trans: [[0.7, 0.3], [0.2, 0.8]],
            emit: [[0.9, 0.1], [0.3, 0.7]],
        }
    }

    /// Network with x = VarId(0), o = VarId(1).
    pub fn network(&self) -> DynamicMixedNetwork<f64> {
        let mut b = DynamicBuilder::<f64>::new();
        let x = b.discrete("x", 2);
        let o = b.discrete("o", 2);
        b.prior_table(x, &[], self.prior.to_vec());
        b.prior_table(o, &[x], self.emit.concat());
        b.transition_table(b.cur(x), &[b.prev(x)], self.trans.concat());
        b.transition_table(b.cur(o), &[b.cur(x)], self.emit.concat());
        b.observe(o);
        b.build().unwrap()
    }

    pub fn sample_obs(&self, seed: u64, len: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = usize::from(rng.random_bool(self.prior[1]));
        (0..len)
            .map(|t| {
                if t > 0 {
                    x = usize::from(rng.random_bool(self.trans[x][1]));
                }
                usize::from(rng.random_bool(self.emit[x][1]))
            })
            .collect()
    }

    pub fn evidence(obs: &[usize]) -> Vec<Evidence<f64>> {
        obs.iter().map(|&y| Evidence::from([(VarId(1), Value::Discrete(y))])).collect()
    }

    /// Forward recursion: filtered P(x_t = 1).
    pub fn forward(&self, obs: &[usize]) -> Vec<f64> {
        let mut alpha = [0.0; 2];
        obs.iter()
            .enumerate()
            .map(|(t, &y)| {
                let pred = if t == 0 {
                    self.prior
                } else {
                    [
                        alpha[0] * self.trans[0][0] + alpha[1] * self.trans[1][0],
                        alpha[0] * self.trans[0][1] + alpha[1] * self.trans[1][1],
                    ]
                };
                let a = [pred[0] * self.emit[0][y], pred[1] * self.emit[1][y]];
                let z = a[0] + a[1];
                alpha = [a[0] / z, a[1] / z];
                alpha[1]
            })
            .collect()
    }
}
