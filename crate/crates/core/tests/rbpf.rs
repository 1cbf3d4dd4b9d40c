mod common;

use common::{readings, small_dynamic, Hmm};
use hdmn::exact::exact_filter;
use hdmn::rbpf::{ijgp_rbpf_filter, rbpf_cutset, rbpf_filter, RbpfOptions};
use hdmn::VarId;

#[test]
fn hmm_cutset_is_the_hidden_chain() {
    let dmn = Hmm::standard().network();
    assert_eq!(rbpf_cutset(&dmn, 0).unwrap(), vec![VarId(0)]);
    assert!(rbpf_cutset(&dmn, 1).unwrap().is_empty());
}

#[test]
fn hmm_particles_track_forward_algorithm() {
    let hmm = Hmm::standard();
    let dmn = hmm.network();
    let obs = hmm.sample_obs(3, 10);
    let truth = hmm.forward(&obs);
    let run = ijgp_rbpf_filter(&dmn, &Hmm::evidence(&obs), 1, 0, 10_000, 7).unwrap();
    for (b, p) in run.beliefs.iter().zip(&truth) {
        let est = b.marginals[&VarId(0)].probs().unwrap()[1];
        assert!((est - p).abs() < 0.02, "t={}: {est} vs {p}", b.t);
    }
    assert_eq!(run.metrics.iter().map(|m| m.rejections).sum::<usize>(), 0);
}

#[test]
fn wide_cutset_bound_is_exact() {
    let dmn = small_dynamic(2);
    let ev = readings(2, 5);
    let exact = exact_filter(&dmn, &ev).unwrap();
    let run = ijgp_rbpf_filter(&dmn, &ev, 2, 10, 1, 0).unwrap();
    assert!(run.cutset.is_empty());
    for (a, b) in exact.iter().zip(&run.beliefs) {
        for (v, m) in &a.marginals {
            let o = &b.marginals[v];
            match (m.probs(), o.probs()) {
                (Some(p), Some(q)) => assert!(p.iter().zip(q).all(|(x, y)| (x - y).abs() < 1e-9)),
                _ => assert!((m.mean().unwrap() - o.mean().unwrap()).abs() < 1e-9),
            }
        }
        assert!((a.log_likelihood.unwrap() - b.log_likelihood.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn same_seed_same_run() {
    let dmn = small_dynamic(4);
    let ev = readings(4, 6);
    let mut opts = RbpfOptions::new(1, 0, 300, 11);
    opts.record = true;
    let a = rbpf_filter(&dmn, &ev, &opts).unwrap();
    let b = rbpf_filter(&dmn, &ev, &opts).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.beliefs, b.beliefs);
    assert_eq!(a.last, b.last);
}

mod sampling {
    use hdmn::joingraph::{build_join_tree, elimination_order, Skeleton};
    use hdmn::model::ConstraintRelation;
    use hdmn::propagate::{assemble_factors, calibrate_tree};
    use hdmn::rbpf::{effective_sample_size, systematic, OrderedBuckets};
    use hdmn::{HybridPotential, VarId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn buckets(vars: &[VarId], pots: Vec<HybridPotential<f64>>) -> OrderedBuckets<f64> {
        let scopes = pots.iter().map(|p| p.scope()).collect();
        let skel = Skeleton::new(vars, vars.iter().copied(), scopes);
        let order = elimination_order(&skel);
        let jt = build_join_tree(&skel, &order).unwrap();
        let f = assemble_factors(&jt, &pots.into_iter().map(Some).collect::<Vec<_>>()).unwrap();
        let cal = calibrate_tree(&jt, f).unwrap();
        OrderedBuckets::build(&jt, &cal, &order, vars).unwrap()
    }

    #[test]
    fn draws_follow_the_belief() {
        let x = VarId(0);
        let ob = buckets(&[x], vec![HybridPotential::from_table(&[x], &[2], &[0.25, 0.75]).unwrap()]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let ones = (0..n).filter(|_| ob.sample(&mut rng).unwrap().0[0] == 1).count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn zero_entry_forces_the_value() {
        let x = VarId(0);
        let ob = buckets(&[x], vec![HybridPotential::from_table(&[x], &[2], &[0.0, 3.0]).unwrap()]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (v, log_q) = ob.sample(&mut rng).unwrap();
            assert_eq!(v, vec![1]);
            assert_eq!(log_q, 0.0);
        }
    }

    #[test]
    fn equality_constraint_is_respected() {
        let (x, y) = (VarId(0), VarId(1));
        let eq = ConstraintRelation::new(vec![x, y], vec![2, 2], vec![vec![0, 0], vec![1, 1]]).unwrap();
        let ob = buckets(
            &[x, y],
            vec![
                HybridPotential::from_table(&[x], &[2], &[0.5, 0.5]).unwrap(),
                HybridPotential::from_table(&[y], &[2], &[0.3, 0.7]).unwrap(),
                HybridPotential::from_relation(&eq),
            ],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (v, _) = ob.sample(&mut rng).unwrap();
            assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn systematic_resampling_properties() {
        let even = vec![0.25f64; 4];
        assert_eq!(systematic(&even, 4, 0.5), vec![0, 1, 2, 3]);
        assert_eq!(systematic(&[1.0, 0.0, 0.0], 3, 0.9), vec![0, 0, 0]);
        let w = [0.1, 0.45, 0.05, 0.4];
        for k in 0..20 {
            let idx = systematic(&w, 10, (k as f64 + 0.37) / 20.0);
            for (j, &wj) in w.iter().enumerate() {
                let copies = idx.iter().filter(|&&i| i == j).count() as f64;
                assert!((copies - 10.0 * wj).abs() < 1.0, "particle {j}: {copies}");
            }
        }
        assert!((effective_sample_size(&even) - 4.0).abs() < 1e-12);
    }
}

#[test]
fn pure_gaussian_step_is_a_kalman_update() {
    use hdmn::model::LgParams;
    use hdmn::{DynamicBuilder, Evidence, Value};
    let mut b = DynamicBuilder::<f64>::new();
    let x = b.continuous("x");
    let y = b.continuous("y");
    b.prior_linear_gaussian(x, &[], &[], vec![LgParams::new(1.0, vec![], 2.0)]);
    b.prior_linear_gaussian(y, &[], &[x], vec![LgParams::new(0.0, vec![1.0], 0.5)]);
    b.transition_linear_gaussian(b.cur(x), &[], &[b.prev(x)], vec![LgParams::new(0.3, vec![0.8], 0.4)]);
    b.transition_linear_gaussian(b.cur(y), &[], &[b.cur(x)], vec![LgParams::new(0.0, vec![1.0], 0.5)]);
    b.observe(y);
    let dmn = b.build().unwrap();
    let ys = [1.2, 0.4, -0.3, 2.0];
    let ev: Vec<Evidence<f64>> = ys.iter().map(|&v| Evidence::from([(y, Value::Continuous(v))])).collect();
    let run = ijgp_rbpf_filter(&dmn, &ev, 1, 0, 3, 5).unwrap();

    let (mut m, mut p) = (1.0, 2.0);
    for (t, &obs) in ys.iter().enumerate() {
        if t > 0 {
            m = 0.3 + 0.8 * m;
            p = 0.64 * p + 0.4;
        }
        let k = p / (p + 0.5);
        m += k * (obs - m);
        p *= 1.0 - k;
        let got = &run.beliefs[t].marginals[&x];
        assert!((got.mean().unwrap() - m).abs() < 1e-9);
        assert!((got.variance().unwrap() - p).abs() < 1e-9);
    }
}

#[test]
fn dead_ends_and_inconsistency_are_counted() {
    // o = x is forced by a constraint; an observation the prior rules out
    // leaves no live particle
    use hdmn::model::ConstraintRelation;
    use hdmn::{DynamicBuilder, Evidence, HdmnError, Value};
    let mut b = DynamicBuilder::<f64>::new();
    let x = b.discrete("x", 2);
    let o = b.discrete("o", 2);
    b.prior_table(x, &[], vec![1.0, 0.0]);
    b.prior_table(o, &[], vec![0.5, 0.5]);
    b.transition_table(b.cur(x), &[b.prev(x)], vec![1.0, 0.0, 0.0, 1.0]);
    b.transition_table(b.cur(o), &[], vec![0.5, 0.5]);
    b.prior_constraint(ConstraintRelation::new(vec![x, o], vec![2, 2], vec![vec![0, 0], vec![1, 1]]).unwrap());
    b.transition_constraint(
        ConstraintRelation::new(vec![b.cur(x), b.cur(o)], vec![2, 2], vec![vec![0, 0], vec![1, 1]]).unwrap(),
    );
    b.observe(o);
    let dmn = b.build().unwrap();
    let ev = vec![Evidence::from([(o, Value::Discrete(0))]), Evidence::from([(o, Value::Discrete(1))])];
    match ijgp_rbpf_filter(&dmn, &ev, 1, 0, 20, 1) {
        Err(HdmnError::FilterFailure { t, .. }) => assert_eq!(t, 1),
        other => panic!("expected a filter failure, got {other:?}"),
    }
}
