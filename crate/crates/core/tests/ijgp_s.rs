mod common;

use common::{readings, small_dynamic, Hmm};
use hdmn::exact::exact_filter;
use hdmn::ijgp::ijgp_s_filter;
use hdmn::propagate::{Marginal, PropagationOptions};
use hdmn::VarId;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn beliefs_are_distributions(seed in 0u64..1000, i in 1usize..3) {
        let dmn = small_dynamic(seed);
        let beliefs = ijgp_s_filter(&dmn, &readings(seed, 8), i, &PropagationOptions::default()).unwrap();
        prop_assert_eq!(beliefs.len(), 8);
        for (t, b) in beliefs.iter().enumerate() {
            prop_assert_eq!(b.t, t);
            for m in b.marginals.values() {
                match m {
                    Marginal::Discrete(p) => {
                        prop_assert!(p.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
                        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                    Marginal::Gaussian { mean, variance } => {
                        prop_assert!(mean.is_finite() && *variance > 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn single_chain_is_exact_at_i_one() {
    let hmm = Hmm::standard();
    let dmn = hmm.network();
    let obs = hmm.sample_obs(9, 30);
    let beliefs = ijgp_s_filter(&dmn, &Hmm::evidence(&obs), 1, &PropagationOptions::default()).unwrap();
    for (b, p) in beliefs.iter().zip(hmm.forward(&obs)) {
        assert!((b.marginals[&VarId(0)].probs().unwrap()[1] - p).abs() < 1e-12);
    }
}

#[test]
fn bounded_filter_stays_close_to_exact() {
    for seed in 0..5 {
        let dmn = small_dynamic(seed);
        let ev = readings(seed, 10);
        let exact = exact_filter(&dmn, &ev).unwrap();
        let approx = ijgp_s_filter(&dmn, &ev, 1, &PropagationOptions::default()).unwrap();
        for (a, b) in exact.iter().zip(&approx) {
            let p = a.marginals[&VarId(0)].probs().unwrap();
            let q = b.marginals[&VarId(0)].probs().unwrap();
            assert!((p[0] - q[0]).abs() < 0.1, "seed {seed} t={}: {p:?} vs {q:?}", a.t);
        }
    }
}

#[test]
fn zero_i_bound_is_rejected() {
    let dmn = small_dynamic(0);
    assert!(ijgp_s_filter(&dmn, &readings(0, 2), 0, &PropagationOptions::default()).is_err());
}

#[test]
fn one_template_serves_every_later_slice() {
    let dmn = small_dynamic(3);
    let engine = hdmn::filter::SliceEngine::new(&dmn, Some(1), &[], PropagationOptions::default()).unwrap();
    assert!(std::ptr::eq(engine.template(1), engine.template(100)));
    assert!(!std::ptr::eq(engine.template(0), engine.template(1)));
}
