mod common;

use common::{readings, small_dynamic_with};
use hdmn::exact::exact_filter;
use hdmn::model::format::{parse_model, write_model};
use hdmn::model::ConstraintRelation;
use hdmn::{DynamicBuilder, DynamicMixedNetwork};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Discrete chains with random tables, a random transition relation and
/// labelled values.
fn random_discrete(seed: u64) -> DynamicMixedNetwork<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DynamicBuilder::<f64>::new();
    let a = b.discrete_labeled("a", &["lo", "mid", "hi"]);
    let c = b.discrete("c", 2);
    let o = b.discrete("o", 2);
    b.prior_table(a, &[], common::normalized(&mut rng, 3, false));
    b.prior_table(c, &[a], common::table(&mut rng, 3, 2));
    b.prior_table(o, &[c], common::table(&mut rng, 2, 2));
    b.transition_table(b.cur(a), &[b.prev(a)], common::table(&mut rng, 3, 3));
    b.transition_table(b.cur(c), &[b.prev(c), b.cur(a)], common::table(&mut rng, 6, 2));
    b.transition_table(b.cur(o), &[b.cur(c)], common::table(&mut rng, 2, 2));
    let rel = ConstraintRelation::from_predicate(vec![b.prev(a), b.cur(a)], vec![3, 3], |_| rng.random_bool(0.8)).unwrap();
    if !rel.is_empty() {
        b.transition_constraint(rel);
    }
    b.observe(o);
    b.build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn written_models_parse_back(seed in any::<u64>(), coupled in any::<bool>()) {
        for dmn in [small_dynamic_with(seed, coupled), random_discrete(seed)] {
            let text = write_model(&dmn);
            let back: DynamicMixedNetwork<f64> = parse_model(&text).unwrap();
            prop_assert_eq!(write_model(&back), text);
            prop_assert_eq!(back.state(), dmn.state());
            prop_assert_eq!(back.observed(), dmn.observed());
            prop_assert_eq!(back.interface(), dmn.interface());
        }
    }
}

#[test]
fn parsed_model_filters_identically() {
    for seed in 0..5 {
        let dmn = small_dynamic_with(seed, true);
        let back: DynamicMixedNetwork<f64> = parse_model(&write_model(&dmn)).unwrap();
        let ev = readings(seed, 6);
        assert_eq!(exact_filter(&dmn, &ev).unwrap(), exact_filter(&back, &ev).unwrap());
    }
}
