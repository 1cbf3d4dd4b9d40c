use hdmn_transport::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn counter_stays_in_range(d in 1usize..6, visits in prop::collection::vec(any::<bool>(), 1..40)) {
        let mut f = 0;
        for at_goal in visits {
            let (next, switched) = next_counter(d, at_goal, f);
            prop_assert!(next <= d);
            prop_assert_eq!(switched, (f > 0) != (next > 0));
            if !at_goal {
                prop_assert_eq!(next, 0);
            }
            f = next;
        }
    }

    #[test]
    fn a_stay_lasts_exactly_d_ticks(d in 1usize..6) {
        let (mut f, mut ticks) = next_counter(d, true, 0);
        prop_assert!(ticks && f == d);
        while f > 0 {
            (f, ticks) = next_counter(d, true, f);
        }
        // entering at zero, then d - 1 decrements to reach zero again
        prop_assert!(ticks);
    }

    #[test]
    fn trajectories_survive_the_file_format(seed in 0u64..1000, horizon in 1usize..30) {
        let sc = TransportScenario { horizon, ..Default::default() };
        let (_, traj) = sc.instantiate(Variant::Model3, seed).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let back = read_trajectory(&buf[..]).unwrap();
        prop_assert_eq!(back.steps.len(), horizon);
        prop_assert_eq!(back.meta.seed, seed);
        for (a, b) in traj.steps.iter().zip(&back.steps) {
            prop_assert_eq!((a.goal, a.arc, a.counter), (b.goal, b.arc, b.counter));
            prop_assert!((a.x - b.x).abs() <= 1e-9 * a.x.abs().max(1.0));
            prop_assert!((a.offset - b.offset).abs() <= 1e-9 * a.offset.abs().max(1.0));
        }
    }
}
