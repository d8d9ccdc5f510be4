//! Property tests for the structural invariants.

use advicerl::analysis::cumulative_regret_from_rewards;
use advicerl::estimation::{confidence_radius, TransitionCounts};
use advicerl::mdp::{span, TabularMdp};
use proptest::prelude::*;

fn arb_mdp() -> impl Strategy<Value = TabularMdp> {
    // 2..6 states, 1..3 actions per state, random stochastic rows over a
    // random support.
    (2usize..6).prop_flat_map(|n| {
        let actions = prop::collection::vec(1usize..4, n);
        actions.prop_flat_map(move |actions| {
            let rows = actions
                .iter()
                .map(|&na| {
                    prop::collection::vec(
                        prop::collection::vec((0usize..n, 1u32..100), 1..=n.min(4)),
                        na,
                    )
                })
                .collect::<Vec<_>>();
            let rewards = actions
                .iter()
                .map(|&na| prop::collection::vec(-10.0f64..10.0, na))
                .collect::<Vec<_>>();
            (rows, rewards).prop_map(move |(rows, rewards)| {
                let transitions: Vec<Vec<Vec<(usize, f64)>>> = rows
                    .into_iter()
                    .map(|state_rows| {
                        state_rows
                            .into_iter()
                            .map(|entries| {
                                let mut mass = std::collections::BTreeMap::new();
                                for (s2, w) in entries {
                                    *mass.entry(s2).or_insert(0u32) += w;
                                }
                                let total: u32 = mass.values().sum();
                                mass.into_iter()
                                    .map(|(s2, w)| (s2, w as f64 / total as f64))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                TabularMdp::new(transitions, rewards, 0)
                    .expect("generated MDP is structurally valid")
            })
        })
    })
}

proptest! {
    #[test]
    fn span_is_shift_invariant(
        v in prop::collection::vec(-1e6f64..1e6, 1..32),
        c in -1e6f64..1e6,
    ) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = span(&v).unwrap();
        let b = span(&shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn counters_stay_consistent(
        records in prop::collection::vec((0usize..4, 0usize..3, 0usize..4), 0..300),
        marks in prop::collection::vec(0usize..300, 0..5),
    ) {
        let mut counts = TransitionCounts::new(4, vec![3; 4]).unwrap();
        let mut marks = marks;
        marks.sort_unstable();
        let mut next_mark = 0;
        for (i, &(s, a, s2)) in records.iter().enumerate() {
            while next_mark < marks.len() && marks[next_mark] == i {
                counts.mark_iteration();
                next_mark += 1;
            }
            counts.record(s, a, s2).unwrap();
        }
        counts.mark_iteration();
        for s in 0..4 {
            for a in 0..3 {
                let triple_sum: u64 = (0..4).map(|s2| counts.triple_count(s, a, s2)).sum();
                prop_assert_eq!(triple_sum, counts.pair_count(s, a));
                if counts.pair_count(s, a) > 0 {
                    let row_sum: f64 = counts.empirical_row(s, a).iter().map(|&(_, p)| p).sum();
                    prop_assert!((row_sum - 1.0).abs() < 1e-12);
                }
            }
        }
        // Visit deltas over all iterations account for every step.
        let total: u64 = (0..counts.num_iterations())
            .map(|i| {
                counts
                    .visit_deltas(i)
                    .unwrap()
                    .iter()
                    .flat_map(|r| r.iter())
                    .sum::<u64>()
            })
            .sum();
        prop_assert_eq!(total, records.len() as u64);
    }

    #[test]
    fn radius_monotonicity(
        n1 in 0u64..500,
        extra in 1u64..500,
        t in 1u64..100_000,
        delta in 0.01f64..0.99,
    ) {
        let mut counts = TransitionCounts::new(3, vec![2; 3]).unwrap();
        for _ in 0..n1 {
            counts.record(0, 0, 1).unwrap();
        }
        let base = confidence_radius(&counts, 0, 0, t, delta).unwrap();
        for _ in 0..extra {
            counts.record(0, 0, 1).unwrap();
        }
        let more_visits = confidence_radius(&counts, 0, 0, t, delta).unwrap();
        prop_assert!(more_visits <= base + 1e-12);
        let later = confidence_radius(&counts, 0, 0, t + 1, delta).unwrap();
        prop_assert!(later >= more_visits - 1e-12);
        let stricter = confidence_radius(&counts, 0, 0, t, delta / 2.0).unwrap();
        prop_assert!(stricter >= more_visits - 1e-12);
    }

    #[test]
    fn mdp_json_round_trips(mdp in arb_mdp(), dense in any::<bool>()) {
        let text = mdp.to_json_with(dense);
        let back = TabularMdp::from_json(&text).unwrap();
        prop_assert_eq!(back, mdp);
    }

    #[test]
    fn regret_bookkeeping_identity(
        rewards in prop::collection::vec(-5.0f64..5.0, 1..200),
        gain in -2.0f64..2.0,
    ) {
        let curve = cumulative_regret_from_rewards(&rewards, gain);
        let mut sum = 0.0;
        for (t, (&r, &delta)) in rewards.iter().zip(curve.cumulative.iter()).enumerate() {
            sum += r;
            let lhs = delta + sum;
            let rhs = gain * (t + 1) as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }
}
