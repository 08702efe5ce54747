use adoption_core::dtmc::estimate;
use adoption_core::metrics::{communicating_rate, domain_metrics, downgrade_rate, prevalence};
use adoption_core::{Version, VersionSequence};
use proptest::prelude::*;

fn arb_sequence() -> impl Strategy<Value = VersionSequence> {
    proptest::collection::vec((0u64..3, 0u64..3, 0u64..3), 2..40).prop_map(|v| {
        VersionSequence::from_versions(
            "prop.example",
            v.into_iter()
                .map(|(a, b, c)| Version::new(a, b, c))
                .collect(),
        )
        .unwrap()
    })
}

/// Adjacent-pair tally by exhaustive search over every ordered pair of
/// distinct values in the sequence.
fn brute_force_count(versions: &[Version], from: &Version, to: &Version) -> u64 {
    let mut n = 0;
    for t in 0..versions.len() - 1 {
        if &versions[t] == from && &versions[t + 1] == to {
            n += 1;
        }
    }
    n
}

proptest! {
    #[test]
    fn counts_match_brute_force(seq in arb_sequence()) {
        let model = estimate(&seq).unwrap();
        for (i, a) in model.states.iter().enumerate() {
            for (j, b) in model.states.iter().enumerate() {
                prop_assert_eq!(model.count(i, j), brute_force_count(&seq.versions, a, b));
            }
        }
        prop_assert_eq!(model.transitions() as usize, seq.len() - 1);
        for i in 0..model.state_count() {
            let row: f64 = (0..model.state_count()).map(|j| model.prob(i, j)).sum();
            if model.row_totals[i] > 0 {
                prop_assert!((row - 1.0).abs() <= 1e-12);
            } else {
                prop_assert_eq!(row, 0.0);
            }
            let total: u64 = (0..model.state_count()).map(|j| model.count(i, j)).sum();
            prop_assert_eq!(total, model.row_totals[i]);
        }
    }

    #[test]
    fn relabeling_permutes_the_matrix(seq in arb_sequence()) {
        // bijection: swap major and maintenance, shift minor
        let relabel = |v: &Version| Version::new(v.maintenance + 10, v.minor * 3 + 1, v.major);
        let mapped = VersionSequence::from_versions(
            "prop.example",
            seq.versions.iter().map(relabel).collect(),
        ).unwrap();
        let a = estimate(&seq).unwrap();
        let b = estimate(&mapped).unwrap();
        prop_assert_eq!(a.states.iter().map(relabel).collect::<Vec<_>>(), b.states.clone());
        prop_assert_eq!(a.dense_counts(), b.dense_counts());
        prop_assert_eq!(a.row_totals, b.row_totals);
    }

    #[test]
    fn metrics_stay_in_unit_interval(seq in arb_sequence()) {
        let m = domain_metrics(&seq).unwrap();
        for x in [m.delta, m.phi, m.gamma] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(m.downgrades < m.r);
        prop_assert!((m.phi - m.downgrades as f64 / (m.r - 1) as f64).abs() < 1e-15);
    }

    #[test]
    fn phi_zero_iff_non_decreasing(seq in arb_sequence()) {
        let (d, phi) = downgrade_rate(&seq);
        let sorted = seq.versions.windows(2).all(|w| w[0] <= w[1]);
        prop_assert_eq!(phi == 0.0, sorted);
        prop_assert_eq!(d == 0, sorted);
    }

    #[test]
    fn communication_implies_downgrade(seq in arb_sequence()) {
        let model = estimate(&seq).unwrap();
        let (pairs, gamma) = communicating_rate(&model, seq.len());
        let (_, phi) = downgrade_rate(&seq);
        if gamma > 0.0 {
            prop_assert!(phi > 0.0);
        }
        prop_assert_eq!(pairs > 0, gamma > 0.0);
    }

    #[test]
    fn constant_sequences_have_zero_prevalence(len in 2usize..30, v in (0u64..9, 0u64..9, 0u64..99)) {
        let s = VersionSequence::from_versions("c", vec![Version::new(v.0, v.1, v.2); len]).unwrap();
        prop_assert_eq!(prevalence(&estimate(&s).unwrap()), 0.0);
    }
}

/// Downgrades without any pair of states communicating.
#[test]
fn downgrade_without_communication() {
    let s = VersionSequence::from_versions(
        "x",
        ["5.6.0", "5.5.0", "5.4.0"]
            .iter()
            .map(|v| v.parse().unwrap())
            .collect(),
    )
    .unwrap();
    let (_, phi) = downgrade_rate(&s);
    let (pairs, gamma) = communicating_rate(&estimate(&s).unwrap(), s.len());
    assert!(phi > 0.0);
    assert_eq!((pairs, gamma), (0, 0.0));
}

/// Reordering the walk so the multiset of adjacent pairs is unchanged keeps
/// the model: a→b→a→c→a and a→c→a→b→a share all adjacent pairs.
#[test]
fn model_depends_only_on_adjacent_pairs() {
    let v = |s: &str| -> Version { s.parse().unwrap() };
    let (a, b, c) = (v("1.0.0"), v("2.0.0"), v("3.0.0"));
    let s1 = VersionSequence::from_versions(
        "x",
        vec![a.clone(), b.clone(), a.clone(), c.clone(), a.clone()],
    )
    .unwrap();
    let s2 = VersionSequence::from_versions(
        "x",
        vec![a.clone(), c.clone(), a.clone(), b.clone(), a.clone()],
    )
    .unwrap();
    let (m1, m2) = (estimate(&s1).unwrap(), estimate(&s2).unwrap());
    for x in [&a, &b, &c] {
        for y in [&a, &b, &c] {
            let i1 = m1.states.iter().position(|s| s == x).unwrap();
            let j1 = m1.states.iter().position(|s| s == y).unwrap();
            let i2 = m2.states.iter().position(|s| s == x).unwrap();
            let j2 = m2.states.iter().position(|s| s == y).unwrap();
            assert_eq!(m1.count(i1, j1), m2.count(i2, j2));
            assert_eq!(m1.prob(i1, j1), m2.prob(i2, j2));
        }
    }
}
