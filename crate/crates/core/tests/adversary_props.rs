//! Contract checks for the comparison adversaries: truthfulness outside
//! the margin, exact accounting, and the layered construction's structure.

use privsel_core::comparator::{ComparatorOracle, GapComparator, LayeredTournament, TiePolicy};
use privsel_core::stream::child_rng;
use rand::Rng;

/// Ten thousand random wide-gap queries, all four policies: the larger
/// value always wins.
#[test]
fn truthful_on_wide_gaps_for_every_policy() {
    let mut rng = child_rng(51, "adv-truthful", 0);
    let k = 50;
    let values: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 10.0).collect();
    for policy in [
        TiePolicy::FavorLower,
        TiePolicy::FavorHigher,
        TiePolicy::UniformRandom,
        TiePolicy::GreedyAdaptive,
    ] {
        let mut oracle = GapComparator::new(values.clone(), policy, 77).unwrap();
        let mut checked = 0;
        while checked < 10_000 {
            let i = rng.gen_range(0..k);
            let j = rng.gen_range(0..k);
            if i == j {
                continue;
            }
            let w = oracle.query(i, j).unwrap();
            if (values[i] - values[j]).abs() > 1.0 {
                let want = if values[i] > values[j] { i } else { j };
                assert_eq!(w, want, "{policy:?} lied on ({i}, {j})");
                checked += 1;
            }
        }
    }
}

/// Counters equal the number of query calls exactly and split across
/// rounds at the boundary signals.
#[test]
fn accounting_is_exact() {
    let mut oracle =
        GapComparator::new(vec![0.0, 2.0, 4.0, 6.0], TiePolicy::FavorLower, 0).unwrap();
    for _ in 0..7 {
        oracle.query(0, 1).unwrap();
    }
    oracle.begin_round();
    for _ in 0..4 {
        oracle.query(2, 3).unwrap();
    }
    oracle.begin_round();
    assert_eq!(oracle.stats().total, 11);
    assert_eq!(oracle.stats().per_round, vec![7, 4, 0]);
}

/// Full pair scan of a 256-node layered tournament: the deeper layer's
/// node wins every cross-layer query.
#[test]
fn cross_layer_edges_point_inward() {
    for t in [2u32, 3] {
        let mut g = LayeredTournament::new(256, t, 99 + t as u64).unwrap();
        for i in 0..256 {
            for j in 0..256 {
                if i == j {
                    continue;
                }
                let (di, dj) = (g.depth_of(i), g.depth_of(j));
                if di == dj {
                    continue;
                }
                let w = g.query(i, j).unwrap();
                let deeper = if di > dj { i } else { j };
                assert_eq!(w, deeper, "t={t} pair ({i}, {j})");
            }
        }
    }
}

/// Brute-force in-degree scan: the sink wins all k-1 matches and the
/// runner-up loses only to the sink.
#[test]
fn sink_and_runner_up_degrees() {
    let k = 64;
    let mut g = LayeredTournament::new(k, 3, 5).unwrap();
    let sink = g.sink();
    let ru = g.runner_up();
    let mut best = 0;
    let mut best_wins = 0;
    for i in 0..k {
        let mut wins = 0;
        for j in 0..k {
            if i == j {
                continue;
            }
            wins += usize::from(g.query(i, j).unwrap() == i);
        }
        if wins > best_wins {
            best_wins = wins;
            best = i;
        }
        if i == ru {
            assert_eq!(wins, k - 2, "runner-up must lose exactly once");
        }
    }
    assert_eq!(best, sink);
    assert_eq!(best_wins, k - 1);
    assert_eq!(g.query(ru, sink).unwrap(), sink);
}

/// The realized values certify every answer at k = 256: wide pairs always
/// go to the larger value, and the sink's value clears the field by more
/// than the margin.
#[test]
fn realized_values_certify_all_answers() {
    let mut g = LayeredTournament::new(256, 3, 12).unwrap();
    let values = g.realized_values();
    let sink = g.sink();
    for i in 0..256 {
        for j in i + 1..256 {
            let w = g.query(i, j).unwrap();
            if (values[i] - values[j]).abs() > 1.0 {
                let want = if values[i] > values[j] { i } else { j };
                assert_eq!(w, want, "answer at ({i}, {j}) contradicts the values");
            }
        }
        if i != sink {
            assert!(values[sink] >= values[i] + 2.0, "sink must sit in its own class");
        }
    }
}
