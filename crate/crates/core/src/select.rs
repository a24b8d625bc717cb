//! Tournament algorithms for approximate maximum selection.
//!
//! All procedures speak to a `ComparatorOracle` and account queries and
//! rounds exactly. The multi-round schedule shrinks the pool with group
//! exponent eta = 1/(2^r - 1) at level r, ending in a single round robin;
//! the randomized variant halts one level early, pads the survivors with a
//! uniform sample, and round-robins the union.

use crate::comparator::{ComparatorOracle, CompareError};
use rand::seq::SliceRandom;
use rand::RngCore;

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("no items to select from")]
    NoItems,
    #[error("round schedule needs t >= 1, got {0}")]
    BadDepth(u32),
    #[error("need at least one repetition")]
    BadReps,
    #[error(transparent)]
    Compare(#[from] CompareError),
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub winner: usize,
    pub queries_total: u64,
    /// One entry per executed round; levels that would issue no queries are
    /// skipped entirely.
    pub queries_per_round: Vec<u64>,
    pub rounds_used: u32,
    /// Items that entered the final all-pairs stage.
    pub survivors: Vec<usize>,
    /// The uniform padding sample, when the procedure draws one.
    pub sampled_set: Vec<usize>,
}

impl SelectionResult {
    fn new(winner: usize, queries_per_round: Vec<u64>, survivors: Vec<usize>) -> Self {
        SelectionResult {
            winner,
            queries_total: queries_per_round.iter().sum(),
            rounds_used: queries_per_round.len() as u32,
            queries_per_round,
            survivors,
            sampled_set: Vec::new(),
        }
    }
}

/// Integer ceiling of a float that forgives sub-1e-9 representation error,
/// so near-integral powers round instead of jumping a whole group.
fn ceil_guarded(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

fn group_count(m: usize, level: u32) -> usize {
    let eta = 1.0 / ((1u64 << level) as f64 - 1.0);
    ceil_guarded((m as f64).powf(1.0 - eta)).clamp(1, m)
}

/// Balanced sizes: `m` items in `groups` groups, earlier groups take the
/// remainder.
pub fn balanced_partition(m: usize, groups: usize) -> Vec<usize> {
    assert!(groups >= 1 && groups <= m.max(1));
    (0..groups)
        .map(|g| m / groups + usize::from(g < m % groups))
        .collect()
}

/// Contiguous balanced split; callers wanting a random partition shuffle
/// `items` first.
pub fn partition_items(items: &[usize], groups: usize) -> Vec<Vec<usize>> {
    let sizes = balanced_partition(items.len(), groups);
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for sz in sizes {
        out.push(items[start..start + sz].to_vec());
        start += sz;
    }
    out
}

/// All-pairs stage on a slice of item ids. Returns the winner (most wins,
/// ties to the lowest id) and the win counts aligned with `items`.
pub fn round_robin_winner(
    items: &[usize],
    oracle: &mut dyn ComparatorOracle,
) -> Result<(usize, Vec<u32>), SelectError> {
    if items.is_empty() {
        return Err(SelectError::NoItems);
    }
    let mut wins = vec![0u32; items.len()];
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let w = oracle.query(items[a], items[b])?;
            if w == items[a] {
                wins[a] += 1;
            } else {
                wins[b] += 1;
            }
        }
    }
    let mut best = 0;
    for i in 1..items.len() {
        if wins[i] > wins[best] || (wins[i] == wins[best] && items[i] < items[best]) {
            best = i;
        }
    }
    Ok((items[best], wins))
}

/// 2-approximate maximum in a single round: every pair once, most wins.
pub fn round_robin(
    items: &[usize],
    oracle: &mut dyn ComparatorOracle,
) -> Result<SelectionResult, SelectError> {
    let before = oracle.stats().total;
    oracle.begin_round();
    let (winner, _) = round_robin_winner(items, oracle)?;
    let queries = oracle.stats().total - before;
    Ok(SelectionResult::new(winner, vec![queries], items.to_vec()))
}

fn run_single_level(
    pool: &mut Vec<usize>,
    groups: usize,
    oracle: &mut dyn ComparatorOracle,
    queries_per_round: &mut Vec<u64>,
) -> Result<(), SelectError> {
    let before = oracle.stats().total;
    oracle.begin_round();
    let mut next = Vec::with_capacity(groups);
    let mut start = 0;
    for sz in balanced_partition(pool.len(), groups) {
        let (w, _) = round_robin_winner(&pool[start..start + sz], oracle)?;
        next.push(w);
        start += sz;
    }
    *pool = next;
    queries_per_round.push(oracle.stats().total - before);
    Ok(())
}

/// Runs the shrinking levels from `t` downward; with `halt_before_final`
/// the closing all-pairs level is skipped and the pool holds its would-be
/// entrants. Returns the pool that entered the last executed level.
fn run_levels(
    pool: &mut Vec<usize>,
    t: u32,
    halt_before_final: bool,
    oracle: &mut dyn ComparatorOracle,
    queries_per_round: &mut Vec<u64>,
) -> Result<Vec<usize>, SelectError> {
    let mut last_entrants = pool.clone();
    for level in (1..=t).rev() {
        let m = pool.len();
        if m <= 1 {
            break;
        }
        if level == 1 && halt_before_final {
            break;
        }
        let groups = group_count(m, level);
        if groups == m {
            // Singleton groups issue no queries; the level is skipped.
            continue;
        }
        last_entrants = pool.clone();
        run_single_level(pool, groups, oracle, queries_per_round)?;
    }
    Ok(last_entrants)
}

/// The t-level shrinking tournament; a 2t-approximation against any oracle.
pub fn multi_round(
    items: &[usize],
    t: u32,
    oracle: &mut dyn ComparatorOracle,
) -> Result<SelectionResult, SelectError> {
    if items.is_empty() {
        return Err(SelectError::NoItems);
    }
    if t == 0 || t > 30 {
        return Err(SelectError::BadDepth(t));
    }
    if items.len() == 1 {
        return Ok(SelectionResult::new(items[0], vec![0], items.to_vec()));
    }
    let mut pool = items.to_vec();
    let mut queries_per_round = Vec::new();
    let survivors = run_levels(&mut pool, t, false, oracle, &mut queries_per_round)?;
    Ok(SelectionResult::new(pool[0], queries_per_round, survivors))
}

/// The named two-level special case of the shrinking tournament.
pub fn two_round(
    items: &[usize],
    oracle: &mut dyn ComparatorOracle,
) -> Result<SelectionResult, SelectError> {
    multi_round(items, 2, oracle)
}

/// Exact query count of `multi_round` on `k` items: the schedule depends
/// only on sizes, never on answers, so the count is a closed function of
/// (k, t) under the implemented rounding.
pub fn multi_round_query_count(k: usize, t: u32) -> u64 {
    let mut m = k;
    let mut total = 0u64;
    for level in (1..=t).rev() {
        if m <= 1 {
            break;
        }
        let groups = group_count(m, level);
        if groups == m {
            continue;
        }
        for sz in balanced_partition(m, groups) {
            total += (sz as u64) * (sz as u64 - 1) / 2;
        }
        m = groups;
    }
    total
}

fn padding_size(k: usize, t: u32, h_const: f64) -> usize {
    let exponent = (1u64 << (t - 1)) as f64 / ((1u64 << t) as f64 - 1.0);
    ceil_guarded(h_const * (k as f64).powf(exponent)).min(k)
}

/// Survivor-pool size after halting one level early; deterministic in
/// (k, t).
pub fn survivor_count(k: usize, t: u32) -> usize {
    let mut m = k;
    for level in (2..=t).rev() {
        if m <= 1 {
            break;
        }
        let groups = group_count(m, level);
        if groups < m {
            m = groups;
        }
    }
    m
}

/// Worst-case query count of `better_multi_round` with the given padding
/// constant: all shrinking levels plus a final round robin on the largest
/// possible deduplicated union.
pub fn better_multi_round_query_bound(k: usize, t: u32, h_const: f64) -> u64 {
    let mut m = k;
    let mut total = 0u64;
    for level in (2..=t).rev() {
        if m <= 1 {
            break;
        }
        let groups = group_count(m, level);
        if groups == m {
            continue;
        }
        for sz in balanced_partition(m, groups) {
            total += (sz as u64) * (sz as u64 - 1) / 2;
        }
        m = groups;
    }
    let finalists = (m + padding_size(k, t, h_const)).min(k) as u64;
    total + finalists * (finalists - 1) / 2
}

pub const DEFAULT_PAD_CONST: f64 = 100.0;

/// Randomized variant: shuffle, run the shrinking levels but halt before
/// the final one, then round-robin the survivors together with a uniform
/// sample of `min(k, ceil(h_const * k^(2^(t-1)/(2^t-1))))` items. With the
/// stock constant this is a 3-approximation with probability 9/10.
pub fn better_multi_round(
    items: &[usize],
    t: u32,
    oracle: &mut dyn ComparatorOracle,
    rng: &mut dyn RngCore,
) -> Result<SelectionResult, SelectError> {
    better_multi_round_with(items, t, DEFAULT_PAD_CONST, oracle, rng)
}

pub fn better_multi_round_with(
    items: &[usize],
    t: u32,
    h_const: f64,
    oracle: &mut dyn ComparatorOracle,
    rng: &mut dyn RngCore,
) -> Result<SelectionResult, SelectError> {
    if items.is_empty() {
        return Err(SelectError::NoItems);
    }
    if t == 0 || t > 30 {
        return Err(SelectError::BadDepth(t));
    }
    let k = items.len();
    let mut pool = items.to_vec();
    pool.shuffle(rng);
    let mut queries_per_round = Vec::new();
    run_levels(&mut pool, t, true, oracle, &mut queries_per_round)?;
    // Halting early leaves the would-be final entrants in the pool.
    let survivors = pool.clone();

    let pad = padding_size(k, t, h_const);
    let mut sampled: Vec<usize> = if pad >= k {
        items.to_vec()
    } else {
        rand::seq::index::sample(rng, k, pad)
            .into_iter()
            .map(|p| items[p])
            .collect()
    };
    sampled.sort_unstable();

    let mut finalists = survivors.clone();
    finalists.extend_from_slice(&sampled);
    finalists.sort_unstable();
    finalists.dedup();

    let before = oracle.stats().total;
    oracle.begin_round();
    let (winner, _) = round_robin_winner(&finalists, oracle)?;
    queries_per_round.push(oracle.stats().total - before);

    let mut result = SelectionResult::new(winner, queries_per_round, survivors);
    result.sampled_set = sampled;
    Ok(result)
}

/// Repeats a base procedure and round-robins the distinct winners,
/// trading extra queries for success probability.
pub fn amplify<F>(
    base: &mut F,
    repetitions: u32,
    oracle: &mut dyn ComparatorOracle,
    rng: &mut dyn RngCore,
) -> Result<SelectionResult, SelectError>
where
    F: FnMut(&mut dyn ComparatorOracle, &mut dyn RngCore) -> Result<SelectionResult, SelectError>,
{
    if repetitions == 0 {
        return Err(SelectError::BadReps);
    }
    if repetitions == 1 {
        return base(oracle, rng);
    }
    let mut winners = Vec::with_capacity(repetitions as usize);
    let mut queries_per_round = Vec::new();
    for _ in 0..repetitions {
        let r = base(oracle, rng)?;
        winners.push(r.winner);
        queries_per_round.extend(r.queries_per_round);
    }
    winners.sort_unstable();
    winners.dedup();
    let winner = if winners.len() == 1 {
        winners[0]
    } else {
        let before = oracle.stats().total;
        oracle.begin_round();
        let (w, _) = round_robin_winner(&winners, oracle)?;
        queries_per_round.push(oracle.stats().total - before);
        w
    };
    Ok(SelectionResult::new(winner, queries_per_round, winners))
}

/// The depth that makes the shrinking tournament's round count grow like
/// log log k.
pub fn suggested_depth(k: usize) -> u32 {
    if k < 4 {
        return 1;
    }
    let ll = (k as f64).log2().log2();
    ll.ceil() as u32 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparator::{GapComparator, TiePolicy};
    use crate::stream::child_rng;

    fn ids(k: usize) -> Vec<usize> {
        (0..k).collect()
    }

    fn spaced(k: usize) -> GapComparator {
        GapComparator::new((0..k).map(|i| 2.0 * i as f64).collect(), TiePolicy::FavorLower, 0)
            .unwrap()
    }

    #[test]
    fn partition_shapes() {
        assert_eq!(balanced_partition(10, 3), vec![4, 3, 3]);
        assert_eq!(balanced_partition(9, 3), vec![3, 3, 3]);
        assert_eq!(balanced_partition(5, 5), vec![1, 1, 1, 1, 1]);
        let groups = partition_items(&[7, 8, 9, 10], 2);
        assert_eq!(groups, vec![vec![7, 8], vec![9, 10]]);
        let all: Vec<usize> = groups.into_iter().flatten().collect();
        assert_eq!(all, vec![7, 8, 9, 10]);
    }

    #[test]
    fn round_robin_counts_and_winner() {
        let mut c = spaced(4);
        let r = round_robin(&ids(4), &mut c).unwrap();
        assert_eq!(r.queries_total, 6);
        assert_eq!(r.rounds_used, 1);
        assert_eq!(r.winner, 3);
        let mut c2 = spaced(2);
        let r2 = round_robin(&ids(2), &mut c2).unwrap();
        assert_eq!(r2.queries_total, 1);
        assert_eq!(r2.winner, 1);
    }

    #[test]
    fn round_robin_tie_goes_to_lowest_id() {
        // Everybody ties; favor_lower gives item 0 all wins, but check the
        // most-wins rule breaks count ties by id: with uniform orientations
        // the winner must still be a max-wins item.
        let mut c = GapComparator::new(vec![0.0; 5], TiePolicy::UniformRandom, 3).unwrap();
        let (w, wins) = round_robin_winner(&ids(5), &mut c).unwrap();
        let top = *wins.iter().max().unwrap();
        let lowest_top = (0..5).find(|&i| wins[i] == top).unwrap();
        assert_eq!(w, lowest_top);
    }

    #[test]
    fn single_item_short_circuits() {
        let mut c = spaced(3);
        let r = round_robin(&[2], &mut c).unwrap();
        assert_eq!(r.winner, 2);
        assert_eq!(r.queries_total, 0);
        assert_eq!(r.rounds_used, 1);
        let m = multi_round(&[2], 3, &mut c).unwrap();
        assert_eq!(m.winner, 2);
        assert_eq!(m.queries_total, 0);
    }

    #[test]
    fn depth_one_is_round_robin() {
        let mut a = spaced(9);
        let mut b = spaced(9);
        let r1 = multi_round(&ids(9), 1, &mut a).unwrap();
        let r2 = round_robin(&ids(9), &mut b).unwrap();
        assert_eq!(r1.winner, r2.winner);
        assert_eq!(r1.queries_total, r2.queries_total);
        assert_eq!(r1.rounds_used, 1);
    }

    #[test]
    fn two_level_structure_on_64() {
        let mut c = spaced(64);
        let r = two_round(&ids(64), &mut c).unwrap();
        assert_eq!(r.queries_per_round, vec![96, 120]);
        assert_eq!(r.rounds_used, 2);
        assert_eq!(r.winner, 63);
        assert_eq!(r.survivors.len(), 16);
        assert_eq!(multi_round_query_count(64, 2), 216);
    }

    #[test]
    fn measured_queries_match_closed_form() {
        for t in 1..=4 {
            for k in [2usize, 5, 16, 33, 64, 100] {
                let mut c = spaced(k);
                let r = multi_round(&ids(k), t, &mut c).unwrap();
                assert_eq!(
                    r.queries_total,
                    multi_round_query_count(k, t),
                    "k={k} t={t}"
                );
                assert_eq!(r.winner, k - 1);
            }
        }
    }

    #[test]
    fn query_bound_and_rounds() {
        for t in 1..=4u32 {
            for k in [16usize, 64, 256] {
                let count = multi_round_query_count(k, t);
                let cap = 4.0
                    * (k as f64).powf(1.0 + 1.0 / ((1u64 << t) as f64 - 1.0))
                    * t as f64;
                assert!((count as f64) <= cap, "k={k} t={t}: {count} > {cap}");
                let mut c = spaced(k);
                let r = multi_round(&ids(k), t, &mut c).unwrap();
                assert_eq!(r.rounds_used, t, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn survivor_counts_at_integral_powers() {
        assert_eq!(survivor_count(64, 2), 16);
        assert_eq!(survivor_count(128, 3), 16);
        assert_eq!(survivor_count(32768, 4), 256);
        // t=1 halts immediately: everything survives.
        assert_eq!(survivor_count(10, 1), 10);
    }

    #[test]
    fn randomized_variant_reports_survivors_and_sample() {
        let mut c = spaced(64);
        let mut rng = child_rng(5, "bmr", 0);
        let r = better_multi_round(&ids(64), 2, &mut c, &mut rng).unwrap();
        assert_eq!(r.survivors.len(), 16);
        // Stock padding constant swallows the whole item set at this size.
        assert_eq!(r.sampled_set.len(), 64);
        assert_eq!(r.winner, 63);
        assert_eq!(r.rounds_used, 2);
        let bound = better_multi_round_query_bound(64, 2, DEFAULT_PAD_CONST);
        assert!(r.queries_total <= bound);
    }

    #[test]
    fn zero_padding_round_robins_survivors_only() {
        let mut c = spaced(64);
        let mut rng = child_rng(5, "bmr0", 0);
        let r = better_multi_round_with(&ids(64), 2, 0.0, &mut c, &mut rng).unwrap();
        assert!(r.sampled_set.is_empty());
        assert_eq!(r.survivors.len(), 16);
        assert_eq!(r.queries_total, 96 + 120);
        assert_eq!(r.winner, 63);
    }

    #[test]
    fn depth_one_randomized_is_full_round_robin() {
        let mut c = spaced(7);
        let mut rng = child_rng(5, "bmr1", 0);
        let r = better_multi_round(&ids(7), 1, &mut c, &mut rng).unwrap();
        assert_eq!(r.queries_total, 21);
        assert_eq!(r.winner, 6);
        assert_eq!(r.survivors.len(), 7);
    }

    #[test]
    fn amplification_single_rep_is_identity() {
        let mut c = spaced(16);
        let mut rng = child_rng(5, "amp", 0);
        let mut base = |o: &mut dyn ComparatorOracle, r: &mut dyn RngCore| {
            better_multi_round(&ids(16), 2, o, r)
        };
        let r = amplify(&mut base, 1, &mut c, &mut rng).unwrap();
        assert_eq!(r.winner, 15);
        assert!(!r.sampled_set.is_empty());
    }

    #[test]
    fn amplification_accounting() {
        // Truthful oracle: every rep returns the max, dedup leaves one
        // winner and the combination stage issues no queries.
        let mut c = spaced(16);
        let mut rng = child_rng(5, "amp3", 0);
        let mut base = |o: &mut dyn ComparatorOracle, r: &mut dyn RngCore| {
            better_multi_round(&ids(16), 2, o, r)
        };
        let r = amplify(&mut base, 3, &mut c, &mut rng).unwrap();
        assert_eq!(r.winner, 15);
        assert_eq!(r.survivors, vec![15]);
        assert_eq!(
            r.queries_total,
            r.queries_per_round.iter().sum::<u64>()
        );
        assert!(matches!(
            amplify(&mut base, 0, &mut c, &mut rng),
            Err(SelectError::BadReps)
        ));
    }

    #[test]
    fn suggested_depths() {
        assert_eq!(suggested_depth(16), 3);
        assert_eq!(suggested_depth(64), 4);
        assert_eq!(suggested_depth(256), 4);
        assert_eq!(suggested_depth(4), 2);
        assert_eq!(suggested_depth(2), 1);
    }

    #[test]
    fn rejects_empty_and_bad_depth() {
        let mut c = spaced(4);
        assert!(matches!(round_robin(&[], &mut c), Err(SelectError::NoItems)));
        assert!(matches!(
            multi_round(&ids(4), 0, &mut c),
            Err(SelectError::BadDepth(0))
        ));
    }
}
