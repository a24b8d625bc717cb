//! Comparison oracles for maximum selection.
//!
//! An oracle answers "which of items i and j is larger" and is only required
//! to answer truthfully when the underlying values differ by more than one;
//! inside that margin it may answer arbitrarily, as long as repeated queries
//! of the same pair stay consistent. `GapComparator` realizes several tie
//! behaviors over explicit values, and `LayeredTournament` realizes the
//! nested-layer instance that defeats low-budget selection strategies.

use crate::stream::mix64;

pub const MAX_ADAPTIVE_ITEMS: usize = 8192;

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("item index {0} outside 0..{1}")]
    IndexOutOfRange(usize, usize),
    #[error("an item cannot be compared with itself (index {0})")]
    SelfCompare(usize),
    #[error("adaptive tie handling keeps a dense answer matrix; {0} items exceeds the cap of {1}")]
    TooManyItems(usize, usize),
    #[error("need at least two items, got {0}")]
    TooFewItems(usize),
    #[error("layer schedule needs depth >= 1, got {0}")]
    BadDepth(u32),
    #[error("k = {k} cannot support a {t}-layer construction")]
    KTooSmall { k: usize, t: u32 },
    #[error("oracle ran out of backing users: {needed} more needed, {available} left")]
    Exhausted { needed: u64, available: u64 },
}

/// Query accounting. `begin_round` opens a new adaptivity round; everything
/// recorded before the first call lands in round zero.
#[derive(Debug, Clone, Default)]
pub struct QueryStats {
    pub total: u64,
    pub per_round: Vec<u64>,
}

impl QueryStats {
    pub fn new() -> Self {
        QueryStats {
            total: 0,
            per_round: vec![0],
        }
    }

    pub(crate) fn record(&mut self) {
        self.total += 1;
        *self.per_round.last_mut().expect("at least one round") += 1;
    }

    pub(crate) fn open_round(&mut self) {
        self.per_round.push(0);
    }
}

pub trait ComparatorOracle {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the winning index, either `i` or `j`.
    fn query(&mut self, i: usize, j: usize) -> Result<usize, CompareError>;

    fn begin_round(&mut self);

    fn stats(&self) -> &QueryStats;
}

/// How a `GapComparator` resolves queries whose value gap is at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// The lower index wins every contested query.
    FavorLower,
    /// The higher index wins every contested query.
    FavorHigher,
    /// Each unordered pair gets a fixed fair-coin orientation.
    UniformRandom,
    /// Adversarial: the item with more recorded losses wins, and previous
    /// answers are never contradicted.
    GreedyAdaptive,
}

fn pair_bit(seed: u64, lo: usize, hi: usize) -> bool {
    let packed = ((lo as u64) << 32) | hi as u64;
    mix64(seed ^ mix64(packed)) & 1 == 1
}

/// A comparator over explicit values, truthful outside the unit margin.
pub struct GapComparator {
    values: Vec<f64>,
    policy: TiePolicy,
    seed: u64,
    stats: QueryStats,
    /// Adaptive state, indexed `lo * len + hi`: 0 unanswered, 1 lo won,
    /// 2 hi won. Empty for the non-adaptive policies.
    answered: Vec<u8>,
    losses: Vec<u32>,
}

impl GapComparator {
    pub fn new(values: Vec<f64>, policy: TiePolicy, seed: u64) -> Result<Self, CompareError> {
        let k = values.len();
        if k < 2 {
            return Err(CompareError::TooFewItems(k));
        }
        let answered = if policy == TiePolicy::GreedyAdaptive {
            if k > MAX_ADAPTIVE_ITEMS {
                return Err(CompareError::TooManyItems(k, MAX_ADAPTIVE_ITEMS));
            }
            vec![0u8; k * k]
        } else {
            Vec::new()
        };
        Ok(GapComparator {
            losses: vec![0; k],
            values,
            policy,
            seed,
            stats: QueryStats::new(),
            answered,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, i: usize, j: usize) -> Result<(), CompareError> {
        let k = self.values.len();
        if i >= k {
            return Err(CompareError::IndexOutOfRange(i, k));
        }
        if j >= k {
            return Err(CompareError::IndexOutOfRange(j, k));
        }
        if i == j {
            return Err(CompareError::SelfCompare(i));
        }
        Ok(())
    }

    fn resolve_tie(&mut self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        match self.policy {
            TiePolicy::FavorLower => lo,
            TiePolicy::FavorHigher => hi,
            TiePolicy::UniformRandom => {
                if pair_bit(self.seed, lo, hi) {
                    hi
                } else {
                    lo
                }
            }
            TiePolicy::GreedyAdaptive => {
                let k = self.values.len();
                let cell = lo * k + hi;
                match self.answered[cell] {
                    1 => lo,
                    2 => hi,
                    _ => {
                        // Reward the bigger loser to keep the field level.
                        let winner = if self.losses[hi] > self.losses[lo] { hi } else { lo };
                        self.answered[cell] = if winner == lo { 1 } else { 2 };
                        winner
                    }
                }
            }
        }
    }
}

impl ComparatorOracle for GapComparator {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn query(&mut self, i: usize, j: usize) -> Result<usize, CompareError> {
        self.check(i, j)?;
        self.stats.record();
        let gap = (self.values[i] - self.values[j]).abs();
        let winner = if gap > 1.0 {
            if self.values[i] > self.values[j] {
                i
            } else {
                j
            }
        } else {
            self.resolve_tie(i, j)
        };
        let loser = if winner == i { j } else { i };
        self.losses[loser] += 1;
        Ok(winner)
    }

    fn begin_round(&mut self) {
        self.stats.open_round();
    }

    fn stats(&self) -> &QueryStats {
        &self.stats
    }
}

/// Unordered pairs whose value gap is at most one, i.e. the queries a
/// comparator may answer arbitrarily.
pub fn tie_pairs(values: &[f64]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for lo in 0..values.len() {
        for hi in lo + 1..values.len() {
            if (values[lo] - values[hi]).abs() <= 1.0 {
                pairs.push((lo, hi));
            }
        }
    }
    pairs
}

/// A comparator whose tie answers follow an explicit orientation mask, one
/// bit per listed pair. Sweeping the mask over `0..2^pairs` visits every
/// non-adaptive adversary for the given values, which is what the
/// worst-case selection checks enumerate. Tie pairs left unlisted fall
/// back to the lower index.
pub struct ScriptedComparator {
    values: Vec<f64>,
    ties: Vec<(usize, usize)>,
    /// Indexed `lo * k + hi`: 0 unscripted, 1 lo wins, 2 hi wins.
    table: Vec<u8>,
    stats: QueryStats,
}

impl ScriptedComparator {
    pub fn new(
        values: Vec<f64>,
        ties: &[(usize, usize)],
        mask: u64,
    ) -> Result<Self, CompareError> {
        let k = values.len();
        if k < 2 {
            return Err(CompareError::TooFewItems(k));
        }
        if ties.len() > 64 {
            return Err(CompareError::TooManyItems(ties.len(), 64));
        }
        for &(lo, hi) in ties {
            if hi >= k {
                return Err(CompareError::IndexOutOfRange(hi, k));
            }
            if lo >= hi {
                return Err(CompareError::SelfCompare(lo));
            }
        }
        let mut out = ScriptedComparator {
            table: vec![0u8; k * k],
            values,
            ties: ties.to_vec(),
            stats: QueryStats::new(),
        };
        out.set_mask(mask);
        Ok(out)
    }

    /// Re-orients every scripted pair per `mask` and resets the counters,
    /// so enumeration loops can reuse the allocation.
    pub fn set_mask(&mut self, mask: u64) {
        let k = self.values.len();
        for (b, &(lo, hi)) in self.ties.iter().enumerate() {
            self.table[lo * k + hi] = if mask >> b & 1 == 1 { 2 } else { 1 };
        }
        self.stats = QueryStats::new();
    }
}

impl ComparatorOracle for ScriptedComparator {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn query(&mut self, i: usize, j: usize) -> Result<usize, CompareError> {
        let k = self.values.len();
        if i >= k {
            return Err(CompareError::IndexOutOfRange(i, k));
        }
        if j >= k {
            return Err(CompareError::IndexOutOfRange(j, k));
        }
        if i == j {
            return Err(CompareError::SelfCompare(i));
        }
        self.stats.record();
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        if (self.values[lo] - self.values[hi]).abs() > 1.0 {
            return Ok(if self.values[i] > self.values[j] { i } else { j });
        }
        Ok(match self.table[lo * k + hi] {
            2 => hi,
            _ => lo,
        })
    }

    fn begin_round(&mut self) {
        self.stats.open_round();
    }

    fn stats(&self) -> &QueryStats {
        &self.stats
    }
}

/// Sizes of the nested layers for `k` items and depth `t`: layer `q` keeps
/// roughly `k^((2^t - 2^q) / (2^t - 1))` items, shrinking from all of them
/// down to the planted pair. Rounding is repaired so intermediate layers
/// strictly decrease; if that cannot be sustained with every layer holding
/// at least two items, k is too small for this depth.
pub fn layer_sizes(k: usize, t: u32) -> Result<Vec<usize>, CompareError> {
    if k < 4 {
        return Err(CompareError::KTooSmall { k, t });
    }
    if t == 0 || t > 30 {
        return Err(CompareError::BadDepth(t));
    }
    let denom = (1u64 << t) as f64 - 1.0;
    let mut sizes = Vec::with_capacity(t as usize + 1);
    sizes.push(k);
    for q in 1..t {
        let exponent = ((1u64 << t) - (1u64 << q)) as f64 / denom;
        let raw = (k as f64).powf(exponent).round() as usize;
        let prev = *sizes.last().expect("layer 0 present");
        let repaired = raw.min(prev - 1);
        if repaired < 2 {
            return Err(CompareError::KTooSmall { k, t });
        }
        sizes.push(repaired);
    }
    // The innermost layer is always the planted pair.
    sizes.push(2);
    Ok(sizes)
}

/// The hard instance: a hidden permutation assigns items to slots, nested
/// slot prefixes form layers, deeper layers beat shallower ones, slot 0
/// beats slot 1, and all remaining same-depth pairs get fixed fair-coin
/// orientations. Answers never depend on query history, so any replay is
/// consistent. Item values consistent with every answer exist and are
/// reported by `realized_values`.
pub struct LayeredTournament {
    sizes: Vec<usize>,
    /// slot_of[item] and item_at[slot] are inverse permutations.
    slot_of: Vec<usize>,
    item_at: Vec<usize>,
    depth_of_slot: Vec<u32>,
    seed: u64,
    stats: QueryStats,
}

impl LayeredTournament {
    pub fn new(k: usize, t: u32, seed: u64) -> Result<Self, CompareError> {
        let sizes = layer_sizes(k, t)?;
        let mut item_at: Vec<usize> = (0..k).collect();
        let mut rng_state = mix64(seed ^ 0x6c79_7273_6c6f_7473);
        for i in (1..k).rev() {
            rng_state = mix64(rng_state);
            let j = (rng_state % (i as u64 + 1)) as usize;
            item_at.swap(i, j);
        }
        let mut slot_of = vec![0usize; k];
        for (slot, &item) in item_at.iter().enumerate() {
            slot_of[item] = slot;
        }
        let mut depth_of_slot = vec![0u32; k];
        for (slot, depth) in depth_of_slot.iter_mut().enumerate() {
            *depth = sizes.iter().take_while(|&&u| slot < u).count() as u32 - 1;
        }
        Ok(LayeredTournament {
            sizes,
            slot_of,
            item_at,
            depth_of_slot,
            seed,
            stats: QueryStats::new(),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// The planted maximum, the unique node that wins every comparison.
    pub fn sink(&self) -> usize {
        self.item_at[0]
    }

    /// The decoy sharing the deepest layer; it loses only to the sink.
    pub fn runner_up(&self) -> usize {
        self.item_at[1]
    }

    /// Index of the deepest layer containing `item` (0 = outermost).
    pub fn depth_of(&self, item: usize) -> u32 {
        self.depth_of_slot[self.slot_of[item]]
    }

    fn winner_slot(&self, sa: usize, sb: usize) -> usize {
        let (da, db) = (self.depth_of_slot[sa], self.depth_of_slot[sb]);
        if da != db {
            return if da > db { sa } else { sb };
        }
        let (lo, hi) = if sa < sb { (sa, sb) } else { (sb, sa) };
        if lo == 0 && hi == 1 {
            return 0;
        }
        if pair_bit(self.seed, lo, hi) {
            hi
        } else {
            lo
        }
    }

    /// Item values every answer is truthful for: strongly connected groups
    /// of the answer digraph share a value, and consecutive groups sit two
    /// apart, so only within-group queries are contested.
    ///
    /// Groups fall out of the score sequence: sorting items by win count,
    /// the first m form a union of bottom groups exactly when their wins
    /// are all internal, i.e. sum to m(m-1)/2.
    pub fn realized_values(&self) -> Vec<f64> {
        let k = self.slot_of.len();
        let mut wins = vec![0u64; k];
        for sa in 0..k {
            for sb in sa + 1..k {
                wins[self.winner_slot(sa, sb)] += 1;
            }
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&s| wins[s]);
        let mut values = vec![0.0f64; k];
        let mut cumulative = 0u64;
        let mut block_start = 0usize;
        let mut block_rank = 0u64;
        for (m, &slot) in order.iter().enumerate() {
            cumulative += wins[slot];
            let played = (m + 1) as u64 * m as u64 / 2;
            if cumulative == played {
                for &s in &order[block_start..=m] {
                    values[self.item_at[s]] = 2.0 * block_rank as f64;
                }
                block_start = m + 1;
                block_rank += 1;
            }
        }
        debug_assert_eq!(block_start, k, "score sequence must close every group");
        values
    }
}

impl ComparatorOracle for LayeredTournament {
    fn len(&self) -> usize {
        self.slot_of.len()
    }

    fn query(&mut self, i: usize, j: usize) -> Result<usize, CompareError> {
        let k = self.slot_of.len();
        if i >= k {
            return Err(CompareError::IndexOutOfRange(i, k));
        }
        if j >= k {
            return Err(CompareError::IndexOutOfRange(j, k));
        }
        if i == j {
            return Err(CompareError::SelfCompare(i));
        }
        self.stats.record();
        let winner_slot = self.winner_slot(self.slot_of[i], self.slot_of[j]);
        Ok(self.item_at[winner_slot])
    }

    fn begin_round(&mut self) {
        self.stats.open_round();
    }

    fn stats(&self) -> &QueryStats {
        &self.stats
    }
}
