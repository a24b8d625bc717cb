//! End-to-end private hypothesis selection. A population of users, each
//! holding one sample, backs a pairwise Scheffe comparator; the low-round
//! tournament then picks a hypothesis close to the data distribution. Every
//! comparison consumes a fresh disjoint group of users, so the whole run is
//! epsilon-LDP regardless of how many comparisons the tournament issues.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::comparator::{ComparatorOracle, CompareError, QueryStats};
use crate::dist::{tv_distance, Dist, DistError, HypothesisSet};
use crate::mech::{LedgerError, MechError, PrivacyLedger, PrivacyParams};
use crate::scheffe::{ldp_scheffe, ScheffeError};
use crate::select::{
    better_multi_round_query_bound, better_multi_round_with, round_robin, SelectError,
    SelectionResult,
};
use crate::transcript::{RoundRecord, Transcript};

/// Group-size constant in `g = ceil(C ln(m/beta) / (eps^2 alpha^2))`.
/// Calibrated so the stock tournament succeeds well above 9/10 at k = 16.
pub const DEFAULT_GROUP_CONST: f64 = 2.0;

/// Slack in the comparison contract: a Scheffe query is only guaranteed
/// truthful when one hypothesis is at least `(3 + GAMMA0)` times farther
/// from the data distribution than the other.
pub const GAMMA0: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("population too small: need {needed} users, have {available}")]
    NotEnoughUsers { needed: u64, available: u64 },
    #[error("accuracy target alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("failure probability must lie in (0, 1), got {0}")]
    BadBeta(f64),
    #[error("constant must be positive and finite, got {0}")]
    BadConstant(f64),
    #[error("user sample {0} outside alphabet 0..{1}")]
    SampleOutOfRange(usize, usize),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Mech(#[from] MechError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Scheffe(#[from] ScheffeError),
    #[error(transparent)]
    Select(#[from] SelectError),
}

/// A pool of users consumed left to right. Each user holds one sample and
/// is charged on the shared ledger the moment a comparison uses them; the
/// cursor never moves backwards, so no user ever answers twice.
#[derive(Debug, Clone)]
pub struct UserPopulation {
    samples: Vec<usize>,
    cursor: usize,
    ledger: PrivacyLedger,
    round: usize,
}

impl UserPopulation {
    pub fn new(samples: Vec<usize>) -> Self {
        let n = samples.len();
        UserPopulation {
            samples,
            cursor: 0,
            ledger: PrivacyLedger::new(n),
            round: 0,
        }
    }

    /// Draws `n` i.i.d. samples from `p`, one per user.
    pub fn from_dist<R: rand::Rng + ?Sized>(p: &Dist, n: usize, rng: &mut R) -> Self {
        let samples = (0..n).map(|_| p.sample(rng)).collect();
        UserPopulation::new(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.samples.len() - self.cursor
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn advance_round(&mut self) {
        self.round += 1;
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> PrivacyLedger {
        self.ledger
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    /// Hands out the next `g` users, or `None` if fewer remain. The copies
    /// stay cheap because `g` is the per-comparison group size.
    fn take(&mut self, g: usize) -> Option<(usize, Vec<usize>)> {
        if self.remaining() < g {
            return None;
        }
        let start = self.cursor;
        self.cursor += g;
        Some((start, self.samples[start..self.cursor].to_vec()))
    }
}

/// Comparison oracle over a hypothesis set, answered by private Scheffe
/// tests. Query `(i, j)` burns one fresh group of users and returns the
/// hypothesis the debiased witness-mass estimate favours.
#[derive(Debug)]
pub struct ScheffeComparator<'a> {
    hypotheses: &'a HypothesisSet,
    population: UserPopulation,
    privacy: PrivacyParams,
    group_size: usize,
    rng: ChaCha8Rng,
    stats: QueryStats,
    /// Cursor snapshot taken when each round opened.
    round_starts: Vec<usize>,
}

impl<'a> ScheffeComparator<'a> {
    pub fn new(
        hypotheses: &'a HypothesisSet,
        population: UserPopulation,
        privacy: PrivacyParams,
        group_size: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, ReduceError> {
        if group_size == 0 {
            return Err(ReduceError::BadConstant(0.0));
        }
        let n = hypotheses.alphabet_size();
        for &s in population.samples() {
            if s >= n {
                return Err(ReduceError::SampleOutOfRange(s, n));
            }
        }
        Ok(ScheffeComparator {
            hypotheses,
            population,
            privacy,
            group_size,
            rng,
            stats: QueryStats::new(),
            round_starts: vec![0],
        })
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn population(&self) -> &UserPopulation {
        &self.population
    }

    pub fn into_population(self) -> UserPopulation {
        self.population
    }

    /// One record per round that issued at least one comparison. User
    /// ranges come from the cursor snapshots, so they are disjoint by
    /// construction.
    pub fn transcript(&self) -> Transcript {
        let mut rounds = Vec::new();
        for (r, &q) in self.stats.per_round.iter().enumerate() {
            let start = self.round_starts[r];
            let end = match self.round_starts.get(r + 1) {
                Some(&next) => next,
                None => self.population.consumed(),
            };
            if q == 0 {
                debug_assert_eq!(start, end);
                continue;
            }
            rounds.push(RoundRecord {
                comparisons: q as usize,
                user_start: start,
                user_end: end,
                messages: end - start,
            });
        }
        Transcript { rounds }
    }
}

impl ComparatorOracle for ScheffeComparator<'_> {
    fn len(&self) -> usize {
        self.hypotheses.len()
    }

    fn query(&mut self, i: usize, j: usize) -> Result<usize, CompareError> {
        let k = self.hypotheses.len();
        if i >= k {
            return Err(CompareError::IndexOutOfRange(i, k));
        }
        if j >= k {
            return Err(CompareError::IndexOutOfRange(j, k));
        }
        if i == j {
            return Err(CompareError::SelfCompare(i));
        }
        let (start, group) = self.population.take(self.group_size).ok_or({
            CompareError::Exhausted {
                needed: self.group_size as u64,
                available: self.population.remaining() as u64,
            }
        })?;
        let round = self.population.round();
        let out = ldp_scheffe(
            self.hypotheses.get(i),
            self.hypotheses.get(j),
            &group,
            &self.privacy,
            &mut self.rng,
            Some((&mut self.population.ledger, start, round)),
        )
        .expect("comparator inputs validated at construction");
        self.stats.record();
        Ok(if out.chosen == 0 { i } else { j })
    }

    fn begin_round(&mut self) {
        self.population.advance_round();
        self.stats.open_round();
        self.round_starts.push(self.population.consumed());
    }

    fn stats(&self) -> &QueryStats {
        &self.stats
    }
}

/// Knobs for a full selection run. `t` is the tournament depth, `h_const`
/// the padding constant of the randomized final round, `c_const` the
/// group-size constant.
#[derive(Debug, Clone, Copy)]
pub struct HsConfig {
    pub privacy: PrivacyParams,
    pub alpha: f64,
    pub beta_fail: f64,
    pub t: u32,
    pub h_const: f64,
    pub c_const: f64,
}

impl HsConfig {
    pub fn new(
        privacy: PrivacyParams,
        alpha: f64,
        beta_fail: f64,
        t: u32,
    ) -> Result<Self, ReduceError> {
        HsConfig::with_constants(
            privacy,
            alpha,
            beta_fail,
            t,
            crate::select::DEFAULT_PAD_CONST,
            DEFAULT_GROUP_CONST,
        )
    }

    pub fn with_constants(
        privacy: PrivacyParams,
        alpha: f64,
        beta_fail: f64,
        t: u32,
        h_const: f64,
        c_const: f64,
    ) -> Result<Self, ReduceError> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(ReduceError::BadAlpha(alpha));
        }
        if !beta_fail.is_finite() || beta_fail <= 0.0 || beta_fail >= 1.0 {
            return Err(ReduceError::BadBeta(beta_fail));
        }
        if !h_const.is_finite() || h_const < 0.0 {
            return Err(ReduceError::BadConstant(h_const));
        }
        if !c_const.is_finite() || c_const <= 0.0 {
            return Err(ReduceError::BadConstant(c_const));
        }
        if t == 0 || t > 30 {
            return Err(SelectError::BadDepth(t).into());
        }
        Ok(HsConfig {
            privacy,
            alpha,
            beta_fail,
            t,
            h_const,
            c_const,
        })
    }
}

/// What a run will cost before it starts: a worst-case comparison count,
/// the per-comparison group size, and their product in users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonBudget {
    pub comparisons: u64,
    pub group_size: usize,
    pub users_required: u64,
}

fn group_size_for(m_total: u64, cfg: &HsConfig) -> usize {
    let eps = cfg.privacy.epsilon;
    let m = m_total.max(1) as f64;
    let g = cfg.c_const * (m / cfg.beta_fail).ln() / (eps * eps * cfg.alpha * cfg.alpha);
    g.ceil() as usize
}

fn budget_from(m_total: u64, cfg: &HsConfig) -> ComparisonBudget {
    let comparisons = m_total.max(1);
    let group_size = group_size_for(comparisons, cfg);
    ComparisonBudget {
        comparisons,
        group_size,
        users_required: comparisons * group_size as u64,
    }
}

/// Worst-case budget of `hypothesis_select_ldp` on `k` hypotheses. The
/// group size grows only logarithmically with the comparison count, so a
/// union bound over every comparison still leaves `n` quasi-linear in `k`.
pub fn comparison_budget(k: usize, cfg: &HsConfig) -> Result<ComparisonBudget, ReduceError> {
    if k == 0 {
        return Err(SelectError::NoItems.into());
    }
    Ok(budget_from(
        better_multi_round_query_bound(k, cfg.t, cfg.h_const),
        cfg,
    ))
}

#[derive(Debug)]
pub struct HsResult {
    pub chosen: usize,
    pub selection: SelectionResult,
    pub budget: ComparisonBudget,
    pub users_consumed: usize,
    pub transcript: Transcript,
    pub ledger: PrivacyLedger,
}

fn finish_run(
    comparator: ScheffeComparator<'_>,
    selection: SelectionResult,
    budget: ComparisonBudget,
    epsilon: f64,
) -> Result<HsResult, ReduceError> {
    let transcript = comparator.transcript();
    debug_assert!(transcript.users_disjoint());
    let population = comparator.into_population();
    let users_consumed = population.consumed();
    debug_assert_eq!(
        users_consumed as u64,
        selection.queries_total * budget.group_size as u64
    );
    let ledger = population.into_ledger();
    ledger.assert_budget(epsilon)?;
    Ok(HsResult {
        chosen: selection.winner,
        selection,
        budget,
        users_consumed,
        transcript,
        ledger,
    })
}

/// Runs the randomized low-round tournament over `hypotheses` with fresh
/// user groups per comparison. Succeeds with probability at least
/// `1 - beta_fail - 1/10` in producing a hypothesis within
/// `(6 + 2 * GAMMA0) * OPT + alpha` of the data distribution.
pub fn hypothesis_select_ldp(
    hypotheses: &HypothesisSet,
    population: UserPopulation,
    cfg: &HsConfig,
    rng: &mut dyn RngCore,
) -> Result<HsResult, ReduceError> {
    let k = hypotheses.len();
    let budget = comparison_budget(k, cfg)?;
    if (population.remaining() as u64) < budget.users_required {
        return Err(ReduceError::NotEnoughUsers {
            needed: budget.users_required,
            available: population.remaining() as u64,
        });
    }
    let comp_rng = ChaCha8Rng::from_rng(&mut *rng).expect("seeding from a live generator");
    let mut comparator =
        ScheffeComparator::new(hypotheses, population, cfg.privacy, budget.group_size, comp_rng)?;
    let items: Vec<usize> = (0..k).collect();
    let selection = better_multi_round_with(&items, cfg.t, cfg.h_const, &mut comparator, rng)?;
    finish_run(comparator, selection, budget, cfg.privacy.epsilon)
}

/// One-round baseline: a full round-robin with the same group sizing. Uses
/// `Theta(k^2)` comparisons, each backed by its own user group.
pub fn naive_round_robin_ldp(
    hypotheses: &HypothesisSet,
    population: UserPopulation,
    cfg: &HsConfig,
    rng: &mut dyn RngCore,
) -> Result<HsResult, ReduceError> {
    let k = hypotheses.len();
    if k == 0 {
        return Err(SelectError::NoItems.into());
    }
    let pairs = (k as u64) * (k as u64 - 1) / 2;
    let budget = budget_from(pairs, cfg);
    if (population.remaining() as u64) < budget.users_required {
        return Err(ReduceError::NotEnoughUsers {
            needed: budget.users_required,
            available: population.remaining() as u64,
        });
    }
    let comp_rng = ChaCha8Rng::from_rng(&mut *rng).expect("seeding from a live generator");
    let mut comparator =
        ScheffeComparator::new(hypotheses, population, cfg.privacy, budget.group_size, comp_rng)?;
    let items: Vec<usize> = (0..k).collect();
    let selection = round_robin(&items, &mut comparator)?;
    finish_run(comparator, selection, budget, cfg.privacy.epsilon)
}

/// Quality of a chosen hypothesis in the agnostic sense: the distance
/// actually achieved, the best achievable over the set, and the implied
/// approximation factor `(achieved - alpha) / OPT` when `OPT > 0`.
#[derive(Debug, Clone, Copy)]
pub struct AgnosticScore {
    pub achieved: f64,
    pub opt: f64,
    pub factor: Option<f64>,
}

pub fn agnostic_score(
    chosen: usize,
    p: &Dist,
    set: &HypothesisSet,
    alpha: f64,
) -> Result<AgnosticScore, ReduceError> {
    if chosen >= set.len() {
        return Err(ReduceError::Select(SelectError::Compare(
            CompareError::IndexOutOfRange(chosen, set.len()),
        )));
    }
    let achieved = tv_distance(p, set.get(chosen))?;
    let (opt, _) = crate::dist::min_tv_to_set(p, set)?;
    let factor = if opt > 0.0 {
        Some((achieved - alpha) / opt)
    } else {
        None
    };
    Ok(AgnosticScore {
        achieved,
        opt,
        factor,
    })
}

/// Places a hypothesis at TV distance `d` on the comparator's value scale:
/// a unit gap between two values corresponds to a factor `3 + gamma0` gap
/// between the distances, exactly the margin where the Scheffe answer is
/// forced. Distances are clamped away from zero so the scale stays finite.
pub fn comparator_value(d: f64, gamma0: f64) -> f64 {
    -(d.max(1e-12)).ln() / (3.0 + gamma0).ln()
}
