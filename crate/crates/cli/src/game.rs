//! The sink-identification game: a budgeted strategy plays against fresh
//! layered-tournament constructions and must declare the sink after at most
//! t rounds and the given number of comparisons.

use std::fmt::Write as _;

use rand::Rng;

use privsel_core::comparator::{ComparatorOracle, LayeredTournament};
use privsel_core::select::{multi_round, multi_round_query_count};
use privsel_core::stream::child_rng;

use crate::experiment::{derived_seed, summarize, CsvRecord, HarnessError, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameStrategy {
    /// Runs the t-level tournament on the largest random subset whose exact
    /// query count fits the budget; guesses uniformly when even a pair is
    /// unaffordable.
    BudgetedMultiRound,
    /// Spends the whole budget on uniformly random pairs in one round and
    /// guesses the item with the most wins.
    BudgetedRandomQueries,
}

impl GameStrategy {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "budgeted_multi_round" => Ok(GameStrategy::BudgetedMultiRound),
            "budgeted_random_queries" => Ok(GameStrategy::BudgetedRandomQueries),
            other => Err(HarnessError::Config(format!(
                "unknown strategy `{other}` (expected budgeted_multi_round | budgeted_random_queries)"
            ))),
        }
    }
}

pub struct GameArgs {
    pub k: usize,
    pub t: u32,
    pub budget: u64,
    pub strategy: GameStrategy,
    pub trials: u64,
    pub seed: u64,
}

pub struct GameRecord {
    pub trial: u64,
    pub seed: u64,
    pub guess: usize,
    pub sink: usize,
    pub success: bool,
    pub queries: u64,
}

impl CsvRecord for GameRecord {
    fn header() -> &'static str {
        "trial,seed,guess,sink,success,queries"
    }

    fn row(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            self.trial, self.seed, self.guess, self.sink, self.success as u8, self.queries
        );
    }
}

/// Largest subset size whose tournament fits the budget. The count is not
/// assumed monotone in k', so this scans downward.
fn affordable_subset(k: usize, t: u32, budget: u64) -> Option<usize> {
    (2..=k)
        .rev()
        .find(|&kp| multi_round_query_count(kp, t) <= budget)
}

fn play_multi_round(
    tournament: &mut LayeredTournament,
    k: usize,
    t: u32,
    budget: u64,
    rng: &mut impl Rng,
) -> Result<usize, HarnessError> {
    let Some(kp) = affordable_subset(k, t, budget) else {
        return Ok(rng.gen_range(0..k));
    };
    let subset: Vec<usize> = if kp == k {
        (0..k).collect()
    } else {
        rand::seq::index::sample(rng, k, kp).into_iter().collect()
    };
    let result = multi_round(&subset, t, tournament)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(result.winner)
}

fn play_random_queries(
    tournament: &mut LayeredTournament,
    k: usize,
    budget: u64,
    rng: &mut impl Rng,
) -> Result<usize, HarnessError> {
    if budget == 0 {
        return Ok(rng.gen_range(0..k));
    }
    let mut wins = vec![0u64; k];
    tournament.begin_round();
    for _ in 0..budget {
        let i = rng.gen_range(0..k);
        let mut j = rng.gen_range(0..k - 1);
        if j >= i {
            j += 1;
        }
        let w = tournament
            .query(i, j)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        wins[w] += 1;
    }
    let mut best = 0;
    for (i, &w) in wins.iter().enumerate() {
        if w > wins[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Plays `trials` independent games against fresh constructions and reports
/// the fraction where the guess was the sink.
pub fn run_lowerbound_game(
    args: &GameArgs,
) -> Result<(Vec<GameRecord>, Vec<Summary>), HarnessError> {
    if args.trials == 0 {
        return Err(HarnessError::Config("trials must be >= 1".into()));
    }
    let mut records = Vec::with_capacity(args.trials as usize);
    let mut successes = Vec::with_capacity(args.trials as usize);
    for trial in 0..args.trials {
        let mut rng = child_rng(args.seed, "game", trial);
        let construction_seed = rng.gen::<u64>();
        let mut tournament = LayeredTournament::new(args.k, args.t, construction_seed)
            .map_err(|e| HarnessError::Infeasible(e.to_string()))?;
        let guess = match args.strategy {
            GameStrategy::BudgetedMultiRound => {
                play_multi_round(&mut tournament, args.k, args.t, args.budget, &mut rng)?
            }
            GameStrategy::BudgetedRandomQueries => {
                play_random_queries(&mut tournament, args.k, args.budget, &mut rng)?
            }
        };
        let queries = tournament.stats().total;
        debug_assert!(queries <= args.budget);
        // Rounds actually played: per_round entries that issued a query.
        let rounds_played = tournament
            .stats()
            .per_round
            .iter()
            .filter(|&&c| c > 0)
            .count() as u32;
        debug_assert!(rounds_played <= args.t);
        let sink = tournament.sink();
        let success = guess == sink;
        successes.push(f64::from(success));
        records.push(GameRecord {
            trial,
            seed: derived_seed(args.seed, "game", trial),
            guess,
            sink,
            success,
            queries,
        });
    }
    let summaries = vec![summarize("success", &successes)?];
    Ok((records, summaries))
}
