//! Experiment drivers shared by the binary and the test suites.
//!
//! Every driver follows the same shape: a typed argument struct, one child
//! random stream per trial derived from (master seed, command label, trial
//! index), a vector of per-trial records, and summary rows. Records are
//! emitted as CSV with a fixed header per command; reruns under the same
//! configuration are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use privsel_core::comparator::{ComparatorOracle, GapComparator, LayeredTournament, TiePolicy};
use privsel_core::dist::{
    gen_hard_instance, gen_random_separated, load_instance, tv_distance, Dist, DistError,
    HypothesisSet, InstanceMeta,
};
use privsel_core::mech::{MechError, NoiseMode, PrivacyParams};
use privsel_core::loglik::{run_noninteractive, ProtocolError};
use privsel_core::reduction::{
    agnostic_score, hypothesis_select_ldp, naive_round_robin_ldp, HsConfig, ReduceError,
    UserPopulation,
};
use privsel_core::select::{
    better_multi_round_with, multi_round, round_robin, SelectError, SelectionResult,
};
use privsel_core::stream::child_rng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code: 2 for anything the caller got wrong, 3 when the
    /// requested instance cannot exist or cannot be paid for.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Infeasible(_) => 3,
        }
    }
}

impl From<DistError> for HarnessError {
    fn from(e: DistError) -> Self {
        match e {
            DistError::Infeasible(_, _) => HarnessError::Infeasible(e.to_string()),
            DistError::Io(inner) => HarnessError::Io(inner.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<MechError> for HarnessError {
    fn from(e: MechError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<ProtocolError> for HarnessError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::NotEnoughUsers { .. } => HarnessError::Infeasible(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<ReduceError> for HarnessError {
    fn from(e: ReduceError) -> Self {
        match e {
            ReduceError::NotEnoughUsers { .. } => HarnessError::Infeasible(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<SelectError> for HarnessError {
    fn from(e: SelectError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// Everything a run needs to be replayed, echoed verbatim into JSON output.
/// Fields irrelevant to a command stay `None` and are omitted from the echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl ExperimentConfig {
    pub fn new(command: &str, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            instance: None,
            generator: None,
            epsilon: None,
            alpha: None,
            n: None,
            t: None,
            k: None,
            trials,
            seed,
            adversary: None,
            noise_mode: None,
            values: None,
            algo: None,
            budget: None,
            strategy: None,
            out: None,
            format: None,
        }
    }
}

/// Reporting-only identifier for a trial's stream; the stream itself comes
/// from `child_rng` with the same coordinates.
pub fn derived_seed(master: u64, label: &str, trial: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h.rotate_left(17) ^ trial.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Summaries

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std_error: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn summarize(metric: &str, xs: &[f64]) -> Result<Summary, HarnessError> {
    if xs.is_empty() {
        return Err(HarnessError::Config(format!(
            "no observations to summarize for {metric}"
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    // Standard error of the mean; zero for a single observation.
    let std_error = if xs.len() > 1 {
        (var / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
    Ok(Summary {
        metric: metric.to_string(),
        count: xs.len(),
        mean,
        std_error,
        q05: quantile(&sorted, 0.05),
        q25: quantile(&sorted, 0.25),
        q50: quantile(&sorted, 0.50),
        q75: quantile(&sorted, 0.75),
        q95: quantile(&sorted, 0.95),
    })
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: mean={:.6} se={:.6} n={} q05={:.6} q50={:.6} q95={:.6}",
            self.metric, self.mean, self.std_error, self.count, self.q05, self.q50, self.q95
        )
    }
}

// ---------------------------------------------------------------------------
// Records and emission

/// A record type that knows its fixed CSV schema.
pub trait CsvRecord {
    fn header() -> &'static str;
    fn row(&self, out: &mut String);
}

fn fmt_f64(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.6}");
}

/// Renders records under the fixed header. Empty input is an error so a
/// misconfigured run cannot silently produce a headers-only file.
pub fn csv_string<R: CsvRecord>(records: &[R]) -> Result<String, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to emit".into()));
    }
    let mut s = String::new();
    s.push_str(R::header());
    s.push('\n');
    for r in records {
        r.row(&mut s);
        s.push('\n');
    }
    Ok(s)
}

pub fn emit_csv<R: CsvRecord>(records: &[R], path: &Path) -> Result<(), HarnessError> {
    let s = csv_string(records)?;
    fs::write(path, s)?;
    Ok(())
}

/// JSON report: the configuration echoed back plus the summary rows.
pub fn json_string(
    config: &ExperimentConfig,
    summaries: &[Summary],
) -> Result<String, HarnessError> {
    let report = serde_json::json!({
        "config": config,
        "summaries": summaries,
    });
    serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn emit_json(
    config: &ExperimentConfig,
    summaries: &[Summary],
    path: &Path,
) -> Result<(), HarnessError> {
    if summaries.is_empty() {
        return Err(HarnessError::Config("no summaries to emit".into()));
    }
    let s = json_string(config, summaries)?;
    fs::write(path, s)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Instance sources

/// Hypotheses concentrated on their own symbol: q_i(i) = peak, remainder
/// uniform. Pairwise TV is peak - (1-peak)/(k-1) for every pair.
pub fn peaked_set(k: usize, peak: f64) -> Result<(HypothesisSet, InstanceMeta), HarnessError> {
    if k < 2 {
        return Err(HarnessError::Config(format!(
            "peaked generator needs k >= 2, got {k}"
        )));
    }
    if !(0.0..=1.0).contains(&peak) || peak * (k as f64) <= 1.0 {
        return Err(HarnessError::Config(format!(
            "peak must lie in (1/k, 1], got {peak}"
        )));
    }
    let off = (1.0 - peak) / (k as f64 - 1.0);
    let mut hyps = Vec::with_capacity(k);
    for i in 0..k {
        let mut w = vec![off; k];
        w[i] = peak;
        hyps.push(Dist::new(&w).map_err(HarnessError::from)?);
    }
    let set = HypothesisSet::new(hyps).map_err(HarnessError::from)?;
    let meta = InstanceMeta {
        true_index: None,
        separation: Some(peak - off),
        beta: None,
    };
    Ok((set, meta))
}

fn parse_kv(spec: &str) -> Result<Vec<(String, String)>, HarnessError> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| {
                    HarnessError::Config(format!("generator parameter `{pair}` is not key=value"))
                })
        })
        .collect()
}

fn kv_get<'a>(kv: &'a [(String, String)], key: &str) -> Option<&'a str> {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn kv_parse<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<T, HarnessError> {
    let raw = kv_get(kv, key)
        .ok_or_else(|| HarnessError::Config(format!("generator is missing `{key}=`")))?;
    raw.parse::<T>()
        .map_err(|_| HarnessError::Config(format!("cannot parse `{key}={raw}`")))
}

/// `name:key=value,...` instance generators:
/// `separated:k=8,n=10,alpha=0.3`, `peaked:k=8,peak=0.65`,
/// `hard:d=3,alpha=0.2`.
pub fn generate_instance(
    spec: &str,
    seed: u64,
) -> Result<(HypothesisSet, InstanceMeta), HarnessError> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let kv = parse_kv(rest)?;
    match name {
        "separated" => {
            let k: usize = kv_parse(&kv, "k")?;
            let n: usize = kv_parse(&kv, "n")?;
            let alpha: f64 = kv_parse(&kv, "alpha")?;
            let mut rng = child_rng(seed, "gen-separated", 0);
            Ok(gen_random_separated(k, n, alpha, &mut rng)?)
        }
        "peaked" => {
            let k: usize = kv_parse(&kv, "k")?;
            let peak: f64 = kv_parse(&kv, "peak")?;
            peaked_set(k, peak)
        }
        "hard" => {
            let d: usize = kv_parse(&kv, "d")?;
            let alpha: f64 = kv_parse(&kv, "alpha")?;
            Ok(gen_hard_instance(d, alpha)?)
        }
        other => Err(HarnessError::Config(format!(
            "unknown generator `{other}` (expected separated | peaked | hard)"
        ))),
    }
}

/// Exactly one of `instance` (a JSON file) or `generator` must be given.
pub fn resolve_instance(
    instance: Option<&str>,
    generator: Option<&str>,
    seed: u64,
) -> Result<(HypothesisSet, InstanceMeta), HarnessError> {
    match (instance, generator) {
        (Some(path), None) => Ok(load_instance(Path::new(path))?),
        (None, Some(spec)) => generate_instance(spec, seed),
        (None, None) => Err(HarnessError::Config(
            "an instance source is required: --instance FILE or --gen SPEC".into(),
        )),
        (Some(_), Some(_)) => Err(HarnessError::Config(
            "--instance and --gen are mutually exclusive".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// ni: the one-round protocol

pub struct NiArgs {
    pub set: HypothesisSet,
    pub true_index: usize,
    pub epsilon: f64,
    pub noise_mode: NoiseMode,
    /// Sweep points; one summary row per entry.
    pub ns: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
}

pub struct NiRecord {
    pub trial: u64,
    pub n: usize,
    pub chosen: usize,
    pub truth: usize,
    pub success: bool,
    pub l_bound: f64,
    pub n_prime: usize,
}

impl CsvRecord for NiRecord {
    fn header() -> &'static str {
        "trial,n,chosen,true,success,L,Nprime"
    }

    fn row(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},{},{},",
            self.trial, self.n, self.chosen, self.truth, self.success as u8
        );
        fmt_f64(out, self.l_bound);
        let _ = write!(out, ",{}", self.n_prime);
    }
}

pub fn run_ni(args: &NiArgs) -> Result<(Vec<NiRecord>, Vec<Summary>), HarnessError> {
    if args.trials == 0 {
        return Err(HarnessError::Config("trials must be >= 1".into()));
    }
    if args.ns.is_empty() {
        return Err(HarnessError::Config("ni needs at least one n".into()));
    }
    if args.true_index >= args.set.len() {
        return Err(HarnessError::Config(format!(
            "true index {} outside the {}-hypothesis set",
            args.true_index,
            args.set.len()
        )));
    }
    let privacy = PrivacyParams::new(args.epsilon, args.noise_mode)?;
    let p = args.set.get(args.true_index).clone();
    let mut records = Vec::with_capacity(args.ns.len() * args.trials as usize);
    let mut summaries = Vec::with_capacity(args.ns.len());
    for &n in &args.ns {
        let label = format!("ni:{n}");
        let mut successes = Vec::with_capacity(args.trials as usize);
        for trial in 0..args.trials {
            let mut rng = child_rng(args.seed, &label, trial);
            let samples: Vec<usize> = (0..n).map(|_| p.sample(&mut rng)).collect();
            let result = run_noninteractive(&args.set, &samples, &privacy, &mut rng)?;
            let success = result.chosen == args.true_index;
            successes.push(f64::from(success));
            records.push(NiRecord {
                trial,
                n,
                chosen: result.chosen,
                truth: args.true_index,
                success,
                l_bound: result.config.sensitivity_bound,
                n_prime: result.flattened_domain,
            });
        }
        summaries.push(summarize(&format!("success@n={n}"), &successes)?);
    }
    Ok((records, summaries))
}

// ---------------------------------------------------------------------------
// hs: the reduction and its one-round baseline

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsAlgo {
    Better,
    Naive,
}

pub struct HsArgs {
    pub set: HypothesisSet,
    /// Data distribution = this member of the set, shifted by `shift_beta`
    /// when that is set.
    pub true_index: usize,
    pub shift_beta: Option<f64>,
    pub epsilon: f64,
    pub noise_mode: NoiseMode,
    pub alpha: f64,
    pub beta_fail: f64,
    pub t: u32,
    pub h_const: f64,
    pub c_const: f64,
    pub algo: HsAlgo,
    pub trials: u64,
    pub seed: u64,
}

pub struct HsRecord {
    pub trial: u64,
    pub n_used: usize,
    pub rounds: usize,
    pub chosen: usize,
    pub achieved_tv: f64,
    /// Distance from the data distribution to the hypothesis set.
    pub beta: f64,
    pub factor: Option<f64>,
}

impl CsvRecord for HsRecord {
    fn header() -> &'static str {
        "trial,n_used,rounds,chosen,achieved_tv,beta,factor"
    }

    fn row(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},{},",
            self.trial, self.n_used, self.rounds, self.chosen
        );
        fmt_f64(out, self.achieved_tv);
        out.push(',');
        fmt_f64(out, self.beta);
        out.push(',');
        if let Some(f) = self.factor {
            fmt_f64(out, f);
        }
    }
}

pub fn run_hs(args: &HsArgs) -> Result<(Vec<HsRecord>, Vec<Summary>), HarnessError> {
    if args.trials == 0 {
        return Err(HarnessError::Config("trials must be >= 1".into()));
    }
    if args.true_index >= args.set.len() {
        return Err(HarnessError::Config(format!(
            "true index {} outside the {}-hypothesis set",
            args.true_index,
            args.set.len()
        )));
    }
    let privacy = PrivacyParams::new(args.epsilon, args.noise_mode)?;
    let cfg = HsConfig::with_constants(
        privacy,
        args.alpha,
        args.beta_fail,
        args.t,
        args.h_const,
        args.c_const,
    )?;
    let k = args.set.len();
    let base = args.set.get(args.true_index).clone();
    let mut records = Vec::with_capacity(args.trials as usize);
    let mut achieved = Vec::with_capacity(args.trials as usize);
    let mut rounds_obs = Vec::with_capacity(args.trials as usize);
    for trial in 0..args.trials {
        let mut rng = child_rng(args.seed, "hs", trial);
        let p = match args.shift_beta {
            Some(delta) => privsel_core::dist::shift_mass(&base, delta, &mut rng)?,
            None => base.clone(),
        };
        let users = match args.algo {
            HsAlgo::Better => {
                privsel_core::reduction::comparison_budget(k, &cfg)?.users_required
            }
            HsAlgo::Naive => {
                let pairs = (k as u64) * (k as u64 - 1) / 2;
                let g = privsel_core::reduction::comparison_budget(k, &cfg)?.group_size;
                pairs * g as u64
            }
        };
        let population = UserPopulation::from_dist(&p, users as usize, &mut rng);
        let result = match args.algo {
            HsAlgo::Better => hypothesis_select_ldp(&args.set, population, &cfg, &mut rng)?,
            HsAlgo::Naive => naive_round_robin_ldp(&args.set, population, &cfg, &mut rng)?,
        };
        let score = agnostic_score(result.chosen, &p, &args.set, args.alpha)?;
        achieved.push(score.achieved);
        rounds_obs.push(result.transcript.rounds_used() as f64);
        records.push(HsRecord {
            trial,
            n_used: result.users_consumed,
            rounds: result.transcript.rounds_used(),
            chosen: result.chosen,
            achieved_tv: score.achieved,
            beta: score.opt,
            factor: score.factor,
        });
    }
    let summaries = vec![
        summarize("achieved_tv", &achieved)?,
        summarize("rounds", &rounds_obs)?,
    ];
    Ok((records, summaries))
}

// ---------------------------------------------------------------------------
// maxselect: the comparison-model procedures against chosen adversaries

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValuesKind {
    /// i * 2: every gap exceeds the tie window, all answers truthful.
    Spaced,
    /// Uniform draws on [0, k/4]: dense collisions at small k.
    Random,
    /// i * 0.4: every item ties with its two neighbors on each side.
    Clustered,
}

impl ValuesKind {
    fn build<R: Rng + ?Sized>(self, k: usize, rng: &mut R) -> Vec<f64> {
        match self {
            ValuesKind::Spaced => (0..k).map(|i| 2.0 * i as f64).collect(),
            ValuesKind::Random => {
                let hi = (k as f64 / 4.0).max(1.0);
                (0..k).map(|_| rng.gen_range(0.0..hi)).collect()
            }
            ValuesKind::Clustered => (0..k).map(|i| 0.4 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    FavorLower,
    FavorHigher,
    UniformRandom,
    GreedyAdaptive,
    /// The layered tournament; item values are the realized ones, so the
    /// sink is the unique maximum.
    Layered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectAlgo {
    RoundRobin,
    Multi,
    Better,
}

impl SelectAlgo {
    /// Worst-case gap the procedure is allowed against any tie adversary;
    /// the randomized variant's bound holds only with probability 9/10.
    pub fn gap_allowance(self, t: u32) -> f64 {
        match self {
            SelectAlgo::RoundRobin => 2.0,
            SelectAlgo::Multi => 2.0 * f64::from(t),
            SelectAlgo::Better => 3.0,
        }
    }
}

pub struct MaxSelectArgs {
    pub k: usize,
    pub t: u32,
    pub values: ValuesKind,
    pub adversary: AdversaryKind,
    pub algo: SelectAlgo,
    pub h_const: f64,
    pub trials: u64,
    pub seed: u64,
}

pub struct MaxSelectRecord {
    pub trial: u64,
    pub seed: u64,
    pub winner: usize,
    pub winner_value: f64,
    pub max_value: f64,
    pub gap: f64,
    pub queries: u64,
    pub rounds: u32,
    pub success: bool,
}

impl CsvRecord for MaxSelectRecord {
    fn header() -> &'static str {
        "trial,seed,winner,winner_value,max_value,gap,queries,rounds,success"
    }

    fn row(&self, out: &mut String) {
        let _ = write!(out, "{},{},{},", self.trial, self.seed, self.winner);
        fmt_f64(out, self.winner_value);
        out.push(',');
        fmt_f64(out, self.max_value);
        out.push(',');
        fmt_f64(out, self.gap);
        let _ = write!(
            out,
            ",{},{},{}",
            self.queries, self.rounds, self.success as u8
        );
    }
}

fn run_algo(
    algo: SelectAlgo,
    items: &[usize],
    t: u32,
    h_const: f64,
    oracle: &mut dyn ComparatorOracle,
    rng: &mut dyn rand::RngCore,
) -> Result<SelectionResult, SelectError> {
    match algo {
        SelectAlgo::RoundRobin => round_robin(items, oracle),
        SelectAlgo::Multi => multi_round(items, t, oracle),
        SelectAlgo::Better => better_multi_round_with(items, t, h_const, oracle, rng),
    }
}

pub fn run_maxselect(
    args: &MaxSelectArgs,
) -> Result<(Vec<MaxSelectRecord>, Vec<Summary>), HarnessError> {
    if args.trials == 0 {
        return Err(HarnessError::Config("trials must be >= 1".into()));
    }
    if args.k < 2 {
        return Err(HarnessError::Config(format!(
            "maxselect needs k >= 2, got {}",
            args.k
        )));
    }
    let items: Vec<usize> = (0..args.k).collect();
    let mut records = Vec::with_capacity(args.trials as usize);
    let mut successes = Vec::with_capacity(args.trials as usize);
    let mut queries_obs = Vec::with_capacity(args.trials as usize);
    for trial in 0..args.trials {
        let mut rng = child_rng(args.seed, "maxselect", trial);
        let oracle_seed = rng.gen::<u64>();
        let (values, mut oracle): (Vec<f64>, Box<dyn ComparatorOracle>) = match args.adversary {
            AdversaryKind::Layered => {
                let tour = LayeredTournament::new(args.k, args.t, oracle_seed)
                    .map_err(|e| HarnessError::Infeasible(e.to_string()))?;
                (tour.realized_values(), Box::new(tour))
            }
            plain => {
                let policy = match plain {
                    AdversaryKind::FavorLower => TiePolicy::FavorLower,
                    AdversaryKind::FavorHigher => TiePolicy::FavorHigher,
                    AdversaryKind::UniformRandom => TiePolicy::UniformRandom,
                    AdversaryKind::GreedyAdaptive => TiePolicy::GreedyAdaptive,
                    AdversaryKind::Layered => unreachable!(),
                };
                let values = args.values.build(args.k, &mut rng);
                let comp = GapComparator::new(values.clone(), policy, oracle_seed)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                (values, Box::new(comp))
            }
        };
        let result = run_algo(
            args.algo,
            &items,
            args.t,
            args.h_const,
            oracle.as_mut(),
            &mut rng,
        )?;
        let max_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winner_value = values[result.winner];
        let gap = max_value - winner_value;
        let success = gap <= args.algo.gap_allowance(args.t) + 1e-9;
        successes.push(f64::from(success));
        queries_obs.push(result.queries_total as f64);
        records.push(MaxSelectRecord {
            trial,
            seed: derived_seed(args.seed, "maxselect", trial),
            winner: result.winner,
            winner_value,
            max_value,
            gap,
            queries: result.queries_total,
            rounds: result.rounds_used,
            success,
        });
    }
    let summaries = vec![
        summarize("success", &successes)?,
        summarize("queries", &queries_obs)?,
    ];
    Ok((records, summaries))
}

// ---------------------------------------------------------------------------
// flatten: inspect the reduction to near-uniform hypotheses

pub struct FlattenReport {
    pub source_size: usize,
    pub target_size: usize,
    pub sensitivity_bound: f64,
    /// (original TV, flattened TV) for every pair, in index order.
    pub tv_pairs: Vec<(f64, f64)>,
    pub flattened: HypothesisSet,
}

pub fn run_flatten(set: &HypothesisSet) -> Result<FlattenReport, HarnessError> {
    let map = privsel_core::flatten::build_flatten_map(set);
    let flat = map
        .push_forward_set(set)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let gamma = Dist::uniform(map.target_size());
    let bound = privsel_core::loglik::compute_log_ratio_bound(&flat, &gamma)?;
    let mut tv_pairs = Vec::new();
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let before = tv_distance(set.get(i), set.get(j))?;
            let after = tv_distance(flat.get(i), flat.get(j))?;
            tv_pairs.push((before, after));
        }
    }
    Ok(FlattenReport {
        source_size: map.source_size(),
        target_size: map.target_size(),
        sensitivity_bound: bound,
        tv_pairs,
        flattened: flat,
    })
}
