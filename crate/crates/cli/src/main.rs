//! Command-line front end. Five subcommands: `ni` runs the one-round
//! protocol, `hs` runs the comparison-based reduction, `maxselect` exercises
//! the selection procedures against tie adversaries, `game` plays the
//! budgeted sink-identification game, and `flatten` inspects the
//! near-uniform reduction of an instance.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible instance.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use privsel::experiment::{
    self, csv_string, emit_csv, emit_json, json_string, resolve_instance, AdversaryKind,
    CsvRecord, ExperimentConfig, HarnessError, HsAlgo, HsArgs, MaxSelectArgs, NiArgs, SelectAlgo,
    Summary, ValuesKind,
};
use privsel::game::{GameArgs, GameStrategy};

use privsel_core::dist::{save_instance, InstanceMeta};
use privsel_core::mech::NoiseMode;

#[derive(Parser)]
#[command(
    name = "privsel",
    about = "Locally private hypothesis selection simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One-round protocol: noisy log-likelihood scores over a flattened instance.
    Ni(NiCmd),
    /// Maximum selection against adversarial comparators.
    Maxselect(MaxCmd),
    /// Hypothesis selection via private pairwise comparisons.
    Hs(HsCmd),
    /// Budgeted sink-identification game on layered tournaments.
    Game(GameCmd),
    /// Flatten an instance and report the before/after geometry.
    Flatten(FlattenCmd),
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed; all per-trial streams derive from it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Independent trials per configuration point.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: per-trial CSV or a JSON summary with the config echo.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (JSON: domain_size, hypotheses, optional true_index).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Generated instance, e.g. separated:k=8,n=10,alpha=0.3 or
    /// peaked:k=8,peak=0.65 or hard:d=3,alpha=0.2.
    #[arg(long = "gen")]
    generator: Option<String>,
    /// Which hypothesis the users' data comes from; overrides the file.
    #[arg(long)]
    true_index: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseModeArg {
    /// Scale calibrated to the statistic's full range; the ledger's epsilon
    /// is exact.
    Strict,
    /// Scale calibrated to the bound itself, as analyzed.
    Paper,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::Strict => NoiseMode::Strict,
            NoiseModeArg::Paper => NoiseMode::Loose,
        }
    }
}

fn mode_name(m: NoiseModeArg) -> &'static str {
    match m {
        NoiseModeArg::Strict => "strict",
        NoiseModeArg::Paper => "paper",
    }
}

#[derive(Args)]
struct NiCmd {
    #[command(flatten)]
    source: InstanceArgs,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Total users; comma-separated values sweep n.
    #[arg(long, default_value = "10000")]
    n: String,
    #[arg(long, value_enum, default_value_t = NoiseModeArg::Strict)]
    noise_mode: NoiseModeArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct HsCmd {
    #[command(flatten)]
    source: InstanceArgs,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Target selection slack.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Allowed failure probability used to size comparison groups.
    #[arg(long, default_value_t = 0.1)]
    beta_fail: f64,
    /// Interaction rounds.
    #[arg(long, default_value_t = 3)]
    t: u32,
    /// Padding constant for the randomized tournament.
    #[arg(long, default_value_t = 100.0)]
    h_const: f64,
    /// Group-size constant.
    #[arg(long, default_value_t = 2.0)]
    c_const: f64,
    /// Move the data distribution this far (in TV) off its hypothesis.
    #[arg(long)]
    shift_beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = HsAlgoArg::Better)]
    algo: HsAlgoArg,
    #[arg(long, value_enum, default_value_t = NoiseModeArg::Strict)]
    noise_mode: NoiseModeArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HsAlgoArg {
    /// Randomized multi-round tournament over the hypothesis pairs.
    Better,
    /// One-round full round-robin baseline.
    Naive,
}

#[derive(Args)]
struct MaxCmd {
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    t: u32,
    #[arg(long, value_enum, default_value_t = ValuesArg::Clustered)]
    values: ValuesArg,
    #[arg(long, value_enum, default_value_t = AdversaryArg::UniformRandom)]
    adversary: AdversaryArg,
    #[arg(long, value_enum, default_value_t = AlgoArg::Better)]
    algo: AlgoArg,
    /// Padding constant for the randomized tournament.
    #[arg(long, default_value_t = 100.0)]
    h_const: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValuesArg {
    /// i*2: all gaps truthful.
    Spaced,
    /// Uniform on [0, k/4]: random collisions.
    Random,
    /// i*0.4: every adjacent pair within the tie window.
    Clustered,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdversaryArg {
    FavorLower,
    FavorHigher,
    UniformRandom,
    GreedyAdaptive,
    /// Layered tournament; values are the realized ones.
    Layered,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    /// Single-round all-pairs.
    RoundRobin,
    /// t-level shrinking tournament.
    Multi,
    /// Randomized variant with uniform padding.
    Better,
}

#[derive(Args)]
struct GameCmd {
    #[arg(long, default_value_t = 4096)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    t: u32,
    /// Maximum total comparisons the strategy may issue.
    #[arg(long)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::BudgetedMultiRound)]
    strategy: StrategyArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// Tournament on the largest affordable random subset.
    #[value(name = "budgeted_multi_round", alias = "budgeted-multi-round")]
    BudgetedMultiRound,
    /// All budget on uniform random pairs, most wins.
    #[value(name = "budgeted_random_queries", alias = "budgeted-random-queries")]
    BudgetedRandomQueries,
}

#[derive(Args)]
struct FlattenCmd {
    #[command(flatten)]
    source: InstanceArgs,
    /// Where to write the flattened instance (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn parse_n_list(raw: &str) -> Result<Vec<usize>, HarnessError> {
    let ns: Result<Vec<usize>, _> = raw.split(',').map(|s| s.trim().parse::<usize>()).collect();
    match ns {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(HarnessError::Config(format!(
            "expected comma-separated user counts, got `{raw}`"
        ))),
    }
}

/// The file's true_index, the flag, or an error when neither names one.
fn pick_truth(meta: &InstanceMeta, flag: Option<usize>) -> Result<usize, HarnessError> {
    flag.or(meta.true_index).ok_or_else(|| {
        HarnessError::Config(
            "no data distribution: pass --true-index or an instance with true_index".into(),
        )
    })
}

/// Writes to stdout, exiting quietly when the reader has gone away (the
/// usual `| head` case); a panic there would bury real output in a
/// backtrace.
fn stdout_all(text: &str) -> Result<(), HarnessError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(HarnessError::Io(e.to_string())),
    }
}

fn deliver<R: CsvRecord>(
    records: &[R],
    summaries: &[Summary],
    config: &ExperimentConfig,
    common: &CommonArgs,
) -> Result<(), HarnessError> {
    match common.format {
        FormatArg::Csv => match &common.out {
            Some(path) => emit_csv(records, path)?,
            None => stdout_all(&csv_string(records)?)?,
        },
        FormatArg::Json => match &common.out {
            Some(path) => emit_json(config, summaries, path)?,
            None => stdout_all(&format!("{}\n", json_string(config, summaries)?))?,
        },
    }
    for s in summaries {
        eprintln!("{s}");
    }
    Ok(())
}

fn base_config(command: &str, common: &CommonArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(command, common.trials, common.seed);
    cfg.out = common.out.as_ref().map(|p| p.display().to_string());
    cfg.format = Some(
        match common.format {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
        }
        .to_string(),
    );
    cfg
}

fn cmd_ni(cmd: &NiCmd) -> Result<(), HarnessError> {
    let (set, meta) = resolve_instance(
        cmd.source.instance.as_deref().and_then(|p| p.to_str()),
        cmd.source.generator.as_deref(),
        cmd.common.seed,
    )?;
    let true_index = pick_truth(&meta, cmd.source.true_index)?;
    let ns = parse_n_list(&cmd.n)?;
    let args = NiArgs {
        set,
        true_index,
        epsilon: cmd.eps,
        noise_mode: cmd.noise_mode.into(),
        ns: ns.clone(),
        trials: cmd.common.trials,
        seed: cmd.common.seed,
    };
    let (records, summaries) = experiment::run_ni(&args)?;
    let mut config = base_config("ni", &cmd.common);
    config.instance = cmd.source.instance.as_ref().map(|p| p.display().to_string());
    config.generator = cmd.source.generator.clone();
    config.epsilon = Some(cmd.eps);
    config.n = Some(ns);
    config.noise_mode = Some(mode_name(cmd.noise_mode).to_string());
    deliver(&records, &summaries, &config, &cmd.common)
}

fn cmd_hs(cmd: &HsCmd) -> Result<(), HarnessError> {
    let (set, meta) = resolve_instance(
        cmd.source.instance.as_deref().and_then(|p| p.to_str()),
        cmd.source.generator.as_deref(),
        cmd.common.seed,
    )?;
    let true_index = pick_truth(&meta, cmd.source.true_index)?;
    let algo = match cmd.algo {
        HsAlgoArg::Better => HsAlgo::Better,
        HsAlgoArg::Naive => HsAlgo::Naive,
    };
    let args = HsArgs {
        set,
        true_index,
        shift_beta: cmd.shift_beta,
        epsilon: cmd.eps,
        noise_mode: cmd.noise_mode.into(),
        alpha: cmd.alpha,
        beta_fail: cmd.beta_fail,
        t: cmd.t,
        h_const: cmd.h_const,
        c_const: cmd.c_const,
        algo,
        trials: cmd.common.trials,
        seed: cmd.common.seed,
    };
    let (records, summaries) = experiment::run_hs(&args)?;
    let mut config = base_config("hs", &cmd.common);
    config.instance = cmd.source.instance.as_ref().map(|p| p.display().to_string());
    config.generator = cmd.source.generator.clone();
    config.epsilon = Some(cmd.eps);
    config.alpha = Some(cmd.alpha);
    config.t = Some(cmd.t);
    config.noise_mode = Some(mode_name(cmd.noise_mode).to_string());
    config.algo = Some(
        match cmd.algo {
            HsAlgoArg::Better => "better",
            HsAlgoArg::Naive => "naive",
        }
        .to_string(),
    );
    deliver(&records, &summaries, &config, &cmd.common)
}

fn cmd_maxselect(cmd: &MaxCmd) -> Result<(), HarnessError> {
    let values = match cmd.values {
        ValuesArg::Spaced => ValuesKind::Spaced,
        ValuesArg::Random => ValuesKind::Random,
        ValuesArg::Clustered => ValuesKind::Clustered,
    };
    let adversary = match cmd.adversary {
        AdversaryArg::FavorLower => AdversaryKind::FavorLower,
        AdversaryArg::FavorHigher => AdversaryKind::FavorHigher,
        AdversaryArg::UniformRandom => AdversaryKind::UniformRandom,
        AdversaryArg::GreedyAdaptive => AdversaryKind::GreedyAdaptive,
        AdversaryArg::Layered => AdversaryKind::Layered,
    };
    let algo = match cmd.algo {
        AlgoArg::RoundRobin => SelectAlgo::RoundRobin,
        AlgoArg::Multi => SelectAlgo::Multi,
        AlgoArg::Better => SelectAlgo::Better,
    };
    let args = MaxSelectArgs {
        k: cmd.k,
        t: cmd.t,
        values,
        adversary,
        algo,
        h_const: cmd.h_const,
        trials: cmd.common.trials,
        seed: cmd.common.seed,
    };
    let (records, summaries) = experiment::run_maxselect(&args)?;
    let mut config = base_config("maxselect", &cmd.common);
    config.k = Some(cmd.k);
    config.t = Some(cmd.t);
    config.values = Some(
        match cmd.values {
            ValuesArg::Spaced => "spaced",
            ValuesArg::Random => "random",
            ValuesArg::Clustered => "clustered",
        }
        .to_string(),
    );
    config.adversary = Some(
        match cmd.adversary {
            AdversaryArg::FavorLower => "favor-lower",
            AdversaryArg::FavorHigher => "favor-higher",
            AdversaryArg::UniformRandom => "uniform-random",
            AdversaryArg::GreedyAdaptive => "greedy-adaptive",
            AdversaryArg::Layered => "layered",
        }
        .to_string(),
    );
    config.algo = Some(
        match cmd.algo {
            AlgoArg::RoundRobin => "round-robin",
            AlgoArg::Multi => "multi",
            AlgoArg::Better => "better",
        }
        .to_string(),
    );
    deliver(&records, &summaries, &config, &cmd.common)
}

fn cmd_game(cmd: &GameCmd) -> Result<(), HarnessError> {
    let strategy = match cmd.strategy {
        StrategyArg::BudgetedMultiRound => GameStrategy::BudgetedMultiRound,
        StrategyArg::BudgetedRandomQueries => GameStrategy::BudgetedRandomQueries,
    };
    let args = GameArgs {
        k: cmd.k,
        t: cmd.t,
        budget: cmd.budget,
        strategy,
        trials: cmd.common.trials,
        seed: cmd.common.seed,
    };
    let (records, summaries) = privsel::game::run_lowerbound_game(&args)?;
    let mut config = base_config("game", &cmd.common);
    config.k = Some(cmd.k);
    config.t = Some(cmd.t);
    config.budget = Some(cmd.budget);
    config.strategy = Some(
        match cmd.strategy {
            StrategyArg::BudgetedMultiRound => "budgeted_multi_round",
            StrategyArg::BudgetedRandomQueries => "budgeted_random_queries",
        }
        .to_string(),
    );
    deliver(&records, &summaries, &config, &cmd.common)
}

fn cmd_flatten(cmd: &FlattenCmd) -> Result<(), HarnessError> {
    let (set, meta) = resolve_instance(
        cmd.source.instance.as_deref().and_then(|p| p.to_str()),
        cmd.source.generator.as_deref(),
        cmd.seed,
    )?;
    let report = experiment::run_flatten(&set)?;
    // Write the requested file before touching stdout: a closed pipe must
    // not cost the user the output they asked for.
    if let Some(path) = &cmd.out {
        let flat_meta = InstanceMeta {
            true_index: meta.true_index,
            separation: None,
            beta: None,
        };
        save_instance(path, &report.flattened, &flat_meta)?;
        eprintln!("flattened instance written to {}", path.display());
    }
    let mut text = format!(
        "domain {} -> {}, hypotheses {}, log-ratio bound {:.6}\n",
        report.source_size,
        report.target_size,
        set.len(),
        report.sensitivity_bound
    );
    for (idx, (before, after)) in report.tv_pairs.iter().enumerate() {
        use std::fmt::Write as _;
        let _ = writeln!(
            text,
            "pair {idx}: tv {before:.6} -> {after:.6} (ratio {:.6})",
            after / before
        );
    }
    stdout_all(&text)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.cmd {
        Cmd::Ni(c) => cmd_ni(c),
        Cmd::Maxselect(c) => cmd_maxselect(c),
        Cmd::Hs(c) => cmd_hs(c),
        Cmd::Game(c) => cmd_game(c),
        Cmd::Flatten(c) => cmd_flatten(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
