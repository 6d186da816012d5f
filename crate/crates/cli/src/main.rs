//! `tnsynth` command-line tool.

mod commands;
mod context;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tnsynth::sampler::Selection;
use tnsynth::synth::{MinTOptions, SynthesisConfig};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tnsynth", version, about = "Clifford+T synthesis of single-qubit unitaries by tensor-network sampling")]
struct Cli {
    /// Where to write the run manifest. Defaults to `<out>.manifest.json` when the
    /// command writes to a file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or check lookup tables.
    #[command(subcommand)]
    Tables(TablesCmd),
    /// Synthesize one unitary, or a batch of Haar-random ones.
    Synth(SynthArgs),
    /// Benchmark over Haar-random targets.
    Bench(BenchArgs),
    /// Multi-qubit circuits.
    #[command(subcommand)]
    Circuit(CircuitCmd),
    /// Noisy-synthesis trade-off.
    #[command(subcommand)]
    Noise(NoiseCmd),
}

#[derive(Debug, Subcommand)]
enum TablesCmd {
    /// Enumerate unique Clifford+T matrices up to a T count and save them.
    Build(TablesBuildArgs),
    /// Check a table file's integrity and contents.
    Verify(TablesVerifyArgs),
}

#[derive(Debug, Args, Serialize)]
struct TablesBuildArgs {
    #[arg(long)]
    max_t: u8,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refuse to build when the size estimate exceeds this many GiB.
    #[arg(long, default_value_t = 4.0)]
    memory_cap_gib: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args, Serialize)]
struct TablesVerifyArgs {
    file: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TableArgs {
    /// Table file; without one a table is enumerated in memory.
    #[arg(long, env = "TNSYNTH_TABLES")]
    tables: Option<PathBuf>,
    /// Maximum T count of the in-memory table.
    #[arg(long, default_value_t = 10)]
    max_t: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SelectionArg {
    Multinomial,
    TopK,
    GreedyTail,
}

impl From<SelectionArg> for Selection {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::Multinomial => Selection::Multinomial,
            SelectionArg::TopK => Selection::TopK,
            SelectionArg::GreedyTail => Selection::GreedyTail,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct SearchArgs {
    /// Per-tensor T budgets, last tensor in time first. Defaults to three tensors at
    /// the table's maximum T count.
    #[arg(long, value_delimiter = ',')]
    t_budgets: Vec<u8>,
    /// Smallest number of tensors tried.
    #[arg(long, default_value_t = 1)]
    min_tensors: usize,
    #[arg(long, default_value_t = 40_000)]
    samples: u64,
    /// Stop once the distance drops below this.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1)]
    attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "greedy-tail")]
    selection: SelectionArg,
    /// Seconds per target.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Grow the T budget one step at a time and return the first result below
    /// --epsilon. Tensors use the largest entry of --t-budgets, up to as many
    /// tensors as it lists.
    #[arg(long)]
    min_t: bool,
}

impl SearchArgs {
    fn time_limit(&self) -> Result<Option<Duration>, CliError> {
        self.time_limit
            .map(|s| Duration::try_from_secs_f64(s).map_err(|_| CliError::Usage("--time-limit must be a non-negative number".into())))
            .transpose()
    }

    fn budgets(&self, table_max_t: u8) -> Vec<u8> {
        if self.t_budgets.is_empty() {
            vec![table_max_t; 3]
        } else {
            self.t_budgets.clone()
        }
    }

    fn config(&self, seed: u64, table_max_t: u8) -> Result<SynthesisConfig, CliError> {
        Ok(SynthesisConfig {
            t_budgets: self.budgets(table_max_t),
            min_tensors: self.min_tensors,
            samples: self.samples,
            epsilon: self.epsilon,
            attempts: self.attempts,
            seed,
            selection: self.selection.into(),
            time_limit: self.time_limit()?,
        })
    }

    fn min_t_options(&self, seed: u64, table_max_t: u8) -> Result<MinTOptions, CliError> {
        let budgets = self.budgets(table_max_t);
        Ok(MinTOptions {
            tail_max_t: budgets.iter().copied().max().unwrap_or(table_max_t),
            max_tensors: budgets.len(),
            samples: self.samples,
            attempts: self.attempts,
            seed,
            time_limit: self.time_limit()?,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct MinTArgs {
    /// Budget of each full tensor; defaults to the table's maximum T count.
    #[arg(long)]
    tail_max_t: Option<u8>,
    #[arg(long, default_value_t = 3)]
    max_tensors: usize,
    #[arg(long, default_value_t = 40_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per rotation.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl MinTArgs {
    fn options(&self, table_max_t: u8) -> Result<MinTOptions, CliError> {
        Ok(MinTOptions {
            tail_max_t: self.tail_max_t.unwrap_or(table_max_t),
            max_tensors: self.max_tensors,
            samples: self.samples,
            attempts: self.attempts,
            seed: self.seed,
            time_limit: self
                .time_limit
                .map(|s| Duration::try_from_secs_f64(s).map_err(|_| CliError::Usage("bad --time-limit".into())))
                .transpose()?,
        })
    }
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// Unitary as 8 numbers: row-major (re, im) pairs.
    #[arg(allow_negative_numbers = true, conflicts_with_all = ["from_json", "rz", "u3", "random"])]
    unitary: Vec<f64>,
    /// JSON file holding 8 numbers, bare or under "unitary".
    #[arg(long, conflicts_with_all = ["rz", "u3", "random"])]
    from_json: Option<PathBuf>,
    /// Target Rz(angle).
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["u3", "random"])]
    rz: Option<f64>,
    /// Target U3(theta,phi,lambda).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "random")]
    u3: Option<Vec<f64>>,
    /// Synthesize N Haar-random targets and print CSV.
    #[arg(long)]
    random: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    tables: TableArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BenchMode {
    /// One row per target from the configured search.
    Search,
    /// Minimum-T U3 synthesis against three separate Rz syntheses at epsilon/3.
    U3VsRz,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, value_enum, default_value = "search")]
    mode: BenchMode,
    /// Per-target CSV; the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary_json: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    tables: TableArgs,
}

#[derive(Debug, Subcommand)]
enum CircuitCmd {
    /// Merge rotations and replace each by a Clifford+T word.
    Synth(CircuitSynthArgs),
    /// Print T count, T depth, Clifford count and rotation count.
    Metrics(CircuitMetricsArgs),
}

#[derive(Debug, Args, Serialize)]
struct CircuitSynthArgs {
    input: PathBuf,
    /// Per-rotation distance bound.
    #[arg(long)]
    epsilon: f64,
    /// Let rotations commute across CX controls (Rz) and targets (Rx) while merging.
    #[arg(long)]
    commute: bool,
    /// Skip rotation merging.
    #[arg(long)]
    no_merge: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    metrics_json: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    search: MinTArgs,
    #[command(flatten)]
    tables: TableArgs,
}

#[derive(Debug, Args, Serialize)]
struct CircuitMetricsArgs {
    input: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum NoiseCmd {
    /// Mean process infidelity over thresholds and noise rates.
    Sweep(NoiseSweepArgs),
}

#[derive(Debug, Args, Serialize)]
struct NoiseSweepArgs {
    /// Number of Haar-random targets.
    #[arg(long, default_value_t = 100)]
    targets: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.03,0.01,0.003,0.001")]
    thresholds: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-4,1e-5")]
    rates: Vec<f64>,
    /// Scales the depolarizing rate applied after each T.
    #[arg(long, default_value_t = 1.0)]
    t_rate_multiplier: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the power-law fit here as JSON.
    #[arg(long)]
    fit_json: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    search: MinTArgs,
    #[command(flatten)]
    tables: TableArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let manifest = cli.manifest.as_deref();
    match cli.command {
        Command::Tables(TablesCmd::Build(a)) => commands::tables::build(&a, manifest),
        Command::Tables(TablesCmd::Verify(a)) => commands::tables::verify(&a),
        Command::Synth(a) => commands::synth::run(&a, manifest),
        Command::Bench(a) => commands::bench::run(&a, manifest),
        Command::Circuit(CircuitCmd::Synth(a)) => commands::circuit::synth(&a, manifest),
        Command::Circuit(CircuitCmd::Metrics(a)) => commands::circuit::metrics(&a),
        Command::Noise(NoiseCmd::Sweep(a)) => commands::noise::sweep(&a, manifest),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
