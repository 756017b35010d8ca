use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use redsched::qsim::{BlockSelection, LoadConvention};
use redsched::PolicyKind;

#[derive(Debug, Parser)]
#[command(name = "redsched", version, about = "Redundancy scheduling laboratory")]
pub struct Cli {
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Master seed for every randomised step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Flat `key=value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print the effective configuration instead of running.
    #[arg(long, global = true)]
    pub emit_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form LBF, AOF and ODF.
    Indicators(IndicatorsArgs),
    /// Monte-Carlo balls-into-bins placement.
    Occupancy(OccupancyArgs),
    /// Spectral gaps of round-robin and block-design incidence graphs.
    Spectral(SpectralArgs),
    /// Queue simulation over a load grid.
    Simulate(SimulateArgs),
    /// Regenerate a table or figure dataset from pinned presets.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct IndicatorsArgs {
    /// Block sizes, each at n = d(d-1)+1.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub d: Vec<usize>,

    /// Explicit `n:d` pairs.
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<(usize, usize)>,

    /// Balls used by the random-policy LBF.
    #[arg(long, default_value_t = 1000)]
    pub t: u64,
}

#[derive(Debug, Args)]
pub struct OccupancyArgs {
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "t")]
    pub t: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub pair_budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureKind {
    RoundRobin,
    Bibd,
    Both,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long, value_enum, default_value_t = StructureKind::Both)]
    pub structure: StructureKind,

    /// Block sizes (default 2..=8).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub d: Vec<usize>,

    /// Server counts for round-robin; defaults to d(d-1)+1.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub n: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// One load or a comma-separated grid.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub load: Vec<f64>,
    #[arg(long)]
    pub load_convention: Option<LoadConvention>,
    #[arg(long)]
    pub jobs: Option<u64>,
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub block_selection: Option<BlockSelection>,
    #[arg(long)]
    pub max_in_system: Option<usize>,
    /// Write the event log of replication 0 at the first load here.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Table1,
    Fig3,
    Fig4,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,

    /// Block sizes for table1.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub d: Vec<usize>,

    /// Largest block size for fig6 and fig7.
    #[arg(long)]
    pub dmax: Option<usize>,

    /// Measured jobs per replication for fig8-fig11.
    #[arg(long)]
    pub jobs: Option<u64>,

    /// Replications for simulation and placement targets.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Load grid for fig8-fig11.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub loads: Vec<f64>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (n, d) = s
        .split_once(':')
        .ok_or_else(|| format!("expected n:d, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((parse(n)?, parse(d)?))
}
