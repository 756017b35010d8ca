//! Command-line front end: argument and config resolution, dispatch to the
//! library, and CSV/JSON emission.

pub mod args;
pub mod config;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use redsched::designkit::{is_symmetric_order, known_bibd};
use redsched::indicators::{indicator_set, IndicatorRow};
use redsched::occupancy::{OccupancyExperiment, DEFAULT_PAIR_BUDGET};
use redsched::qsim::{run_replication, simulate, SimConfig, DEFAULT_JOBS, DEFAULT_REPLICATIONS};
use redsched::seeding::derive_seed;
use redsched::PolicyKind;

use args::{Cli, Command, Format, StructureKind};
use config::{render, Settings};
use reproduce::{ReproduceSpec, Rows};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INSTABILITY: i32 = 3;

pub const OCCUPANCY_KEYS: [&str; 7] = ["policy", "n", "d", "T", "reps", "seed", "pair_budget"];
pub const SIMULATE_KEYS: [&str; 13] = [
    "policy",
    "n",
    "d",
    "q",
    "p",
    "load",
    "load_convention",
    "jobs",
    "warmup",
    "reps",
    "seed",
    "block_selection",
    "max_in_system",
];
const DEFAULT_OCCUPANCY_REPS: usize = 20;
const DEFAULT_ORDERS: std::ops::RangeInclusive<usize> = 2..=8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Instability(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Instability(_) => EXIT_INSTABILITY,
            CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl From<redsched::Error> for CliError {
    fn from(e: redsched::Error) -> Self {
        match e {
            redsched::Error::Instability { .. } => CliError::Instability(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// A validated request, independent of where its values came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Indicators {
        pairs: Vec<(usize, usize)>,
        t: u64,
    },
    Occupancy(OccupancyExperiment),
    Spectral {
        structure: StructureKind,
        orders: Vec<usize>,
        servers: Vec<usize>,
    },
    Simulate {
        config: SimConfig,
        loads: Vec<f64>,
        event_log: Option<PathBuf>,
    },
    Reproduce(ReproduceSpec),
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Indicators { .. } => "indicators",
            ExperimentSpec::Occupancy(_) => "occupancy",
            ExperimentSpec::Spectral { .. } => "spectral",
            ExperimentSpec::Simulate { .. } => "simulate",
            ExperimentSpec::Reproduce(_) => "reproduce",
        }
    }

    /// Effective settings in config-file form. Only `occupancy` and
    /// `simulate` take configuration keys.
    pub fn effective_config(&self) -> String {
        match self {
            ExperimentSpec::Occupancy(e) => render(&[
                ("policy", e.policy.to_string()),
                ("n", e.n.to_string()),
                ("d", e.d.to_string()),
                ("T", e.t.to_string()),
                ("reps", e.replications.to_string()),
                ("seed", e.seed.to_string()),
                ("pair_budget", e.pair_budget.to_string()),
            ]),
            ExperimentSpec::Simulate {
                config: c, loads, ..
            } => render(&[
                ("policy", c.policy.to_string()),
                ("n", c.n.to_string()),
                ("d", c.d.to_string()),
                ("q", c.q.to_string()),
                ("p", c.p.to_string()),
                (
                    "load",
                    loads
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                ("load_convention", c.load_convention.as_str().to_string()),
                ("jobs", c.jobs.to_string()),
                ("warmup", c.warmup.to_string()),
                ("reps", c.replications.to_string()),
                ("seed", c.seed.to_string()),
                ("block_selection", c.block_selection.as_str().to_string()),
                ("max_in_system", c.max_in_system.to_string()),
            ]),
            _ => String::new(),
        }
    }
}

fn required<T>(value: Option<T>, key: &str, command: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("`{command}` needs `{key}`")))
}

fn check_orders(orders: &[usize]) -> Result<(), CliError> {
    match orders.iter().find(|&&d| d < 2) {
        Some(d) => Err(CliError::Usage(format!(
            "block size {d} must be at least 2"
        ))),
        None => Ok(()),
    }
}

fn orders_or_default(orders: &[usize]) -> Vec<usize> {
    if orders.is_empty() {
        DEFAULT_ORDERS.collect()
    } else {
        orders.to_vec()
    }
}

/// Merges the command line with `settings` and validates the result.
pub fn build_spec(cli: &Cli, settings: &Settings) -> Result<ExperimentSpec, CliError> {
    let spec = match &cli.command {
        Command::Indicators(a) => {
            settings.check_keys(&[], "indicators")?;
            let pairs = if a.pairs.is_empty() {
                let orders = orders_or_default(&a.d);
                check_orders(&orders)?;
                orders.iter().map(|&d| (d * (d - 1) + 1, d)).collect()
            } else {
                a.pairs.clone()
            };
            if a.t == 0 {
                return Err(CliError::Usage("`t` must be positive".into()));
            }
            ExperimentSpec::Indicators { pairs, t: a.t }
        }
        Command::Occupancy(a) => {
            settings.check_keys(&OCCUPANCY_KEYS, "occupancy")?;
            let cmd = "occupancy";
            let mut e = OccupancyExperiment::new(
                required(settings.pick(a.policy, "policy")?, "policy", cmd)?,
                required(settings.pick(a.n, "n")?, "n", cmd)?,
                required(settings.pick(a.d, "d")?, "d", cmd)?,
                required(settings.pick(a.t, "T")?, "T", cmd)?,
                settings
                    .pick(a.reps, "reps")?
                    .unwrap_or(DEFAULT_OCCUPANCY_REPS),
                settings
                    .pick(cli.seed, "seed")?
                    .unwrap_or(reproduce::DEFAULT_SEED),
            );
            e.pair_budget = settings
                .pick(a.pair_budget, "pair_budget")?
                .unwrap_or(DEFAULT_PAIR_BUDGET);
            e.validate()?;
            ExperimentSpec::Occupancy(e)
        }
        Command::Spectral(a) => {
            settings.check_keys(&[], "spectral")?;
            let orders = orders_or_default(&a.d);
            check_orders(&orders)?;
            ExperimentSpec::Spectral {
                structure: a.structure,
                orders,
                servers: a.n.clone(),
            }
        }
        Command::Simulate(a) => {
            settings.check_keys(&SIMULATE_KEYS, "simulate")?;
            let cmd = "simulate";
            let loads = if a.load.is_empty() {
                settings.get_list("load")?
            } else {
                Some(a.load.clone())
            };
            let loads = required(loads, "load", cmd)?;
            let mut c = SimConfig::new(
                required(settings.pick(a.policy, "policy")?, "policy", cmd)?,
                required(settings.pick(a.n, "n")?, "n", cmd)?,
                required(settings.pick(a.d, "d")?, "d", cmd)?,
                settings.pick(a.q, "q")?.unwrap_or(1.0),
                settings.pick(a.p, "p")?.unwrap_or(0.0),
                loads[0],
            )
            .with_jobs(settings.pick(a.jobs, "jobs")?.unwrap_or(DEFAULT_JOBS))
            .with_replications(
                settings
                    .pick(a.reps, "reps")?
                    .unwrap_or(DEFAULT_REPLICATIONS),
            )
            .with_seed(
                settings
                    .pick(cli.seed, "seed")?
                    .unwrap_or(reproduce::DEFAULT_SEED),
            );
            if let Some(w) = settings.pick(a.warmup, "warmup")? {
                c.warmup = w;
            }
            if let Some(lc) = settings.pick(a.load_convention, "load_convention")? {
                c.load_convention = lc;
            }
            if let Some(bs) = settings.pick(a.block_selection, "block_selection")? {
                c.block_selection = bs;
            }
            if let Some(cap) = settings.pick(a.max_in_system, "max_in_system")? {
                c.max_in_system = cap;
            }
            for &load in &loads {
                SimConfig { load, ..c.clone() }.validate()?;
            }
            ExperimentSpec::Simulate {
                config: c,
                loads,
                event_log: a.event_log.clone(),
            }
        }
        Command::Reproduce(a) => {
            settings.check_keys(&[], "reproduce")?;
            let queue = reproduce::queue_tuple(a.target).is_some();
            let orders = if a.d.is_empty() {
                reproduce::TABLE1_ORDERS.to_vec()
            } else {
                a.d.clone()
            };
            for &d in &orders {
                known_bibd(d)?;
            }
            let dmax = a.dmax.unwrap_or(reproduce::DEFAULT_DMAX);
            if dmax < 2 {
                return Err(CliError::Usage("`dmax` must be at least 2".into()));
            }
            let default_reps = if queue {
                reproduce::QUEUE_REPS
            } else {
                reproduce::CURVE_REPS
            };
            let spec = ReproduceSpec {
                target: a.target,
                orders,
                dmax,
                jobs: a.jobs.unwrap_or(reproduce::QUEUE_JOBS),
                reps: a.reps.unwrap_or(default_reps),
                loads: if a.loads.is_empty() {
                    reproduce::LOAD_GRID.to_vec()
                } else {
                    a.loads.clone()
                },
                seed: cli.seed.unwrap_or(reproduce::DEFAULT_SEED),
            };
            if spec.jobs == 0 || spec.reps == 0 {
                return Err(CliError::Usage("`jobs` and `reps` must be positive".into()));
            }
            if queue {
                let (n, d, q, p) = reproduce::queue_tuple(a.target).expect("queue target");
                for &load in &spec.loads {
                    SimConfig::new(PolicyKind::Random, n, d, q, p, load).validate()?;
                }
            }
            ExperimentSpec::Reproduce(spec)
        }
    };
    Ok(spec)
}

/// Runs a spec and returns the encoded output and the number of rows.
pub fn execute(spec: &ExperimentSpec, format: Format) -> Result<(Vec<u8>, usize), CliError> {
    fn pack<T: serde::Serialize>(
        rows: Vec<T>,
        format: Format,
    ) -> Result<(Vec<u8>, usize), CliError> {
        Ok((output::encode(&rows, format)?, rows.len()))
    }
    match spec {
        ExperimentSpec::Indicators { pairs, t } => {
            let mut rows = Vec::new();
            for &(n, d) in pairs {
                for policy in PolicyKind::ALL {
                    let bibd_ok = is_symmetric_order(n, d) && known_bibd(d).is_ok();
                    if policy == PolicyKind::Bibd && !bibd_ok {
                        continue;
                    }
                    rows.push(IndicatorRow::new(
                        policy,
                        n,
                        d,
                        &indicator_set(policy, n, d, *t)?,
                    ));
                }
            }
            pack(rows, format)
        }
        ExperimentSpec::Occupancy(e) => pack(vec![e.run()?], format),
        ExperimentSpec::Spectral {
            structure,
            orders,
            servers,
        } => {
            let rr = matches!(structure, StructureKind::RoundRobin | StructureKind::Both);
            let bibd = matches!(structure, StructureKind::Bibd | StructureKind::Both);
            pack(
                reproduce::spectral_sweep(orders, servers, rr, bibd)?,
                format,
            )
        }
        ExperimentSpec::Simulate {
            config,
            loads,
            event_log,
        } => {
            if let Some(path) = event_log {
                write_event_log(config, path)?;
            }
            let mut rows = Vec::new();
            for &load in loads {
                rows.push(
                    simulate(&SimConfig {
                        load,
                        ..config.clone()
                    })?
                    .row(),
                );
            }
            pack(rows, format)
        }
        ExperimentSpec::Reproduce(r) => match reproduce::run(r)? {
            Rows::Indicators(rows) => pack(rows, format),
            Rows::Curves(rows) => pack(rows, format),
            Rows::Spectral(rows) => pack(rows, format),
            Rows::Queue(rows) => pack(rows, format),
        },
    }
}

/// Event log of replication 0, one `t,kind,job,server` line per event.
fn write_event_log(config: &SimConfig, path: &Path) -> Result<(), CliError> {
    let mut log = Vec::new();
    run_replication(config, 0, derive_seed(config.seed, 0), Some(&mut log))?;
    let text: String = log.iter().map(|e| format!("{e}\n")).collect();
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run_parsed(cli: &Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let spec = build_spec(cli, &settings)?;
    if cli.emit_config {
        return output::emit(spec.effective_config().as_bytes(), cli.out.as_deref());
    }
    let (bytes, rows) = execute(&spec, cli.format)?;
    output::emit(&bytes, cli.out.as_deref())?;
    if !cli.quiet {
        let dest = cli
            .out
            .as_ref()
            .map_or("stdout".to_string(), |p| p.display().to_string());
        eprintln!("{}: {rows} rows written to {dest}", spec.name());
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_parsed(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
