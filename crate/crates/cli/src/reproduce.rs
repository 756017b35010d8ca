//! Pinned presets behind `redsched reproduce`.

use serde::{Deserialize, Serialize};

use redsched::designkit::{is_symmetric_order, known_bibd};
use redsched::indicators::{extreme_loads, indicator_set, table1_row, IndicatorRow};
use redsched::occupancy::OccupancyExperiment;
use redsched::qsim::{simulate, SimConfig, SimRow};
use redsched::spectral::{analyze_bibd, analyze_round_robin, SpectralRow};
use redsched::PolicyKind;

use crate::args::Target;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const TABLE1_ORDERS: [usize; 6] = [2, 3, 4, 5, 6, 8];
/// Balls behind the random-policy LBF in table1 and fig6.
pub const INDICATOR_BALLS: u64 = 1000;
pub const CURVE_SERVERS: [usize; 3] = [13, 21, 31];
pub const CURVE_BALLS: u64 = 50;
pub const CURVE_REPS: usize = 2000;
pub const DEFAULT_DMAX: usize = 8;
pub const QUEUE_JOBS: u64 = 100_000;
pub const QUEUE_REPS: usize = 10;
pub const LOAD_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// `(n, d, q, p)` of each queueing figure.
pub fn queue_tuple(target: Target) -> Option<(usize, usize, f64, f64)> {
    match target {
        Target::Fig8 => Some((13, 4, 10.0, 0.1)),
        Target::Fig9 => Some((21, 5, 10.0, 0.1)),
        Target::Fig10 => Some((21, 5, 50.0, 0.1)),
        Target::Fig11 => Some((21, 5, 50.0, 0.5)),
        _ => None,
    }
}

/// Fully resolved `reproduce` request.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceSpec {
    pub target: Target,
    pub orders: Vec<usize>,
    pub dmax: usize,
    pub jobs: u64,
    pub reps: usize,
    pub loads: Vec<f64>,
    pub seed: u64,
}

/// Random-placement extremes next to their large-`n` approximations.
/// Shared by fig3 (loads) and fig4 (LBF).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCurveRow {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub reps: usize,
    pub mean_min: f64,
    pub mean_max: f64,
    pub approx_min: f64,
    pub approx_max: f64,
    pub lbf_hat: f64,
    pub lbf_approx: f64,
    pub seed: u64,
}

pub enum Rows {
    Indicators(Vec<IndicatorRow>),
    Curves(Vec<LoadCurveRow>),
    Spectral(Vec<SpectralRow>),
    Queue(Vec<SimRow>),
}

pub fn run(spec: &ReproduceSpec) -> Result<Rows, CliError> {
    Ok(match spec.target {
        Target::Table1 => {
            let mut rows = Vec::new();
            for &d in &spec.orders {
                rows.extend(table1_row(d, INDICATOR_BALLS)?.rows());
            }
            Rows::Indicators(rows)
        }
        Target::Fig3 | Target::Fig4 => Rows::Curves(load_curves(spec.reps, spec.seed)?),
        Target::Fig6 => {
            let mut rows = Vec::new();
            for d in 2..=spec.dmax {
                let n = d * (d - 1) + 1;
                for policy in PolicyKind::ALL {
                    if policy == PolicyKind::Bibd && known_bibd(d).is_err() {
                        continue;
                    }
                    rows.push(IndicatorRow::new(
                        policy,
                        n,
                        d,
                        &indicator_set(policy, n, d, INDICATOR_BALLS)?,
                    ));
                }
            }
            Rows::Indicators(rows)
        }
        Target::Fig7 => Rows::Spectral(spectral_sweep(
            &(2..=spec.dmax).collect::<Vec<_>>(),
            &[],
            true,
            true,
        )?),
        Target::Fig8 | Target::Fig9 | Target::Fig10 | Target::Fig11 => {
            let (n, d, q, p) = queue_tuple(spec.target).expect("queue target");
            let mut rows = Vec::new();
            for &load in &spec.loads {
                for policy in PolicyKind::ALL {
                    let cfg = SimConfig::new(policy, n, d, q, p, load)
                        .with_jobs(spec.jobs)
                        .with_replications(spec.reps)
                        .with_seed(spec.seed);
                    rows.push(simulate(&cfg)?.row());
                }
            }
            Rows::Queue(rows)
        }
    })
}

fn load_curves(reps: usize, seed: u64) -> Result<Vec<LoadCurveRow>, CliError> {
    let mut rows = Vec::new();
    for n in CURVE_SERVERS {
        for d in 1..=n {
            let emp = OccupancyExperiment::new(PolicyKind::Random, n, d, CURVE_BALLS, reps, seed)
                .run()?;
            let approx = extreme_loads(n, d, CURVE_BALLS)?;
            rows.push(LoadCurveRow {
                n,
                d,
                t: CURVE_BALLS,
                reps,
                mean_min: emp.mean_min,
                mean_max: emp.mean_max,
                approx_min: approx.mean_min,
                approx_max: approx.mean_max,
                lbf_hat: emp.lbf_hat,
                lbf_approx: approx.mean_min / approx.mean_max,
                seed,
            });
        }
    }
    Ok(rows)
}

/// Round-robin rows for every `(n, d)` with `d <= n` (n defaulting to
/// d(d-1)+1) and block-design rows for each `d` with a shipped design.
pub fn spectral_sweep(
    orders: &[usize],
    servers: &[usize],
    round_robin: bool,
    bibd: bool,
) -> Result<Vec<SpectralRow>, CliError> {
    let mut rows = Vec::new();
    for &d in orders {
        if round_robin {
            if servers.is_empty() {
                rows.push(SpectralRow::new(
                    "round_robin",
                    &analyze_round_robin(d * (d - 1) + 1, d)?,
                ));
            } else {
                for &n in servers.iter().filter(|&&n| d <= n) {
                    rows.push(SpectralRow::new("round_robin", &analyze_round_robin(n, d)?));
                }
            }
        }
        if bibd {
            if let Ok(design) = known_bibd(d) {
                debug_assert!(is_symmetric_order(design.n(), d));
                rows.push(SpectralRow::new("bibd", &analyze_bibd(&design)?));
            }
        }
    }
    Ok(rows)
}
