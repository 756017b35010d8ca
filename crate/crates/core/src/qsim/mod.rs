//! Discrete-event simulation of `n` servers with `d`-redundant nonadaptive
//! scheduling and cancel-on-start redundancy.
//!
//! Jobs arrive as a Poisson process. Each job draws one service time from a
//! two-phase hyper-exponential distribution (mean 1 with probability `1−p`,
//! mean `q` with probability `p`) and one block of `d` servers from its
//! policy. If a server of the block is idle the job starts there at once
//! (lowest index first); otherwise a copy joins the FCFS queue of each of
//! the `d` servers, and the first copy to reach service cancels the others.
//! The measured quantity is the queueing delay, start minus arrival.

mod engine;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::designkit::{known_bibd, round_robin_assignment, Block, IncidenceStructure};
use crate::error::{invalid, Error, Result};
use crate::indicators::PolicyKind;
use crate::occupancy::{mean_and_se, SubsetSampler};
use crate::seeding::derive_seed;

pub use engine::{run_replication, Event, EventKind, ReplicationOutcome};

/// How `load` maps to an arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadConvention {
    /// `λ = load · μ` per server with `μ = 1 − p(1 − 1/q)`; total `nλ`.
    PaperRho,
    /// Total rate `load · n / E[S]` with `E[S] = 1 − p + pq`, so `load` is the
    /// offered utilisation per server.
    Utilization,
}

impl LoadConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadConvention::PaperRho => "paper_rho",
            LoadConvention::Utilization => "utilization",
        }
    }
}

impl std::str::FromStr for LoadConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper_rho" => Ok(LoadConvention::PaperRho),
            "utilization" => Ok(LoadConvention::Utilization),
            other => Err(Error::Parse(format!("unknown load convention `{other}`"))),
        }
    }
}

/// How the block-design policy picks a block for each arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSelection {
    #[default]
    Cyclic,
    Random,
}

impl BlockSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockSelection::Cyclic => "cyclic",
            BlockSelection::Random => "random",
        }
    }
}

impl std::str::FromStr for BlockSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cyclic" => Ok(BlockSelection::Cyclic),
            "random" => Ok(BlockSelection::Random),
            other => Err(Error::Parse(format!("unknown block selection `{other}`"))),
        }
    }
}

pub const DEFAULT_JOBS: u64 = 100_000;
pub const DEFAULT_REPLICATIONS: usize = 10;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MAX_IN_SYSTEM: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub policy: PolicyKind,
    /// Mean long service over mean short service.
    pub q: f64,
    /// Probability that a job is long.
    pub p: f64,
    pub load: f64,
    pub load_convention: LoadConvention,
    /// Measured jobs per replication.
    pub jobs: u64,
    /// Jobs discarded at the start of each replication.
    pub warmup: u64,
    pub replications: usize,
    pub seed: u64,
    pub block_selection: BlockSelection,
    /// Replication aborts once queued plus running jobs exceed this.
    pub max_in_system: usize,
}

impl SimConfig {
    /// Defaults: utilisation convention, 10⁵ measured jobs, 10% warmup,
    /// 10 replications, seed 1, cyclic block selection.
    pub fn new(policy: PolicyKind, n: usize, d: usize, q: f64, p: f64, load: f64) -> Self {
        SimConfig {
            n,
            d,
            policy,
            q,
            p,
            load,
            load_convention: LoadConvention::Utilization,
            jobs: DEFAULT_JOBS,
            warmup: DEFAULT_JOBS / 10,
            replications: DEFAULT_REPLICATIONS,
            seed: DEFAULT_SEED,
            block_selection: BlockSelection::Cyclic,
            max_in_system: DEFAULT_MAX_IN_SYSTEM,
        }
    }

    /// Sets the measured job count and resets warmup to 10% of it.
    pub fn with_jobs(mut self, jobs: u64) -> Self {
        self.jobs = jobs;
        self.warmup = jobs / 10;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_convention(mut self, convention: LoadConvention) -> Self {
        self.load_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.d > self.n {
            return Err(invalid(format!(
                "need 1 <= d <= n, got n={}, d={}",
                self.n, self.d
            )));
        }
        if !(self.load > 0.0 && self.load < 1.0) {
            return Err(invalid(format!("load {} outside (0, 1)", self.load)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!("p {} outside [0, 1]", self.p)));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(invalid(format!("q {} must be a finite ratio >= 1", self.q)));
        }
        if self.jobs == 0 || self.replications == 0 {
            return Err(invalid("jobs and replications must be positive"));
        }
        if self.jobs + self.warmup > u32::MAX as u64 {
            return Err(invalid("too many jobs per replication"));
        }
        if self.policy == PolicyKind::Bibd {
            let design = known_bibd(self.d)?;
            if design.n() != self.n {
                return Err(invalid(format!(
                    "bibd needs n = d(d-1)+1 = {} for d={}, got n={}",
                    design.n(),
                    self.d,
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn mean_service(&self) -> f64 {
        1.0 - self.p + self.p * self.q
    }

    pub fn total_arrival_rate(&self) -> f64 {
        arrival_rate_from_load(self).total(self.load_convention)
    }
}

/// Total arrival rates under both load conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRates {
    /// Per-server `λ = load·(1 − p(1 − 1/q))`.
    pub paper_rho_per_server: f64,
    pub paper_rho_total: f64,
    pub utilization_total: f64,
}

impl ArrivalRates {
    pub fn total(&self, convention: LoadConvention) -> f64 {
        match convention {
            LoadConvention::PaperRho => self.paper_rho_total,
            LoadConvention::Utilization => self.utilization_total,
        }
    }
}

pub fn arrival_rate_from_load(cfg: &SimConfig) -> ArrivalRates {
    let mu = 1.0 - cfg.p * (1.0 - 1.0 / cfg.q);
    let per_server = cfg.load * mu;
    ArrivalRates {
        paper_rho_per_server: per_server,
        paper_rho_total: per_server * cfg.n as f64,
        utilization_total: cfg.load * cfg.n as f64 / cfg.mean_service(),
    }
}

/// Two-phase hyper-exponential draw: with probability `p` an exponential
/// of mean `q`, otherwise one of mean 1.
pub fn sample_service<R: Rng + ?Sized>(p: f64, q: f64, rng: &mut R) -> f64 {
    let long = rng.random::<f64>() < p;
    let base: f64 = rng.sample(Exp1);
    if long {
        q * base
    } else {
        base
    }
}

/// Per-replication block chooser for one policy.
#[derive(Debug, Clone)]
pub enum PolicyAssigner {
    Random(SubsetSampler),
    /// Precomputed windows indexed by start server.
    RoundRobin {
        n: usize,
        d: usize,
        windows: Vec<Vec<usize>>,
    },
    Bibd {
        blocks: Vec<Vec<usize>>,
        selection: BlockSelection,
    },
}

impl PolicyAssigner {
    pub fn new(policy: PolicyKind, n: usize, d: usize, selection: BlockSelection) -> Result<Self> {
        Ok(match policy {
            PolicyKind::Random => PolicyAssigner::Random(SubsetSampler::new(n, d)?),
            PolicyKind::RoundRobin => {
                let windows = (0..n)
                    .map(|s| (0..d).map(|j| (s + j) % n).collect())
                    .collect();
                round_robin_assignment(1, n, d)?;
                PolicyAssigner::RoundRobin { n, d, windows }
            }
            PolicyKind::Bibd => {
                let design = known_bibd(d)?;
                if design.n() != n {
                    return Err(invalid(format!("no ({n},{d},1) design")));
                }
                Self::from_design(&design, selection)
            }
        })
    }

    pub fn from_design(design: &IncidenceStructure, selection: BlockSelection) -> Self {
        PolicyAssigner::Bibd {
            blocks: design
                .blocks()
                .iter()
                .map(|b| b.members().to_vec())
                .collect(),
            selection,
        }
    }

    /// Servers for the arrival with 0-based index `arrival`.
    pub fn assign<R: Rng + ?Sized>(&mut self, arrival: u64, rng: &mut R) -> Block {
        let n = match self {
            PolicyAssigner::Random(sampler) => return sampler.sample(rng),
            PolicyAssigner::RoundRobin { n, .. } => *n,
            PolicyAssigner::Bibd { blocks, .. } => blocks.len(),
        };
        Block::new(self.members(arrival, rng).to_vec(), n).expect("valid block")
    }

    /// Like [`assign`](Self::assign) but borrows a precomputed slice where
    /// possible. Random members are left in shuffle order.
    pub(crate) fn members<R: Rng + ?Sized>(&mut self, arrival: u64, rng: &mut R) -> &[usize] {
        match self {
            PolicyAssigner::Random(sampler) => sampler.draw(rng),
            PolicyAssigner::RoundRobin { n, d, windows } => {
                let start = ((arrival % *n as u64) as usize * *d) % *n;
                &windows[start]
            }
            PolicyAssigner::Bibd { blocks, selection } => {
                let j = match selection {
                    BlockSelection::Cyclic => (arrival % blocks.len() as u64) as usize,
                    BlockSelection::Random => rng.random_range(0..blocks.len()),
                };
                &blocks[j]
            }
        }
    }
}

/// Outcome of all replications of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub rates: ArrivalRates,
    pub lambda_total: f64,
    pub rep_means: Vec<f64>,
    pub mean_wait: f64,
    /// Standard error of the mean over replications (NaN for one).
    pub stderr: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub measured_jobs: u64,
    pub realized_arrival_rate: f64,
}

impl SimResult {
    pub fn row(&self) -> SimRow {
        let c = &self.config;
        SimRow {
            policy: c.policy,
            n: c.n,
            d: c.d,
            q: c.q,
            p: c.p,
            load: c.load,
            load_convention: c.load_convention,
            lambda_total: self.lambda_total,
            reps: c.replications,
            jobs: c.jobs,
            warmup: c.warmup,
            mean_wait: self.mean_wait,
            stderr: self.stderr,
            ci95_lo: self.ci95_lo,
            ci95_hi: self.ci95_hi,
            seed: c.seed,
        }
    }

    /// 95% intervals are disjoint and this one lies strictly below.
    pub fn ci_below(&self, other: &SimResult) -> bool {
        self.ci95_hi < other.ci95_lo
    }
}

/// CSV record
/// `policy,n,d,q,p,load,load_convention,lambda_total,reps,jobs,warmup,mean_wait,stderr,ci95_lo,ci95_hi,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub policy: PolicyKind,
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub p: f64,
    pub load: f64,
    pub load_convention: LoadConvention,
    pub lambda_total: f64,
    pub reps: usize,
    pub jobs: u64,
    pub warmup: u64,
    pub mean_wait: f64,
    pub stderr: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub seed: u64,
}

/// Runs every replication of `cfg` (concurrently, on seeds derived from
/// `cfg.seed`) and pools the replication means.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let outcomes: Vec<ReplicationOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r, derive_seed(cfg.seed, r as u64), None))
        .collect::<Result<_>>()?;

    let rep_means: Vec<f64> = outcomes.iter().map(|o| o.mean_wait).collect();
    let (mean_wait, stderr) = mean_and_se(&rep_means);
    let half_width = if rep_means.len() >= 2 {
        let t = StudentsT::new(0.0, 1.0, (rep_means.len() - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        t * stderr
    } else {
        f64::INFINITY
    };
    let arrivals: u64 = outcomes.iter().map(|o| o.arrivals).sum();
    let horizon: f64 = outcomes.iter().map(|o| o.last_arrival).sum();
    let rates = arrival_rate_from_load(cfg);
    Ok(SimResult {
        config: cfg.clone(),
        rates,
        lambda_total: rates.total(cfg.load_convention),
        mean_wait,
        stderr,
        ci95_lo: mean_wait - half_width,
        ci95_hi: mean_wait + half_width,
        measured_jobs: outcomes.iter().map(|o| o.measured).sum(),
        realized_arrival_rate: if horizon > 0.0 {
            arrivals as f64 / horizon
        } else {
            0.0
        },
        rep_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designkit::fano_blocks;
    use crate::seeding::rng_for;

    #[test]
    fn service_mixture_means() {
        let mut rng = rng_for(42, 0);
        let draws = 1_000_000;
        for (p, q, expected, tol) in [
            (0.0, 10.0, 1.0, 0.01),
            (1.0, 10.0, 10.0, 0.1),
            (0.1, 10.0, 1.9, 0.03),
        ] {
            let mean = (0..draws)
                .map(|_| sample_service(p, q, &mut rng))
                .sum::<f64>()
                / draws as f64;
            assert!((mean - expected).abs() < tol, "p={p} q={q}: {mean}");
        }
    }

    #[test]
    fn arrival_rate_examples() {
        let base = SimConfig::new(PolicyKind::Random, 13, 4, 3.0, 0.0, 0.5)
            .with_convention(LoadConvention::PaperRho);
        assert_eq!(arrival_rate_from_load(&base).paper_rho_per_server, 0.5);
        let cfg = SimConfig::new(PolicyKind::Random, 13, 4, 10.0, 0.1, 0.5);
        let rates = arrival_rate_from_load(&cfg);
        assert!((rates.paper_rho_per_server - 0.455).abs() < 1e-12);
        assert!((rates.utilization_total - 0.5 * 13.0 / 1.9).abs() < 1e-12);
        assert!((cfg.total_arrival_rate() - 3.421).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(PolicyKind::Bibd, 13, 4, 10.0, 0.1, 0.5);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.n = 21;
        assert!(bad.validate().is_err());
        for load in [0.0, 1.0, 1.5] {
            let mut c = ok.clone();
            c.load = load;
            assert!(c.validate().is_err());
        }
        let mut c = ok.clone();
        c.q = 0.5;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.p = 1.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn policy_assignment_examples() {
        let mut rng = rng_for(0, 0);
        let fano = fano_blocks();
        let mut a = PolicyAssigner::from_design(&fano, BlockSelection::Cyclic);
        let got: Vec<Block> = (0..7).map(|i| a.assign(i, &mut rng)).collect();
        assert_eq!(got, fano.blocks().to_vec());

        let mut rr =
            PolicyAssigner::new(PolicyKind::RoundRobin, 13, 4, BlockSelection::Cyclic).unwrap();
        let first = rr.assign(0, &mut rng);
        assert_eq!(rr.assign(13, &mut rng), first);
        for i in 0..40u64 {
            assert_eq!(
                rr.assign(i, &mut rng),
                round_robin_assignment(i + 1, 13, 4).unwrap()
            );
        }

        let draw = |seed| {
            let mut rng = rng_for(seed, 2);
            let mut a =
                PolicyAssigner::new(PolicyKind::Random, 13, 4, BlockSelection::Cyclic).unwrap();
            (0..20).map(|i| a.assign(i, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));

        let mut rb = PolicyAssigner::new(PolicyKind::Bibd, 13, 4, BlockSelection::Random).unwrap();
        let design = known_bibd(4).unwrap();
        for i in 0..30 {
            assert!(design.blocks().contains(&rb.assign(i, &mut rng)));
        }
    }
}
