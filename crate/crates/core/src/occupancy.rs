//! Arrivals-only placement experiments: `T` balls thrown `d`-redundantly
//! into `n` urns, with empirical extreme loads and overlap moments.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designkit::{
    known_bibd, round_robin_assignment, verify_design, Block, IncidenceStructure,
};
use crate::error::{invalid, Error, Result};
use crate::indicators::PolicyKind;
use crate::seeding::{derive_seed, rng_for, SimRng};

/// Above this many unordered pairs, overlap moments are estimated from
/// uniformly sampled pairs instead of full enumeration.
pub const DEFAULT_PAIR_BUDGET: u64 = 5_000_000;

/// Draws uniform `d`-subsets of `0..n` by partial Fisher–Yates shuffles of a
/// persistent permutation.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    pool: Vec<usize>,
    d: usize,
}

impl SubsetSampler {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if d == 0 || d > n {
            return Err(invalid(format!("need 1 <= d <= n, got n={n}, d={d}")));
        }
        Ok(SubsetSampler {
            pool: (0..n).collect(),
            d,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Block {
        let n = self.pool.len();
        Block::new(self.draw(rng).to_vec(), n).expect("distinct in-range members")
    }

    /// Unsorted members of a fresh draw.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        let n = self.pool.len();
        for k in 0..self.d {
            let j = rng.random_range(k..n);
            self.pool.swap(k, j);
        }
        &self.pool[..self.d]
    }
}

/// One placement of `T` balls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementRun {
    pub n: usize,
    pub d: usize,
    pub t: u64,
    pub policy: PolicyKind,
    pub blocks: Vec<Block>,
    /// `loads[i]` = number of balls with a replica in urn `i`.
    pub loads: Vec<u64>,
}

impl PlacementRun {
    pub fn min_load(&self) -> u64 {
        self.loads.iter().copied().min().unwrap_or(0)
    }

    pub fn max_load(&self) -> u64 {
        self.loads.iter().copied().max().unwrap_or(0)
    }
}

/// Places `T` balls. Random placement draws from `seed`; round-robin uses
/// the shift-by-`d` sequence; the block design cycles through the rows of
/// `structure` in order.
pub fn place(
    policy: PolicyKind,
    n: usize,
    d: usize,
    t: u64,
    structure: Option<&IncidenceStructure>,
    seed: u64,
) -> Result<PlacementRun> {
    if d == 0 || d > n {
        return Err(invalid(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    let blocks: Vec<Block> = match policy {
        PolicyKind::Random => {
            let mut rng = rng_for(seed, 0);
            let mut sampler = SubsetSampler::new(n, d)?;
            (0..t).map(|_| sampler.sample(&mut rng)).collect()
        }
        PolicyKind::RoundRobin => (1..=t)
            .map(|i| round_robin_assignment(i, n, d))
            .collect::<Result<_>>()?,
        PolicyKind::Bibd => {
            let s =
                structure.ok_or_else(|| invalid("bibd placement needs an incidence structure"))?;
            check_design(s, n, d)?;
            s.blocks()
                .iter()
                .cycle()
                .take(t as usize)
                .cloned()
                .collect()
        }
    };
    let mut loads = vec![0u64; n];
    for b in &blocks {
        for &m in b.members() {
            loads[m] += 1;
        }
    }
    Ok(PlacementRun {
        n,
        d,
        t,
        policy,
        blocks,
        loads,
    })
}

pub(crate) fn check_design(s: &IncidenceStructure, n: usize, d: usize) -> Result<()> {
    if s.n() != n || s.d() != d {
        return Err(invalid(format!(
            "structure is ({}, {}) but the experiment asks for n={n}, d={d}",
            s.n(),
            s.d()
        )));
    }
    if !s.is_square() || !verify_design(s, 1).is_valid() {
        return Err(Error::InvalidDesign(format!(
            "structure is not an ({n},{d},1) design"
        )));
    }
    Ok(())
}

/// Empirical first and second moments of the pairwise overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapMoments {
    pub e_o: f64,
    pub e_o2: f64,
    /// Pairs averaged over.
    pub pairs: u64,
    /// `true` when every unordered pair was visited.
    pub exhaustive: bool,
}

/// Average `|block_i ∩ block_j|` and its square over all unordered pairs if
/// there are at most `pair_budget` of them; otherwise over `pair_budget`
/// pairs `(i, j)`, `i ≠ j`, drawn uniformly with replacement using `seed`.
pub fn empirical_overlap_moments(
    run: &PlacementRun,
    pair_budget: u64,
    seed: u64,
) -> Result<OverlapMoments> {
    let t = run.blocks.len() as u64;
    if t < 2 {
        return Err(invalid("need at least two balls"));
    }
    let overlap = OverlapKernel::new(run);
    let all_pairs = t * (t - 1) / 2;
    let (mut s1, mut s2) = (0u64, 0u64);
    if all_pairs <= pair_budget {
        for i in 0..t as usize {
            for j in i + 1..t as usize {
                let o = overlap.between(i, j) as u64;
                s1 += o;
                s2 += o * o;
            }
        }
        return Ok(OverlapMoments {
            e_o: s1 as f64 / all_pairs as f64,
            e_o2: s2 as f64 / all_pairs as f64,
            pairs: all_pairs,
            exhaustive: true,
        });
    }
    if pair_budget == 0 {
        return Err(invalid("pair budget must be positive"));
    }
    let mut rng: SimRng = rng_for(seed, 1);
    for _ in 0..pair_budget {
        let i = rng.random_range(0..t) as usize;
        let mut j = rng.random_range(0..t - 1) as usize;
        if j >= i {
            j += 1;
        }
        let o = overlap.between(i, j) as u64;
        s1 += o;
        s2 += o * o;
    }
    Ok(OverlapMoments {
        e_o: s1 as f64 / pair_budget as f64,
        e_o2: s2 as f64 / pair_budget as f64,
        pairs: pair_budget,
        exhaustive: false,
    })
}

/// Bitmask intersection for `n ≤ 128`, sorted merge otherwise.
enum OverlapKernel<'a> {
    Masks(Vec<u128>),
    Blocks(&'a [Block]),
}

impl<'a> OverlapKernel<'a> {
    fn new(run: &'a PlacementRun) -> Self {
        if run.n <= 128 {
            OverlapKernel::Masks(
                run.blocks
                    .iter()
                    .map(|b| b.members().iter().fold(0u128, |m, &x| m | (1u128 << x)))
                    .collect(),
            )
        } else {
            OverlapKernel::Blocks(&run.blocks)
        }
    }

    fn between(&self, i: usize, j: usize) -> u32 {
        match self {
            OverlapKernel::Masks(m) => (m[i] & m[j]).count_ones(),
            OverlapKernel::Blocks(b) => b[i].overlap(&b[j]) as u32,
        }
    }
}

/// A replicated placement experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyExperiment {
    pub policy: PolicyKind,
    pub n: usize,
    pub d: usize,
    pub t: u64,
    pub replications: usize,
    pub seed: u64,
    pub pair_budget: u64,
}

impl OccupancyExperiment {
    pub fn new(
        policy: PolicyKind,
        n: usize,
        d: usize,
        t: u64,
        replications: usize,
        seed: u64,
    ) -> Self {
        OccupancyExperiment {
            policy,
            n,
            d,
            t,
            replications,
            seed,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > self.n {
            return Err(invalid(format!(
                "need 1 <= d <= n, got n={}, d={}",
                self.n, self.d
            )));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.t < 2 {
            return Err(invalid("T must be at least 2"));
        }
        if self.policy == PolicyKind::Bibd && !crate::designkit::is_symmetric_order(self.n, self.d)
        {
            return Err(invalid(format!(
                "bibd requires n = d(d-1)+1, got n={}, d={}",
                self.n, self.d
            )));
        }
        Ok(())
    }

    /// Runs every replication (in parallel, each on its own derived seed)
    /// and aggregates in replication order.
    pub fn run(&self) -> Result<EmpiricalIndicators> {
        self.validate()?;
        let structure = match self.policy {
            PolicyKind::Bibd => Some(known_bibd(self.d)?),
            _ => None,
        };
        let per_rep: Vec<RepStats> = (0..self.replications)
            .into_par_iter()
            .map(|r| {
                let rep_seed = derive_seed(self.seed, r as u64);
                let run = place(
                    self.policy,
                    self.n,
                    self.d,
                    self.t,
                    structure.as_ref(),
                    rep_seed,
                )?;
                let moments = empirical_overlap_moments(&run, self.pair_budget, rep_seed)?;
                Ok(RepStats {
                    min: run.min_load() as f64,
                    max: run.max_load() as f64,
                    e_o: moments.e_o,
                    e_o2: moments.e_o2,
                })
            })
            .collect::<Result<_>>()?;

        let column = |f: fn(&RepStats) -> f64| -> (f64, f64) {
            let xs: Vec<f64> = per_rep.iter().map(f).collect();
            mean_and_se(&xs)
        };
        let (mean_min, se_mean_min) = column(|s| s.min);
        let (mean_max, se_mean_max) = column(|s| s.max);
        let (e_o, se_e_o) = column(|s| s.e_o);
        let (e_o2, se_e_o2) = column(|s| s.e_o2);
        Ok(EmpiricalIndicators {
            policy: self.policy,
            n: self.n,
            d: self.d,
            t: self.t,
            replications: self.replications,
            mean_min,
            mean_max,
            lbf_hat: if mean_max > 0.0 {
                mean_min / mean_max
            } else {
                0.0
            },
            e_o,
            e_o2,
            se_mean_min,
            se_mean_max,
            se_e_o,
            se_e_o2,
            seed: self.seed,
        })
    }
}

struct RepStats {
    min: f64,
    max: f64,
    e_o: f64,
    e_o2: f64,
}

/// Sample mean and standard error of the mean; the error is NaN for a
/// single observation.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Replication-averaged empirical indicators. Serialises to the occupancy
/// CSV schema `policy,n,d,T,reps,mean_min,mean_max,lbf_hat,e_o,e_o2,se_e_o,se_e_o2,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalIndicators {
    pub policy: PolicyKind,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "reps")]
    pub replications: usize,
    pub mean_min: f64,
    pub mean_max: f64,
    pub lbf_hat: f64,
    pub e_o: f64,
    pub e_o2: f64,
    #[serde(skip)]
    pub se_mean_min: f64,
    #[serde(skip)]
    pub se_mean_max: f64,
    pub se_e_o: f64,
    pub se_e_o2: f64,
    pub seed: u64,
}

/// Convenience wrapper over [`OccupancyExperiment`] with the default pair
/// budget.
pub fn empirical_indicators(
    policy: PolicyKind,
    n: usize,
    d: usize,
    t: u64,
    replications: usize,
    seed: u64,
) -> Result<EmpiricalIndicators> {
    OccupancyExperiment::new(policy, n, d, t, replications, seed).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designkit::fano_blocks;

    #[test]
    fn placement_examples() {
        let rr = place(PolicyKind::RoundRobin, 4, 2, 4, None, 0).unwrap();
        assert_eq!(rr.loads, vec![2, 2, 2, 2]);
        let fano = fano_blocks();
        let b = place(PolicyKind::Bibd, 7, 3, 7, Some(&fano), 0).unwrap();
        assert_eq!(b.loads, vec![3; 7]);
        let full = place(PolicyKind::Random, 5, 5, 9, None, 11).unwrap();
        assert_eq!(full.loads, vec![9; 5]);
    }

    #[test]
    fn placement_errors() {
        assert!(place(PolicyKind::Bibd, 7, 3, 7, None, 0).is_err());
        assert!(place(PolicyKind::Random, 3, 4, 7, None, 0).is_err());
        let circ = crate::designkit::circulant_incidence(7, 3).unwrap();
        assert!(matches!(
            place(PolicyKind::Bibd, 7, 3, 7, Some(&circ), 0),
            Err(Error::InvalidDesign(_))
        ));
    }

    #[test]
    fn moments_examples() {
        let fano = fano_blocks();
        let run = place(PolicyKind::Bibd, 7, 3, 7, Some(&fano), 0).unwrap();
        let m = empirical_overlap_moments(&run, DEFAULT_PAIR_BUDGET, 0).unwrap();
        assert_eq!((m.e_o, m.e_o2, m.pairs, m.exhaustive), (1.0, 1.0, 21, true));

        let rr = place(PolicyKind::RoundRobin, 7, 3, 7, None, 0).unwrap();
        let m = empirical_overlap_moments(&rr, DEFAULT_PAIR_BUDGET, 0).unwrap();
        assert_eq!(m.e_o, 1.0);
        assert!((m.e_o2 - 5.0 / 3.0).abs() < 1e-15);

        let twins = place(PolicyKind::Random, 4, 4, 2, None, 5).unwrap();
        let m = empirical_overlap_moments(&twins, 10, 0).unwrap();
        assert_eq!((m.e_o, m.e_o2), (4.0, 16.0));
    }

    #[test]
    fn sampled_moments_track_exhaustive() {
        let run = place(PolicyKind::Random, 13, 4, 3000, None, 9).unwrap();
        let exact = empirical_overlap_moments(&run, u64::MAX, 0).unwrap();
        let sampled = empirical_overlap_moments(&run, 400_000, 1).unwrap();
        assert!(exact.exhaustive && !sampled.exhaustive);
        assert!((exact.e_o - sampled.e_o).abs() < 0.01);
        assert!((exact.e_o2 - sampled.e_o2).abs() < 0.03);
    }

    #[test]
    fn large_n_uses_merge_kernel() {
        let run = place(PolicyKind::RoundRobin, 200, 3, 400, None, 0).unwrap();
        let m = empirical_overlap_moments(&run, u64::MAX, 0).unwrap();
        // Each window has 2 copies -> pairs among copies overlap fully.
        let expected = overlap_expected_rr(200, 3, 400);
        assert!((m.e_o - expected).abs() < 1e-12);
    }

    fn overlap_expected_rr(n: usize, d: usize, t: u64) -> f64 {
        let blocks: Vec<Block> = (1..=t)
            .map(|i| round_robin_assignment(i, n, d).unwrap())
            .collect();
        let mut s = 0usize;
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                s += blocks[i].overlap(&blocks[j]);
            }
        }
        s as f64 / (t * (t - 1) / 2) as f64
    }

    #[test]
    fn even_placement_example() {
        let e = empirical_indicators(PolicyKind::RoundRobin, 13, 4, 52, 1, 0).unwrap();
        assert_eq!((e.mean_min, e.mean_max), (16.0, 16.0));
        assert!(e.se_e_o.is_nan());
    }

    #[test]
    fn mean_and_se_basic() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn policy() -> impl Strategy<Value = PolicyKind> {
            prop_oneof![
                Just(PolicyKind::Random),
                Just(PolicyKind::RoundRobin),
                Just(PolicyKind::Bibd)
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn conservation_balance_and_determinism(
                policy in policy(),
                dd in 2usize..6,
                n_extra in 0usize..20,
                t in 1u64..400,
                seed in any::<u64>(),
            ) {
                let (n, d, structure) = if policy == PolicyKind::Bibd {
                    let s = known_bibd(dd).unwrap();
                    (s.n(), dd, Some(s))
                } else {
                    (dd + n_extra, dd, None)
                };
                let run = place(policy, n, d, t, structure.as_ref(), seed).unwrap();
                prop_assert_eq!(run.loads.iter().sum::<u64>(), t * d as u64);
                for (i, &load) in run.loads.iter().enumerate() {
                    prop_assert_eq!(load, run.blocks.iter().filter(|b| b.contains(i)).count() as u64);
                }
                match policy {
                    PolicyKind::RoundRobin => prop_assert!(run.max_load() - run.min_load() <= 1),
                    // A partial cycle of design blocks can be uneven (two
                    // blocks already share one object); full cycles are exact.
                    PolicyKind::Bibd if t % n as u64 == 0 => prop_assert_eq!(run.max_load(), run.min_load()),
                    PolicyKind::Bibd => prop_assert!(run.max_load() - run.min_load() <= d as u64),
                    PolicyKind::Random => {}
                }
                let again = place(policy, n, d, t, structure.as_ref(), seed).unwrap();
                prop_assert_eq!(run, again);
            }
        }
    }
}
