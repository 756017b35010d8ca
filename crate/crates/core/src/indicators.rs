//! Closed-form overlap indicators.
//!
//! For a pair of distinct balls `X`, `o_X` is the number of urns their
//! blocks share. The indicators of a policy are
//!
//! * LBF, the ratio of expected minimum to expected maximum urn load;
//! * AOF = `1 / E[o_X]`;
//! * ODF = `1 / E[o_X²]`;
//!
//! all taken in the limit of many balls. Moments and the AOF/ODF closed
//! forms are exact rationals; only LBF (which involves a square root and a
//! logarithm for the random policy) is floating point.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_integer::binomial;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::designkit::{is_symmetric_order, known_bibd, Block};
use crate::error::{invalid, Error, Result};

pub type Rational = Ratio<i128>;

fn rat(numer: i128, denom: i128) -> Rational {
    Ratio::new(numer, denom)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    RoundRobin,
    Bibd,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::Bibd];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::RoundRobin => "round_robin",
            PolicyKind::Bibd => "bibd",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(PolicyKind::Random),
            "round_robin" | "rr" => Ok(PolicyKind::RoundRobin),
            "bibd" => Ok(PolicyKind::Bibd),
            other => Err(Error::Parse(format!("unknown policy `{other}`"))),
        }
    }
}

/// Number of balls thrown: a finite count or the `T → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(u64),
    Limiting,
}

/// Distribution of `o_X` over `{0, …, d}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapPmf {
    d: usize,
    probabilities: Vec<Rational>,
    regime: Horizon,
}

impl OverlapPmf {
    fn new(d: usize, probabilities: Vec<Rational>, regime: Horizon) -> Self {
        debug_assert_eq!(probabilities.len(), d + 1);
        OverlapPmf {
            d,
            probabilities,
            regime,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn regime(&self) -> Horizon {
        self.regime
    }

    pub fn probabilities(&self) -> &[Rational] {
        &self.probabilities
    }

    pub fn probability(&self, k: usize) -> Rational {
        self.probabilities
            .get(k)
            .copied()
            .unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.probabilities.iter().copied().sum()
    }

    pub fn first_moment(&self) -> Rational {
        self.raw_moment(1)
    }

    pub fn second_moment(&self) -> Rational {
        self.raw_moment(2)
    }

    fn raw_moment(&self, power: u32) -> Rational {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| p * Rational::from_integer((k as i128).pow(power)))
            .sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.probabilities.iter().map(to_f64).collect()
    }
}

fn check_nd(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 || d > n {
        return Err(invalid(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    Ok(())
}

fn check_policy(policy: PolicyKind, n: usize, d: usize) -> Result<()> {
    check_nd(n, d)?;
    if policy == PolicyKind::Bibd && !is_symmetric_order(n, d) {
        return Err(invalid(format!(
            "bibd requires n = d(d-1)+1, got n={n}, d={d}"
        )));
    }
    Ok(())
}

fn check_multiple(n: usize, t: u64) -> Result<()> {
    if t == 0 || !t.is_multiple_of(n as u64) {
        return Err(invalid(format!(
            "T={t} is not a positive multiple of n={n}"
        )));
    }
    Ok(())
}

/// Hypergeometric overlap of two independent uniform `d`-subsets of `n`
/// urns: `p_k = C(d,k)·C(n−d,d−k)/C(n,d)`. Exact for every `T`.
pub fn overlap_pmf_random(n: usize, d: usize) -> Result<OverlapPmf> {
    check_nd(n, d)?;
    let (n, d) = (n as i128, d as i128);
    let total = binomial(n, d);
    let probabilities = (0..=d)
        .map(|k| {
            if d - k > n - d {
                Rational::zero()
            } else {
                rat(binomial(d, k) * binomial(n - d, d - k), total)
            }
        })
        .collect();
    Ok(OverlapPmf::new(
        d as usize,
        probabilities,
        Horizon::Limiting,
    ))
}

/// Round-robin overlap pmf by the counting argument that, among the other
/// `T−1` balls, `2T/n − 1` overlap the first in each `k ∈ [1, d−1]` urns and
/// `T/n − 1` in all `d`, normalised by `T`:
/// `P(0) = 1 − (2d−1)/n + d/T`, `P(k) = 2/n − 1/T`, `P(d) = 1/n − 1/T`.
///
/// The formula sums to one but is only a large-`T` statement; see
/// [`overlap_pmf_round_robin_enumerated`] for the exact finite-`T` pmf.
pub fn overlap_pmf_round_robin(n: usize, d: usize, horizon: Horizon) -> Result<OverlapPmf> {
    check_nd(n, d)?;
    let inv_t = match horizon {
        Horizon::Finite(t) => {
            check_multiple(n, t)?;
            rat(1, t as i128)
        }
        Horizon::Limiting => Rational::zero(),
    };
    let (ni, di) = (n as i128, d as i128);
    let mut probabilities = vec![Rational::zero(); d + 1];
    probabilities[0] =
        Rational::from_integer(1) - rat(2 * di - 1, ni) + Rational::from_integer(di) * inv_t;
    for p in probabilities.iter_mut().take(d).skip(1) {
        *p = rat(2, ni) - inv_t;
    }
    probabilities[d] += rat(1, ni) - inv_t;
    if let Some(p) = probabilities.iter().find(|p| **p < Rational::zero()) {
        return Err(invalid(format!(
            "round-robin overlap formula yields negative mass {p} for n={n}, d={d}, {horizon:?}"
        )));
    }
    Ok(OverlapPmf::new(d, probabilities, horizon))
}

/// Exact overlap pmf over all unordered pairs of the first `T` round-robin
/// blocks.
pub fn overlap_pmf_round_robin_enumerated(n: usize, d: usize, t: u64) -> Result<OverlapPmf> {
    check_nd(n, d)?;
    if t < 2 {
        return Err(invalid("need at least two balls"));
    }
    let blocks = (1..=t)
        .map(|i| crate::designkit::round_robin_assignment(i, n, d))
        .collect::<Result<Vec<_>>>()?;
    overlap_pmf_of_blocks(&blocks, Horizon::Finite(t))
}

/// Exact pmf of the overlap between two distinct balls drawn uniformly from
/// `blocks`. Identical blocks are grouped so the cost is quadratic in the
/// number of distinct blocks only.
pub fn overlap_pmf_of_blocks(blocks: &[Block], regime: Horizon) -> Result<OverlapPmf> {
    let t = blocks.len() as i128;
    if t < 2 {
        return Err(invalid("need at least two balls"));
    }
    let d = blocks[0].size();
    let mut multiplicity: HashMap<&Block, i128> = HashMap::new();
    for b in blocks {
        if b.size() != d {
            return Err(invalid("blocks of unequal size"));
        }
        *multiplicity.entry(b).or_default() += 1;
    }
    let mut distinct: Vec<(&Block, i128)> = multiplicity.into_iter().collect();
    distinct.sort();
    let mut counts = vec![0i128; d + 1];
    for (i, &(a, ma)) in distinct.iter().enumerate() {
        counts[d] += ma * (ma - 1) / 2;
        for &(b, mb) in &distinct[i + 1..] {
            counts[a.overlap(b)] += ma * mb;
        }
    }
    let pairs = t * (t - 1) / 2;
    Ok(OverlapPmf::new(
        d,
        counts.into_iter().map(|c| rat(c, pairs)).collect(),
        regime,
    ))
}

/// Which finite-`T` BIBD pmf to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BibdPmfForm {
    /// Pair counting under cyclic block selection: another ball repeats the
    /// same block with probability `(T/n − 1)/(T − 1)` and otherwise shares
    /// exactly one urn. Normalised.
    #[default]
    Exact,
    /// `P(1) = (n−1)/n`, `P(d) = 1/n − 1/T`; sums to `1 − 1/T`.
    Unnormalized,
}

/// Overlap pmf of the `(n, d, 1)` block-design policy with cyclic block
/// selection. The limiting form is `P(1) = (n−1)/n`, `P(d) = 1/n`.
pub fn overlap_pmf_bibd(
    n: usize,
    d: usize,
    horizon: Horizon,
    form: BibdPmfForm,
) -> Result<OverlapPmf> {
    check_policy(PolicyKind::Bibd, n, d)?;
    if d < 2 {
        return Err(invalid("bibd overlap pmf needs d >= 2"));
    }
    let ni = n as i128;
    let mut probabilities = vec![Rational::zero(); d + 1];
    match horizon {
        Horizon::Limiting => {
            probabilities[1] = rat(ni - 1, ni);
            probabilities[d] = rat(1, ni);
        }
        Horizon::Finite(t) => {
            check_multiple(n, t)?;
            let ti = t as i128;
            match form {
                BibdPmfForm::Exact => {
                    if t < 2 {
                        return Err(invalid("need at least two balls"));
                    }
                    let same = rat(ti / ni - 1, ti - 1);
                    probabilities[d] = same;
                    probabilities[1] = Rational::from_integer(1) - same;
                }
                BibdPmfForm::Unnormalized => {
                    probabilities[1] = rat(ni - 1, ni);
                    probabilities[d] = rat(1, ni) - rat(1, ti);
                }
            }
        }
    }
    Ok(OverlapPmf::new(d, probabilities, horizon))
}

/// Limiting overlap pmf of a policy.
pub fn limiting_pmf(policy: PolicyKind, n: usize, d: usize) -> Result<OverlapPmf> {
    match policy {
        PolicyKind::Random => overlap_pmf_random(n, d),
        PolicyKind::RoundRobin => overlap_pmf_round_robin(n, d, Horizon::Limiting),
        PolicyKind::Bibd => overlap_pmf_bibd(n, d, Horizon::Limiting, BibdPmfForm::Exact),
    }
}

/// Average overlap factor: random and round-robin `n/d²`, block design
/// `n/(n+d−1)`.
pub fn aof(policy: PolicyKind, n: usize, d: usize) -> Result<Rational> {
    check_policy(policy, n, d)?;
    let (n, d) = (n as i128, d as i128);
    Ok(match policy {
        PolicyKind::Random | PolicyKind::RoundRobin => rat(n, d * d),
        PolicyKind::Bibd => rat(n, n + d - 1),
    })
}

/// Overlap diversity factor: random `n(n−1)/(d²(n+d(d−2)))`, round-robin
/// `3n/(2d³+d)`, block design `n/(n+d²−1)`.
pub fn odf(policy: PolicyKind, n: usize, d: usize) -> Result<Rational> {
    check_policy(policy, n, d)?;
    let (n, d) = (n as i128, d as i128);
    Ok(match policy {
        // n = d = 1 leaves the random closed form at 0/0; the single urn is
        // always shared, so E[o²] = 1.
        PolicyKind::Random if n == 1 => Rational::from_integer(1),
        PolicyKind::Random => rat(n * (n - 1), d * d * (n + d * (d - 2))),
        PolicyKind::RoundRobin => rat(3 * n, 2 * d * d * d + d),
        PolicyKind::Bibd => rat(n, n + d * d - 1),
    })
}

/// Approximate expected extreme loads after `T` random `d`-redundant throws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremeLoadApprox {
    pub mean_max: f64,
    /// Clamped at zero.
    pub mean_min: f64,
}

/// `Td/n ± √(2Td(n−d)·ln n / n²)`, with the minimum clamped at 0. The
/// logarithm is natural.
pub fn extreme_loads(n: usize, d: usize, t: u64) -> Result<ExtremeLoadApprox> {
    check_nd(n, d)?;
    if t == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let (nf, df, tf) = (n as f64, d as f64, t as f64);
    let mean = tf * df / nf;
    let spread = (2.0 * tf * df * (nf - df) * nf.ln() / (nf * nf)).sqrt();
    Ok(ExtremeLoadApprox {
        mean_max: mean + spread,
        mean_min: (mean - spread).max(0.0),
    })
}

/// Large-`n` approximation of the random-policy LBF at `T` balls.
pub fn lbf_random_approx(n: usize, d: usize, t: u64) -> Result<f64> {
    let loads = extreme_loads(n, d, t)?;
    Ok(if loads.mean_min <= 0.0 {
        0.0
    } else {
        loads.mean_min / loads.mean_max
    })
}

/// Load balancing factor. Round-robin and block-design placements keep
/// loads within one ball of each other, so their LBF is exactly 1.
pub fn lbf(policy: PolicyKind, n: usize, d: usize, t: u64) -> Result<f64> {
    check_policy(policy, n, d)?;
    match policy {
        PolicyKind::Random => lbf_random_approx(n, d, t),
        PolicyKind::RoundRobin | PolicyKind::Bibd => Ok(1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub lbf: f64,
    pub aof: Rational,
    pub odf: Rational,
    /// Limiting `E[o_X]`.
    pub first_moment: Rational,
    /// Limiting `E[o_X²]`.
    pub second_moment: Rational,
}

/// Indicators of one policy; `t` only enters the random-policy LBF.
pub fn indicator_set(policy: PolicyKind, n: usize, d: usize, t: u64) -> Result<IndicatorSet> {
    let aof = aof(policy, n, d)?;
    let odf = odf(policy, n, d)?;
    Ok(IndicatorSet {
        lbf: lbf(policy, n, d, t)?,
        aof,
        odf,
        first_moment: aof.recip(),
        second_moment: odf.recip(),
    })
}

/// CSV record `policy,n,d,lbf,aof,odf,e_o,e_o2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub policy: PolicyKind,
    pub n: usize,
    pub d: usize,
    pub lbf: f64,
    pub aof: f64,
    pub odf: f64,
    pub e_o: f64,
    pub e_o2: f64,
}

impl IndicatorRow {
    pub fn new(policy: PolicyKind, n: usize, d: usize, set: &IndicatorSet) -> Self {
        IndicatorRow {
            policy,
            n,
            d,
            lbf: set.lbf,
            aof: to_f64(&set.aof),
            odf: to_f64(&set.odf),
            e_o: to_f64(&set.first_moment),
            e_o2: to_f64(&set.second_moment),
        }
    }
}

/// Indicators of all three policies at `n = d(d−1)+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub d: usize,
    pub n: usize,
    pub t: u64,
    pub entries: Vec<(PolicyKind, IndicatorSet)>,
}

impl Table1Row {
    pub fn get(&self, policy: PolicyKind) -> &IndicatorSet {
        &self
            .entries
            .iter()
            .find(|(p, _)| *p == policy)
            .expect("all policies present")
            .1
    }

    pub fn rows(&self) -> Vec<IndicatorRow> {
        self.entries
            .iter()
            .map(|(p, s)| IndicatorRow::new(*p, self.n, self.d, s))
            .collect()
    }
}

/// One row of the policy comparison table. Requires a shipped design of
/// block size `d`; checks that the three AOFs coincide and that random and
/// block-design ODFs coincide.
pub fn table1_row(d: usize, t: u64) -> Result<Table1Row> {
    let design = known_bibd(d)?;
    let n = design.n();
    let entries = PolicyKind::ALL
        .iter()
        .map(|&p| indicator_set(p, n, d, t).map(|s| (p, s)))
        .collect::<Result<Vec<_>>>()?;
    let row = Table1Row { d, n, t, entries };
    let aofs: Vec<Rational> = PolicyKind::ALL.iter().map(|&p| row.get(p).aof).collect();
    if aofs.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidDesign(format!(
            "AOF differs across policies at d={d}: {aofs:?}"
        )));
    }
    if row.get(PolicyKind::Random).odf != row.get(PolicyKind::Bibd).odf {
        return Err(Error::InvalidDesign(format!(
            "random and bibd ODF differ at d={d}"
        )));
    }
    Ok(row)
}
