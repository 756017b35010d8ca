//! Block structures behind the three scheduling policies.
//!
//! A [`Block`] is the set of servers one job is replicated to. An
//! [`IncidenceStructure`] is a list of equally sized blocks over `n` objects,
//! viewed as a `b × n` binary matrix whose row `j` marks the members of block
//! `j`. Round-robin structures are circulant; symmetric `(n, d, 1)` designs
//! are generated from perfect difference sets by cyclic shifts.
//!
//! Text formats:
//!
//! * incidence structure: a header line `n b d`, then `b` lines of `n`
//!   characters from `{0,1}`;
//! * difference set: `n d: r1,r2,...,rd`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Node budget used by [`find_difference_set`] when the caller has no
/// better estimate.
pub const DEFAULT_SEARCH_BUDGET: u64 = 10_000_000;

/// A set of distinct server indices, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Block(Vec<usize>);

impl Block {
    /// Builds a block over objects `0..n`. Members may be given in any order.
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("a block needs at least one member"));
        }
        if let Some(&bad) = members.iter().find(|&&m| m >= n) {
            return Err(invalid(format!(
                "block member {bad} out of range for n={n}"
            )));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid(format!(
                "block members are not distinct: {members:?}"
            )));
        }
        Ok(Block(members))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, object: usize) -> bool {
        self.0.binary_search(&object).is_ok()
    }

    /// Number of objects shared with `other` (merge of two sorted lists).
    pub fn overlap(&self, other: &Block) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut shared) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

/// Parameters of a `(n_objects, block_size, pair_multiplicity)` design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DesignParams {
    pub n_objects: usize,
    pub block_size: usize,
    pub pair_multiplicity: usize,
}

impl DesignParams {
    /// The symmetric `λ = 1` parameters for block size `d`: `n = d(d−1)+1`.
    pub fn symmetric(block_size: usize) -> Self {
        DesignParams {
            n_objects: block_size * (block_size.saturating_sub(1)) + 1,
            block_size,
            pair_multiplicity: 1,
        }
    }

    /// Necessary condition for a symmetric design: `λ(n−1) = d(d−1)`.
    pub fn satisfies_symmetric_condition(&self) -> bool {
        self.n_objects >= 1
            && self.pair_multiplicity * (self.n_objects - 1)
                == self.block_size * self.block_size.saturating_sub(1)
    }
}

/// `true` iff `n = d(d−1)+1`, the order condition for an `(n,d,1)` design.
pub fn is_symmetric_order(n: usize, d: usize) -> bool {
    d >= 1 && n == d * (d - 1) + 1
}

/// A `b × n` binary block-by-object matrix in which every block has the
/// same size `d`. Duplicate blocks are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceStructure {
    n: usize,
    d: usize,
    blocks: Vec<Block>,
}

impl IncidenceStructure {
    pub fn from_blocks(n: usize, blocks: Vec<Block>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| invalid("an incidence structure needs at least one block"))?;
        let d = first.size();
        for (j, block) in blocks.iter().enumerate() {
            if block.size() != d {
                return Err(invalid(format!(
                    "block {j} has {} members, expected {d}",
                    block.size()
                )));
            }
            if let Some(&m) = block.members().last() {
                if m >= n {
                    return Err(invalid(format!(
                        "block {j} member {m} out of range for n={n}"
                    )));
                }
            }
        }
        Ok(IncidenceStructure { n, d, blocks })
    }

    /// Builds from explicit 0/1 rows, one per block.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        let mut blocks = Vec::with_capacity(rows.len());
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(invalid(format!(
                    "row {j} has {} columns, expected {n}",
                    row.len()
                )));
            }
            let mut members = Vec::new();
            for (i, &bit) in row.iter().enumerate() {
                match bit {
                    0 => {}
                    1 => members.push(i),
                    other => {
                        return Err(invalid(format!("row {j} holds non-binary entry {other}")))
                    }
                }
            }
            blocks.push(Block::new(members, n)?);
        }
        Self::from_blocks(n, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks (rows).
    pub fn b(&self) -> usize {
        self.blocks.len()
    }

    /// Common block size.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn is_square(&self) -> bool {
        self.b() == self.n
    }

    pub fn bit(&self, block: usize, object: usize) -> bool {
        self.blocks[block].contains(object)
    }

    /// Dense 0/1 matrix, row `j` = block `j`.
    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.blocks
            .iter()
            .map(|block| {
                let mut row = vec![0u8; self.n];
                for &m in block.members() {
                    row[m] = 1;
                }
                row
            })
            .collect()
    }

    /// Number of blocks containing each object.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.n];
        for block in &self.blocks {
            for &m in block.members() {
                sums[m] += 1;
            }
        }
        sums
    }

    /// Square and every object lies in exactly `d` blocks.
    pub fn is_regular(&self) -> bool {
        self.is_square() && self.column_sums().iter().all(|&c| c == self.d)
    }
}

impl fmt::Display for IncidenceStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.n, self.b(), self.d)?;
        for row in self.rows() {
            let line: String = row
                .iter()
                .map(|&b| if b == 1 { '1' } else { '0' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for IncidenceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        let fields: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("header `{header}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let [n, b, d] = fields[..] else {
            return Err(Error::Parse(format!("header `{header}` must be `n b d`")));
        };
        let mut rows = Vec::with_capacity(b);
        for line in lines {
            let row = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Parse(format!(
                        "unexpected character `{other}` in row"
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row `{line}` has {} columns, expected {n}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.len() != b {
            return Err(Error::Parse(format!(
                "expected {b} rows, found {}",
                rows.len()
            )));
        }
        let s = IncidenceStructure::from_rows(&rows)?;
        if s.d != d {
            return Err(Error::Parse(format!(
                "header block size {d} but rows hold {}",
                s.d
            )));
        }
        Ok(s)
    }
}

/// Servers of job `i` (1-based) under round-robin: the `d` consecutive
/// servers starting at `(i−1)·d mod n`.
pub fn round_robin_assignment(i: u64, n: usize, d: usize) -> Result<Block> {
    check_nd(n, d)?;
    if i == 0 {
        return Err(invalid("round-robin job index is 1-based"));
    }
    let start = ((i - 1) % n as u64) as usize * d % n;
    Block::new((0..d).map(|j| (start + j) % n).collect(), n)
}

/// The circulant structure whose row `i` is the window `{i, …, i+d−1} mod n`.
pub fn circulant_incidence(n: usize, d: usize) -> Result<IncidenceStructure> {
    check_nd(n, d)?;
    let blocks = (0..n)
        .map(|i| Block::new((0..d).map(|j| (i + j) % n).collect(), n))
        .collect::<Result<Vec<_>>>()?;
    IncidenceStructure::from_blocks(n, blocks)
}

/// The Fano plane, i.e. the `(7,3,1)` design with lines
/// 123, 145, 167, 257, 347, 246, 356 (1-based labels, stored 0-based).
pub fn fano_blocks() -> IncidenceStructure {
    const LINES: [[usize; 3]; 7] = [
        [1, 2, 3],
        [1, 4, 5],
        [1, 6, 7],
        [2, 5, 7],
        [3, 4, 7],
        [2, 4, 6],
        [3, 5, 6],
    ];
    let blocks = LINES
        .iter()
        .map(|line| Block::new(line.iter().map(|&x| x - 1).collect(), 7).expect("static line"))
        .collect();
    IncidenceStructure::from_blocks(7, blocks).expect("static design")
}

fn check_nd(n: usize, d: usize) -> Result<()> {
    if d == 0 || n == 0 {
        return Err(invalid(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    if d > n {
        return Err(invalid(format!("d={d} exceeds n={n}")));
    }
    Ok(())
}

/// A set of residues modulo `modulus`. Construction only checks range and
/// distinctness; [`DifferenceSet::is_perfect`] checks the difference
/// property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceSet {
    modulus: usize,
    residues: Vec<usize>,
}

impl DifferenceSet {
    pub fn new(modulus: usize, mut residues: Vec<usize>) -> Result<Self> {
        if modulus == 0 || residues.is_empty() {
            return Err(invalid(
                "difference set needs a positive modulus and residues",
            ));
        }
        if let Some(&r) = residues.iter().find(|&&r| r >= modulus) {
            return Err(invalid(format!("residue {r} out of range mod {modulus}")));
        }
        residues.sort_unstable();
        if residues.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid(format!("repeated residue in {residues:?}")));
        }
        Ok(DifferenceSet { modulus, residues })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn residues(&self) -> &[usize] {
        &self.residues
    }

    pub fn size(&self) -> usize {
        self.residues.len()
    }

    /// `coverage[r]` = number of ordered pairs `(a, b)`, `a ≠ b`, with
    /// `a − b ≡ r`. Index 0 is always 0.
    pub fn coverage(&self) -> Vec<usize> {
        let n = self.modulus;
        let mut counts = vec![0; n];
        for &a in &self.residues {
            for &b in &self.residues {
                if a != b {
                    counts[(a + n - b) % n] += 1;
                }
            }
        }
        counts
    }

    /// Every nonzero residue arises exactly once as a difference.
    pub fn is_perfect(&self) -> bool {
        self.coverage().iter().skip(1).all(|&c| c == 1)
    }
}

impl fmt::Display for DifferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<String> = self.residues.iter().map(usize::to_string).collect();
        write!(f, "{} {}: {}", self.modulus, self.size(), list.join(","))
    }
}

impl FromStr for DifferenceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("`{s}` is not `n d: r1,...,rd`")))?;
        let nums: Vec<usize> = head
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        let [n, d] = nums[..] else {
            return Err(Error::Parse(format!("`{head}` must be `n d`")));
        };
        let residues: Vec<usize> = tail
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("`{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if residues.len() != d {
            return Err(Error::Parse(format!(
                "declared {d} residues, found {}",
                residues.len()
            )));
        }
        DifferenceSet::new(n, residues)
    }
}

/// Develops a perfect difference set: block `j` is `{r + j mod n}`.
pub fn bibd_from_difference_set(ds: &DifferenceSet) -> Result<IncidenceStructure> {
    if !ds.is_perfect() {
        return Err(Error::InvalidDesign(format!(
            "{ds} does not cover every nonzero residue exactly once"
        )));
    }
    let n = ds.modulus();
    let blocks = (0..n)
        .map(|j| Block::new(ds.residues().iter().map(|&r| (r + j) % n).collect(), n))
        .collect::<Result<Vec<_>>>()?;
    IncidenceStructure::from_blocks(n, blocks)
}

/// Validated perfect difference sets for `d ∈ {2, 3, 4, 5, 6, 8}`. There is
/// no projective plane of order 6, hence no entry for `d = 7`.
pub fn known_difference_set(d: usize) -> Option<DifferenceSet> {
    let residues: &[usize] = match d {
        2 => &[0, 1],
        3 => &[0, 1, 3],
        4 => &[0, 1, 3, 9],
        5 => &[0, 1, 4, 14, 16],
        6 => &[0, 1, 3, 8, 12, 18],
        8 => &[0, 1, 3, 13, 32, 36, 43, 52],
        _ => return None,
    };
    Some(DifferenceSet::new(d * (d - 1) + 1, residues.to_vec()).expect("static residues"))
}

/// The shipped `(d(d−1)+1, d, 1)` design for block size `d`.
pub fn known_bibd(d: usize) -> Result<IncidenceStructure> {
    let ds = known_difference_set(d).ok_or(Error::UnsupportedOrder { d })?;
    bibd_from_difference_set(&ds)
}

/// Backtracking search for a perfect difference set of size `d` modulo `n`,
/// with 0 and 1 fixed in the set and remaining residues added in increasing
/// order. Each candidate residue examined costs one node of `budget`.
pub fn find_difference_set(n: usize, d: usize, budget: u64) -> Result<DifferenceSet> {
    if !is_symmetric_order(n, d) {
        return Err(invalid(format!("n={n} is not d(d-1)+1 for d={d}")));
    }
    if d == 1 {
        return DifferenceSet::new(1, vec![0]);
    }
    let mut search = DiffSearch {
        n,
        d,
        used: vec![false; n],
        set: vec![0, 1],
        nodes: 0,
        budget,
    };
    search.used[1] = true;
    search.used[n - 1] = true;
    match search.extend() {
        Some(true) => DifferenceSet::new(n, search.set),
        Some(false) => Err(Error::NoDifferenceSet { n, d }),
        None => Err(Error::BudgetExhausted { n, d, budget }),
    }
}

struct DiffSearch {
    n: usize,
    d: usize,
    used: Vec<bool>,
    set: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl DiffSearch {
    /// `Some(true)` found, `Some(false)` subtree exhausted, `None` out of budget.
    fn extend(&mut self) -> Option<bool> {
        if self.set.len() == self.d {
            return Some(true);
        }
        let n = self.n;
        let last = *self.set.last().expect("seeded with 0 and 1");
        let remaining = self.d - self.set.len();
        let mut fresh = Vec::with_capacity(2 * self.set.len());
        for c in last + 1..n {
            if n - c < remaining {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return None;
            }
            fresh.clear();
            let ok = self.set.iter().all(|&x| {
                let up = c - x;
                let down = n - up;
                if self.used[up]
                    || self.used[down]
                    || up == down
                    || fresh.contains(&up)
                    || fresh.contains(&down)
                {
                    return false;
                }
                fresh.push(up);
                fresh.push(down);
                true
            });
            if !ok {
                continue;
            }
            for &r in &fresh {
                self.used[r] = true;
            }
            self.set.push(c);
            let saved = fresh.clone();
            match self.extend() {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            self.set.pop();
            for r in saved {
                self.used[r] = false;
            }
        }
        Some(false)
    }
}

/// An unordered object pair whose block count differs from `λ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairViolation {
    pub a: usize,
    pub b: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignReport {
    pub n: usize,
    pub d: usize,
    pub lambda: usize,
    /// Every object in `0..n` lies in at least one block.
    pub objects_covered: bool,
    pub block_sizes_uniform: bool,
    /// Index pairs of identical blocks.
    pub duplicate_blocks: Vec<(usize, usize)>,
    pub pair_violations: Vec<PairViolation>,
}

impl DesignReport {
    pub fn is_valid(&self) -> bool {
        self.objects_covered
            && self.block_sizes_uniform
            && self.duplicate_blocks.is_empty()
            && self.pair_violations.is_empty()
    }
}

/// Checks the design conditions: all `n` objects present, uniform block
/// size, distinct blocks and every object pair in exactly `λ` blocks.
pub fn verify_design(s: &IncidenceStructure, lambda: usize) -> DesignReport {
    let n = s.n();
    let mut pair_counts = vec![0usize; n * n];
    for block in s.blocks() {
        let m = block.members();
        for (k, &a) in m.iter().enumerate() {
            for &b in &m[k + 1..] {
                pair_counts[a * n + b] += 1;
            }
        }
    }
    let pair_violations = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let count = pair_counts[a * n + b];
            (count != lambda).then_some(PairViolation { a, b, count })
        })
        .collect();

    let mut first_seen: HashMap<&Block, usize> = HashMap::new();
    let mut duplicate_blocks = Vec::new();
    for (j, block) in s.blocks().iter().enumerate() {
        match first_seen.get(block) {
            Some(&i) => duplicate_blocks.push((i, j)),
            None => {
                first_seen.insert(block, j);
            }
        }
    }

    DesignReport {
        n,
        d: s.d(),
        lambda,
        objects_covered: s.column_sums().iter().all(|&c| c > 0),
        block_sizes_uniform: s.blocks().iter().all(|b| b.size() == s.d()),
        duplicate_blocks,
        pair_violations,
    }
}
