//! The biologically-similar sequence space around a reference sequence:
//! every sequence within a BLOSUM budget `L` and a Hamming budget `H`.
//!
//! Sampling is rejection-based and reproducible from a seeded stream.
//! Enumeration exists for small instances, where it serves as the exact
//! reference for the sampler and for exhaustive attacks.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sequences::{seq_distance, AminoAcid, BlosumMatrix, Sequence};

/// Default number of rejection-sampling attempts per requested sequence.
pub const DEFAULT_RETRY_BUDGET: usize = 10_000;

/// Default cap on the estimated neighborhood size for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// How the BLOSUM budget constrains a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    /// `D_seq <= L`
    AtMost,
    /// `D_seq == L`
    Exact,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::AtMost => "at_most",
            DistanceMode::Exact => "exact",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at_most" => Ok(DistanceMode::AtMost),
            "exact" => Ok(DistanceMode::Exact),
            other => Err(Error::Config(format!("unknown distance mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSpec {
    /// BLOSUM budget `L`.
    pub max_distance: u32,
    /// Hamming budget `H`.
    pub max_changes: usize,
    pub mode: DistanceMode,
    pub matrix: BlosumMatrix,
    /// Mutable positions (0-based). `None` means every position.
    pub position_pool: Option<Vec<usize>>,
    pub retry_budget: usize,
}

impl NeighborhoodSpec {
    pub fn at_most(max_distance: u32, max_changes: usize) -> Self {
        NeighborhoodSpec {
            max_distance,
            max_changes,
            mode: DistanceMode::AtMost,
            matrix: BlosumMatrix::blosum62(),
            position_pool: None,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }

    pub fn exact(distance: u32, changes: usize) -> Self {
        NeighborhoodSpec {
            mode: DistanceMode::Exact,
            ..NeighborhoodSpec::at_most(distance, changes)
        }
    }

    pub fn with_matrix(mut self, matrix: BlosumMatrix) -> Self {
        self.matrix = matrix;
        self
    }

    pub fn with_pool(mut self, pool: Vec<usize>) -> Self {
        self.position_pool = Some(pool);
        self
    }

    /// Checks the spec against a concrete sequence.
    pub fn validate(&self, seq: &Sequence) -> Result<()> {
        let n = seq.len();
        if self.max_changes > n {
            return Err(Error::InvalidSpec(format!(
                "H = {} exceeds sequence length {n}",
                self.max_changes
            )));
        }
        if let Some(pool) = &self.position_pool {
            if pool.is_empty() {
                return Err(Error::InvalidSpec("empty position pool".into()));
            }
            let mut seen = HashSet::new();
            for &p in pool {
                if p >= n {
                    return Err(Error::InvalidSpec(format!(
                        "pool position {p} out of range for length {n}"
                    )));
                }
                if !seen.insert(p) {
                    return Err(Error::InvalidSpec(format!("duplicate pool position {p}")));
                }
            }
            if self.mode == DistanceMode::Exact && pool.len() < self.max_changes {
                return Err(Error::InvalidSpec(format!(
                    "exact mode changes H = {} positions but the pool has {}",
                    self.max_changes,
                    pool.len()
                )));
            }
        }
        if self.retry_budget == 0 {
            return Err(Error::InvalidSpec("retry budget must be positive".into()));
        }
        Ok(())
    }

    /// Whether `candidate` lies in the neighborhood of `reference`.
    pub fn contains(&self, reference: &Sequence, candidate: &Sequence) -> Result<bool> {
        let d = seq_distance(reference, candidate, &self.matrix)?;
        let mut changes = 0;
        for (i, (a, b)) in reference
            .residues()
            .iter()
            .zip(candidate.residues())
            .enumerate()
        {
            if a != b {
                changes += 1;
                if let Some(pool) = &self.position_pool {
                    if !pool.contains(&i) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(changes <= self.max_changes && self.distance_ok(d))
    }

    fn distance_ok(&self, d: i64) -> bool {
        match self.mode {
            DistanceMode::AtMost => d <= i64::from(self.max_distance),
            DistanceMode::Exact => d == i64::from(self.max_distance),
        }
    }

    fn pool(&self, n: usize) -> Vec<usize> {
        match &self.position_pool {
            Some(p) => p.clone(),
            None => (0..n).collect(),
        }
    }
}

impl fmt::Display for NeighborhoodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L={} H={} mode={} matrix={}",
            self.max_distance,
            self.max_changes,
            self.mode,
            self.matrix.name()
        )?;
        match &self.position_pool {
            Some(p) => write!(f, " pool={p:?}"),
            None => write!(f, " pool=all"),
        }
    }
}

/// The `k`-th residue different from `original`, `k` in `0..19`, in matrix order.
fn alternative(original: AminoAcid, k: usize) -> AminoAcid {
    let idx = if k >= original.index() { k + 1 } else { k };
    AminoAcid::ALL[idx]
}

/// Substitutions at `positions` satisfying the BLOSUM constraint, or
/// `None` when no assignment does.
///
/// `ways[k][d]` counts the substitution tuples for `positions[k..]` whose
/// gaps sum to `d`. Drawing each residue with weight equal to its number of
/// feasible completions yields every feasible tuple with equal probability,
/// the same law as rejection over uniform substitutions.
fn draw_substitutions<R: Rng + ?Sized>(
    seq: &Sequence,
    positions: &[usize],
    spec: &NeighborhoodSpec,
    rng: &mut R,
) -> Option<Vec<AminoAcid>> {
    let options = |pos: usize| {
        let original = seq.residues()[pos];
        (0..19).map(move |k| {
            let aa = alternative(original, k);
            (aa, spec.matrix.gap(original, aa))
        })
    };
    let largest: i64 = positions
        .iter()
        .map(|&p| options(p).map(|(_, g)| g).max().unwrap_or(0))
        .sum();
    if spec.mode == DistanceMode::Exact && i64::from(spec.max_distance) > largest {
        return None;
    }
    let budget = i64::from(spec.max_distance).min(largest) as usize;
    let h = positions.len();
    let mut ways = vec![vec![0.0f64; budget + 1]; h + 1];
    ways[h][0] = 1.0;
    for k in (0..h).rev() {
        for (_, g) in options(positions[k]) {
            for d in 0..=budget {
                let total = d as i64 + g;
                if ways[k + 1][d] > 0.0 && (0..=budget as i64).contains(&total) {
                    ways[k][total as usize] += ways[k + 1][d];
                }
            }
        }
    }
    // completions of positions[k..] that fit in `left`
    let completions = |k: usize, left: i64| -> f64 {
        if left < 0 {
            return 0.0;
        }
        let left = left as usize;
        match spec.mode {
            DistanceMode::Exact => ways[k][left],
            DistanceMode::AtMost => ways[k][..=left].iter().sum(),
        }
    };
    if completions(0, budget as i64) == 0.0 {
        return None;
    }
    let mut residues = seq.residues().to_vec();
    let mut left = budget as i64;
    for (k, &pos) in positions.iter().enumerate() {
        let choices: Vec<(AminoAcid, i64)> = options(pos).collect();
        let weights: Vec<f64> = choices
            .iter()
            .map(|&(_, g)| completions(k + 1, left - g))
            .collect();
        let pick = WeightedIndex::new(&weights).expect("a feasible completion exists");
        let (aa, g) = choices[pick.sample(rng)];
        residues[pos] = aa;
        left -= g;
    }
    Some(residues)
}

/// Draws one member of the neighborhood.
///
/// At-most mode changes `h ~ U[1, H]` positions; exact mode always changes
/// exactly `H`. Positions are drawn without replacement from the pool and
/// redrawn when no substitution at them satisfies the BLOSUM constraint;
/// given the positions, the substitutions are uniform over the feasible
/// ones.
pub fn sample_neighbor<R: Rng + ?Sized>(
    seq: &Sequence,
    spec: &NeighborhoodSpec,
    rng: &mut R,
) -> Result<Sequence> {
    spec.validate(seq)?;
    let pool = spec.pool(seq.len());
    let h_max = spec.max_changes.min(pool.len());

    if spec.mode == DistanceMode::Exact && spec.max_distance == 0 {
        return Ok(seq.clone());
    }
    if h_max == 0 {
        return match spec.mode {
            DistanceMode::AtMost => Ok(seq.clone()),
            DistanceMode::Exact => Err(Error::InvalidSpec(format!(
                "no positions may change but exact distance {} was requested",
                spec.max_distance
            ))),
        };
    }
    if spec.mode == DistanceMode::AtMost {
        // no single substitution fits the budget: S is the only member
        let cheapest = pool
            .iter()
            .flat_map(|&pos| {
                let original = seq.residues()[pos];
                (0..19).map(move |k| spec.matrix.gap(original, alternative(original, k)))
            })
            .min()
            .unwrap_or(i64::MAX);
        if !spec.distance_ok(cheapest) {
            return Ok(seq.clone());
        }
    }

    for _ in 0..spec.retry_budget {
        let h = match spec.mode {
            DistanceMode::Exact => h_max,
            DistanceMode::AtMost => rng.gen_range(1..=h_max),
        };
        let positions: Vec<usize> = index::sample(rng, pool.len(), h)
            .iter()
            .map(|p| pool[p])
            .collect();
        if let Some(residues) = draw_substitutions(seq, &positions, spec, rng) {
            return Sequence::new(format!("{}_mut", seq.id()), residues);
        }
    }
    Err(Error::SamplerExhausted {
        spec: spec.to_string(),
        attempts: spec.retry_budget,
    })
}

/// Draws `count` pairwise-distinct members, in draw order.
///
/// Fails when `retry_budget` consecutive draws produce only sequences that
/// were already seen, which signals a neighborhood smaller than `count`.
pub fn sample_batch<R: Rng + ?Sized>(
    seq: &Sequence,
    spec: &NeighborhoodSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Sequence>> {
    if count == 0 {
        return Err(Error::InvalidSpec("sample count must be positive".into()));
    }
    let mut seen: HashSet<Vec<AminoAcid>> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut duplicates = 0usize;
    let mut attempts = 0usize;
    while out.len() < count {
        let s = sample_neighbor(seq, spec, rng)?;
        attempts += 1;
        if seen.insert(s.residues().to_vec()) {
            duplicates = 0;
            out.push(s.with_id(format!("{}_{}", seq.id(), out.len() + 1)));
        } else {
            duplicates += 1;
            if duplicates >= spec.retry_budget {
                return Err(Error::SamplerExhausted {
                    spec: format!("{spec}; found {} of {count} distinct members", out.len()),
                    attempts,
                });
            }
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Upper bound on the neighborhood size that ignores the BLOSUM budget:
/// `sum_h C(|pool|, h) * 19^h`.
pub fn estimated_size(seq: &Sequence, spec: &NeighborhoodSpec) -> u128 {
    let p = spec.position_pool.as_ref().map_or(seq.len(), Vec::len);
    let h_max = spec.max_changes.min(p);
    (0..=h_max)
        .map(|h| binomial(p, h).saturating_mul(19u128.saturating_pow(h as u32)))
        .fold(0u128, u128::saturating_add)
}

/// Streams every member exactly once.
///
/// Order: by number of changed positions, then position tuples in
/// lexicographic order, then replacement residues in alphabetical order of
/// their one-letter codes (last position varying fastest).
pub fn enumerate_neighborhood(
    seq: &Sequence,
    spec: &NeighborhoodSpec,
    cap: Option<u64>,
) -> Result<Neighborhood> {
    spec.validate(seq)?;
    let estimated = estimated_size(seq, spec);
    if let Some(cap) = cap {
        if estimated > u128::from(cap) {
            return Err(Error::EnumerationCap { estimated, cap });
        }
    }
    let mut pool = spec.pool(seq.len());
    pool.sort_unstable();
    let h_max = spec.max_changes.min(pool.len());
    Ok(Neighborhood {
        reference: seq.clone(),
        spec: spec.clone(),
        pool,
        h_max,
        size: 0,
        combo: Vec::new(),
        subs: Vec::new(),
        done: false,
        emitted: 0,
    })
}

/// Iterator returned by [`enumerate_neighborhood`].
pub struct Neighborhood {
    reference: Sequence,
    spec: NeighborhoodSpec,
    pool: Vec<usize>,
    h_max: usize,
    size: usize,
    combo: Vec<usize>,
    subs: Vec<usize>,
    done: bool,
    emitted: usize,
}

impl Neighborhood {
    fn alternatives(&self, pos: usize) -> impl Iterator<Item = AminoAcid> + '_ {
        let original = self.reference.residues()[pos];
        AminoAcid::ALPHABETICAL
            .iter()
            .copied()
            .filter(move |&aa| aa != original)
    }

    fn current(&self) -> (Vec<AminoAcid>, i64) {
        let mut residues = self.reference.residues().to_vec();
        let mut distance = 0;
        for (&c, &s) in self.combo.iter().zip(&self.subs) {
            let pos = self.pool[c];
            let aa = self.alternatives(pos).nth(s).expect("19 alternatives");
            distance += self.spec.matrix.gap(residues[pos], aa);
            residues[pos] = aa;
        }
        (residues, distance)
    }

    fn advance(&mut self) {
        // substitutions: odometer, last position fastest
        for i in (0..self.subs.len()).rev() {
            if self.subs[i] + 1 < 19 {
                self.subs[i] += 1;
                return;
            }
            self.subs[i] = 0;
        }
        // next position tuple of the same size
        let p = self.pool.len();
        let h = self.size;
        for i in (0..h).rev() {
            if self.combo[i] < p - h + i {
                self.combo[i] += 1;
                for j in i + 1..h {
                    self.combo[j] = self.combo[j - 1] + 1;
                }
                return;
            }
        }
        // next size
        self.size += 1;
        if self.size > self.h_max {
            self.done = true;
            return;
        }
        self.combo = (0..self.size).collect();
        self.subs = vec![0; self.size];
    }
}

impl Iterator for Neighborhood {
    type Item = Sequence;

    fn next(&mut self) -> Option<Sequence> {
        while !self.done {
            let (residues, distance) = self.current();
            self.advance();
            if self.spec.distance_ok(distance) {
                self.emitted += 1;
                let id = format!("{}_e{}", self.reference.id(), self.emitted);
                return Some(Sequence::new(id, residues).expect("non-empty"));
            }
        }
        None
    }
}

/// Confidence level around which positions are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceCategory {
    Min,
    Avg,
    Max,
}

impl fmt::Display for ConfidenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfidenceCategory::Min => "min",
            ConfidenceCategory::Avg => "avg",
            ConfidenceCategory::Max => "max",
        })
    }
}

impl FromStr for ConfidenceCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(ConfidenceCategory::Min),
            "avg" => Ok(ConfidenceCategory::Avg),
            "max" => Ok(ConfidenceCategory::Max),
            other => Err(Error::Config(format!(
                "unknown confidence category '{other}'"
            ))),
        }
    }
}

/// The `count` positions whose confidence is closest to the category target
/// (minimum, mean or maximum of `plddt`), ties to the lower index, returned
/// in ascending order.
pub fn select_positions_by_confidence(
    plddt: &[f64],
    category: ConfidenceCategory,
    count: usize,
) -> Result<Vec<usize>> {
    if plddt.is_empty() {
        return Err(Error::InvalidConfidence("empty confidence list".into()));
    }
    if count == 0 || count > plddt.len() {
        return Err(Error::InvalidConfidence(format!(
            "cannot select {count} of {} positions",
            plddt.len()
        )));
    }
    if let Some(bad) = plddt.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidConfidence(format!("non-finite value {bad}")));
    }
    let target = match category {
        ConfidenceCategory::Min => plddt.iter().copied().fold(f64::INFINITY, f64::min),
        ConfidenceCategory::Max => plddt.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ConfidenceCategory::Avg => plddt.iter().sum::<f64>() / plddt.len() as f64,
    };
    let mut order: Vec<usize> = (0..plddt.len()).collect();
    order.sort_by(|&a, &b| {
        (plddt[a] - target)
            .abs()
            .total_cmp(&(plddt[b] - target).abs())
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order.sort_unstable();
    Ok(order)
}
