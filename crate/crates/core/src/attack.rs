//! Black-box attack: sample candidates from the neighborhood, fold them,
//! superpose each onto the original prediction and keep the candidate that
//! maximizes the structural objective.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neighborhood::{
    enumerate_neighborhood, sample_batch, select_positions_by_confidence, ConfidenceCategory,
    NeighborhoodSpec, DEFAULT_ENUMERATION_CAP,
};
use crate::oracle::FoldingOracle;
use crate::sequences::{changed_positions, Sequence};
use crate::structures::{
    gdt, gdt_by_confidence_region, rmsd, superpose, AlignParams, GdtMode, RegionGdt, Structure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// RMSD over all residues after superposition.
    Rmsd,
    /// `-GDT-TS`, so that maximizing it minimizes GDT-TS.
    GdtTsNegated,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Rmsd => "rmsd",
            Objective::GdtTsNegated => "gdt_ts_negated",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmsd" => Ok(Objective::Rmsd),
            "gdt_ts_negated" | "gdt" => Ok(Objective::GdtTsNegated),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

/// Where mutations may be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionStrategy {
    Uniform,
    /// Restrict to the `H` positions whose original-structure confidence is
    /// closest to the category target.
    Confidence(ConfidenceCategory),
}

impl fmt::Display for PositionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositionStrategy::Uniform => f.write_str("uniform"),
            PositionStrategy::Confidence(c) => write!(f, "confidence:{c}"),
        }
    }
}

impl FromStr for PositionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PositionStrategy::Uniform),
            other => match other.strip_prefix("confidence:") {
                Some(c) => Ok(PositionStrategy::Confidence(c.parse()?)),
                None => Err(Error::Config(format!(
                    "unknown position strategy '{other}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub spec: NeighborhoodSpec,
    pub samples: usize,
    pub objective: Objective,
    pub seed: u64,
    pub position_strategy: PositionStrategy,
    pub align: AlignParams,
    /// Worker threads for candidate folding. Only used when the oracle is
    /// reentrant; never changes the result.
    pub jobs: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            spec: NeighborhoodSpec::at_most(20, 5),
            samples: 20,
            objective: Objective::Rmsd,
            seed: 0,
            position_strategy: PositionStrategy::Uniform,
            align: AlignParams::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub sequence: Sequence,
    pub changed_positions: Vec<usize>,
    pub rmsd_all: f64,
    pub rmsd_kept: f64,
    pub gdt_ts: f64,
    pub gdt_ha: f64,
    pub objective: f64,
    pub fold_seconds: f64,
}

/// Mean and population standard deviation of confidence, over all residues
/// and over the mutated residues only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceStats {
    pub mean_all: f64,
    pub std_all: f64,
    pub mean_diff: Option<f64>,
    pub std_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub original: Sequence,
    pub original_structure: Structure,
    pub original_fold_seconds: f64,
    /// All evaluated candidates in sampling (or enumeration) order.
    pub candidates: Vec<CandidateRecord>,
    pub best_index: usize,
    /// Predicted structure of the best candidate, in the original's frame.
    pub best_structure: Structure,
    pub similarity_percent: f64,
    pub original_confidence: ConfidenceStats,
    pub adversarial_confidence: ConfidenceStats,
    /// GDT-TS per confidence region of the original prediction.
    pub gdt_regions: [Option<RegionGdt>; 4],
    pub avg_rmsd: f64,
    pub avg_gdt_ts: f64,
    pub avg_gdt_ha: f64,
    pub total_seconds: f64,
}

impl AttackResult {
    pub fn best(&self) -> &CandidateRecord {
        &self.candidates[self.best_index]
    }
}

/// `100 * (n - d_ham) / n`.
pub fn similarity_percent(n: usize, d_ham: usize) -> f64 {
    100.0 * (n - d_ham.min(n)) as f64 / n as f64
}

/// Welford accumulation; returns (mean, population std).
fn mean_std(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        count += 1;
        let delta = v - mean;
        mean += delta / count as f64;
        m2 += delta * (v - mean);
    }
    (count > 0).then(|| (mean, (m2 / count as f64).sqrt()))
}

pub fn confidence_stats(plddt: &[f64], changed: &[usize]) -> Result<ConfidenceStats> {
    let (mean_all, std_all) = mean_std(plddt.iter().copied())
        .ok_or_else(|| Error::InvalidConfidence("empty confidence list".into()))?;
    if let Some(&p) = changed.iter().find(|&&p| p >= plddt.len()) {
        return Err(Error::InvalidConfidence(format!(
            "position {p} out of range for {} residues",
            plddt.len()
        )));
    }
    let diff = mean_std(changed.iter().map(|&i| plddt[i]));
    Ok(ConfidenceStats {
        mean_all,
        std_all,
        mean_diff: diff.map(|d| d.0),
        std_diff: diff.map(|d| d.1),
    })
}

struct Evaluated {
    record: CandidateRecord,
    aligned: Structure,
}

fn evaluate(
    original: &Sequence,
    original_structure: &Structure,
    candidate: Sequence,
    structure: Structure,
    fold_seconds: f64,
    config: &AttackConfig,
) -> Result<Evaluated> {
    let sup = superpose(original_structure, &structure, &config.align)?;
    let aligned = structure.transformed(&sup.transform);
    let rmsd_all = rmsd(original_structure, &aligned)?;
    let gdt_ts = gdt(original_structure, &aligned, &GdtMode::TS)?;
    let gdt_ha = gdt(original_structure, &aligned, &GdtMode::HA)?;
    let objective = match config.objective {
        Objective::Rmsd => rmsd_all,
        Objective::GdtTsNegated => -gdt_ts,
    };
    Ok(Evaluated {
        record: CandidateRecord {
            changed_positions: changed_positions(original, &candidate)?,
            sequence: candidate,
            rmsd_all,
            rmsd_kept: sup.rmsd_kept,
            gdt_ts,
            gdt_ha,
            objective,
            fold_seconds,
        },
        aligned,
    })
}

fn fold_timed(oracle: &dyn FoldingOracle, seq: &Sequence) -> Result<(Structure, f64)> {
    let start = Instant::now();
    let s = oracle.fold(seq)?;
    Ok((s, start.elapsed().as_secs_f64()))
}

/// Folds and scores every candidate, preserving input order. Runs in
/// parallel only when the oracle declares reentrancy.
fn evaluate_all(
    oracle: &dyn FoldingOracle,
    original: &Sequence,
    original_structure: &Structure,
    candidates: Vec<Sequence>,
    config: &AttackConfig,
) -> Result<Vec<Evaluated>> {
    let one = |(index, seq): (usize, Sequence)| -> Result<Evaluated> {
        let (structure, secs) = fold_timed(oracle, &seq).map_err(|e| Error::CandidateFold {
            index,
            id: seq.id().to_string(),
            source: Box::new(e),
        })?;
        if structure.len() != seq.len() {
            return Err(Error::CandidateFold {
                index,
                id: seq.id().to_string(),
                source: Box::new(Error::FoldLength {
                    expected: seq.len(),
                    got: structure.len(),
                }),
            });
        }
        evaluate(original, original_structure, seq, structure, secs, config)
    };

    if oracle.reentrant() && config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let results: Vec<Result<Evaluated>> =
            pool.install(|| candidates.into_par_iter().enumerate().map(one).collect());
        results.into_iter().collect()
    } else {
        candidates.into_iter().enumerate().map(one).collect()
    }
}

/// First index attaining the maximum objective.
fn argmax(records: &[CandidateRecord]) -> usize {
    let mut best = 0;
    for (i, r) in records.iter().enumerate().skip(1) {
        if r.objective > records[best].objective {
            best = i;
        }
    }
    best
}

fn spec_for(config: &AttackConfig, original_structure: &Structure) -> Result<NeighborhoodSpec> {
    let mut spec = config.spec.clone();
    if let PositionStrategy::Confidence(category) = config.position_strategy {
        let plddt = original_structure.plddt().ok_or(Error::MissingConfidence)?;
        let count = spec.max_changes.max(1);
        spec.position_pool = Some(select_positions_by_confidence(plddt, category, count)?);
    }
    Ok(spec)
}

fn assemble(
    original: &Sequence,
    original_structure: Structure,
    original_fold_seconds: f64,
    evaluated: Vec<Evaluated>,
    spec: &NeighborhoodSpec,
    started: Instant,
) -> Result<AttackResult> {
    if evaluated.is_empty() {
        return Err(Error::InvalidSpec("no candidates to evaluate".into()));
    }
    for e in &evaluated {
        if !spec.contains(original, &e.record.sequence)? {
            return Err(Error::InvalidSpec(format!(
                "candidate '{}' lies outside {spec}",
                e.record.sequence.id()
            )));
        }
    }
    let (candidates, mut aligned): (Vec<CandidateRecord>, Vec<Structure>) =
        evaluated.into_iter().map(|e| (e.record, e.aligned)).unzip();
    let best_index = argmax(&candidates);
    let best_structure = aligned.swap_remove(best_index);
    let best = &candidates[best_index];

    let original_plddt = original_structure.plddt().ok_or(Error::MissingConfidence)?;
    let adversarial_plddt = best_structure.plddt().ok_or(Error::MissingConfidence)?;
    let count = candidates.len() as f64;
    Ok(AttackResult {
        similarity_percent: similarity_percent(original.len(), best.changed_positions.len()),
        original_confidence: confidence_stats(original_plddt, &best.changed_positions)?,
        adversarial_confidence: confidence_stats(adversarial_plddt, &best.changed_positions)?,
        gdt_regions: gdt_by_confidence_region(&original_structure, &best_structure, &GdtMode::TS)?,
        avg_rmsd: candidates.iter().map(|c| c.rmsd_all).sum::<f64>() / count,
        avg_gdt_ts: candidates.iter().map(|c| c.gdt_ts).sum::<f64>() / count,
        avg_gdt_ha: candidates.iter().map(|c| c.gdt_ha).sum::<f64>() / count,
        original: original.clone(),
        original_structure,
        original_fold_seconds,
        best_index,
        best_structure,
        candidates,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

fn fold_original(oracle: &dyn FoldingOracle, seq: &Sequence) -> Result<(Structure, f64)> {
    let (s, secs) = fold_timed(oracle, seq)?;
    if s.len() != seq.len() {
        return Err(Error::FoldLength {
            expected: seq.len(),
            got: s.len(),
        });
    }
    Ok((s, secs))
}

/// Sampled attack: `config.samples` distinct neighbors drawn with a
/// ChaCha8 stream seeded from `config.seed`.
pub fn run_attack(
    seq: &Sequence,
    oracle: &dyn FoldingOracle,
    config: &AttackConfig,
) -> Result<AttackResult> {
    let started = Instant::now();
    if config.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let (original_structure, original_secs) = fold_original(oracle, seq)?;
    let spec = spec_for(config, &original_structure)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let candidates = sample_batch(seq, &spec, config.samples, &mut rng)?;
    let evaluated = evaluate_all(oracle, seq, &original_structure, candidates, config)?;
    assemble(
        seq,
        original_structure,
        original_secs,
        evaluated,
        &spec,
        started,
    )
}

/// Exact maximizer over the whole neighborhood `config.spec` (sampling
/// fields are ignored). Only feasible for small instances.
pub fn exhaustive_attack(
    seq: &Sequence,
    oracle: &dyn FoldingOracle,
    config: &AttackConfig,
) -> Result<AttackResult> {
    let started = Instant::now();
    let (original_structure, original_secs) = fold_original(oracle, seq)?;
    let spec = spec_for(config, &original_structure)?;
    let members: Vec<Sequence> =
        enumerate_neighborhood(seq, &spec, Some(DEFAULT_ENUMERATION_CAP))?.collect();
    let evaluated = evaluate_all(oracle, seq, &original_structure, members, config)?;
    assemble(
        seq,
        original_structure,
        original_secs,
        evaluated,
        &spec,
        started,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Column statistics across attacked proteins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSummary {
    pub count: usize,
    pub n: MeanStd,
    pub mean_confidence: MeanStd,
    pub rmsd: MeanStd,
    /// Best-candidate GDT-TS as a fraction.
    pub gdt_ts: MeanStd,
    pub seconds: MeanStd,
}

pub fn aggregate_results(results: &[AttackResult]) -> Result<AttackSummary> {
    if results.is_empty() {
        return Err(Error::Config("cannot aggregate zero results".into()));
    }
    let column = |f: &dyn Fn(&AttackResult) -> f64| {
        let (mean, std) = mean_std(results.iter().map(f)).expect("non-empty");
        MeanStd { mean, std }
    };
    Ok(AttackSummary {
        count: results.len(),
        n: column(&|r| r.original.len() as f64),
        mean_confidence: column(&|r| r.original_confidence.mean_all),
        rmsd: column(&|r| r.best().rmsd_all),
        gdt_ts: column(&|r| r.best().gdt_ts),
        seconds: column(&|r| r.total_seconds),
    })
}
