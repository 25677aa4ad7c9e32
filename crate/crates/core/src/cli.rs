//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{
    aggregate_results, run_attack, AttackConfig, AttackResult, Objective, PositionStrategy,
};
use crate::error::{Error, Result};
use crate::neighborhood::{sample_batch, ConfidenceCategory, DistanceMode, NeighborhoodSpec};
use crate::oracle::{
    fnv1a64, CachedOracle, FoldingOracle, MockFolder, Serialized, SubprocessOracle,
};
use crate::reduction::{
    clique_exists_bruteforce, paa_feasible_exhaustive, reduce_clique_to_paa, Graph,
    DEFAULT_SEARCH_CAP,
};
use crate::report::{self, RunManifest};
use crate::sequences::{hamming, parse_fasta, seq_distance, write_fasta, BlosumMatrix, Sequence};
use crate::structures::{gdt, parse_pdb_ca, rmsd, superpose, AlignParams, GdtMode, OutlierRule};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const OUTPUT_FILES: [&str; 6] = [
    "attack.csv",
    "confidence.csv",
    "regions.csv",
    "candidates.csv",
    "summary.csv",
    "adversarial.fasta",
];

#[derive(Debug, Parser)]
#[command(
    name = "foldattack",
    version,
    about = "Adversarial sequences against protein folding predictors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attack every sequence of a FASTA file and write CSV tables.
    Attack(AttackArgs),
    /// Rerun an attack from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the recorded worker count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare two Cα structures.
    Metrics(MetricsArgs),
    /// Check a CLIQUE instance against its reduced attack instance.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Sample neighbors and print them as FASTA.
    Neighborhood(NeighborhoodArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long = "L", default_value_t = 20)]
    pub l: u32,
    #[arg(long = "H", default_value_t = 5)]
    pub h: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `mock` or `cmd:<template>` with `{fasta}` and `{out}` placeholders.
    #[arg(long, default_value = "mock")]
    pub oracle: String,
    /// Seconds before an external fold is killed.
    #[arg(long)]
    pub oracle_timeout: Option<u64>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub align_cutoff: f64,
    #[arg(long, default_value_t = 5)]
    pub align_cycles: usize,
    #[arg(long, default_value = "relative")]
    pub align_rule: OutlierRule,
    /// Require the BLOSUM distance to equal L exactly.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub confidence_strategy: Option<ConfidenceCategory>,
    #[arg(long, default_value = "rmsd")]
    pub objective: Objective,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Fill the run-time columns with wall-clock seconds.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub target: PathBuf,
    pub mobile: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub align_cutoff: f64,
    #[arg(long, default_value_t = 5)]
    pub align_cycles: usize,
    #[arg(long, default_value = "relative")]
    pub align_rule: OutlierRule,
    /// Flat key=value output.
    #[arg(long)]
    pub kv: bool,
}

#[derive(Debug, Args)]
pub struct NeighborhoodArgs {
    #[arg(long)]
    pub fasta: PathBuf,
    #[arg(long = "L", default_value_t = 20)]
    pub l: u32,
    #[arg(long = "H", default_value_t = 5)]
    pub h: usize,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub exact: bool,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Attack(a) => cmd_attack(&a, out),
        Command::Replay {
            manifest,
            out_dir,
            jobs,
        } => cmd_replay(&manifest, &out_dir, jobs, out),
        Command::Metrics(m) => cmd_metrics(&m, out),
        Command::Reduce { graph, k } => cmd_reduce(&graph, k, out),
        Command::Neighborhood(n) => cmd_neighborhood(&n, out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn absolute(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn spec_from(l: u32, h: usize, exact: bool) -> NeighborhoodSpec {
    if exact {
        NeighborhoodSpec::exact(l, h)
    } else {
        NeighborhoodSpec::at_most(l, h)
    }
}

/// Builds the oracle named by `spec`, optionally cached.
pub fn build_oracle(
    spec: &str,
    timeout: Option<u64>,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn FoldingOracle>> {
    let base: Box<dyn FoldingOracle> = if spec == "mock" {
        Box::new(MockFolder::default())
    } else if let Some(template) = spec.strip_prefix("cmd:") {
        let workdir = std::env::temp_dir().join(format!("foldattack-{}", std::process::id()));
        let mut o = SubprocessOracle::new(template, workdir)?;
        if let Some(t) = timeout {
            o = o.with_timeout(Duration::from_secs(t));
        }
        Box::new(o)
    } else {
        return Err(Error::Config(format!(
            "unknown oracle '{spec}', expected 'mock' or 'cmd:<template>'"
        )));
    };
    Ok(match cache_dir {
        Some(dir) => Box::new(CachedOracle::new(base, dir)?),
        None => base,
    })
}

fn attack_config(a: &AttackArgs) -> AttackConfig {
    AttackConfig {
        spec: spec_from(a.l, a.h, a.exact),
        samples: a.samples,
        objective: a.objective,
        seed: a.seed,
        position_strategy: a
            .confidence_strategy
            .map_or(PositionStrategy::Uniform, PositionStrategy::Confidence),
        align: AlignParams {
            cutoff: a.align_cutoff,
            max_cycles: a.align_cycles,
            rule: a.align_rule,
        },
        jobs: 1,
    }
}

pub fn cmd_attack(a: &AttackArgs, out: &mut dyn Write) -> Result<i32> {
    let started_unix = unix_now();
    if a.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let fasta_text = read(&a.fasta)?;
    let sequences = parse_fasta(&fasta_text)?;
    let oracle = Serialized::new(build_oracle(
        &a.oracle,
        a.oracle_timeout,
        a.cache_dir.as_deref(),
    )?);
    let mut config = attack_config(a);
    // a lone sequence gets the workers for its candidates instead
    if sequences.len() == 1 {
        config.jobs = a.jobs;
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;

    let attack_one = |s: &Sequence| {
        let r = run_attack(s, &oracle, &config);
        if let Err(e) = &r {
            log::error!("attack on '{}' failed: {e}", s.id());
        }
        r
    };
    let results: Vec<Result<AttackResult>> = if a.jobs > 1 && sequences.len() > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(a.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| sequences.par_iter().map(attack_one).collect())
    } else {
        sequences.iter().map(attack_one).collect()
    };

    let mut attack_rows = Vec::new();
    let mut confidence_rows = Vec::new();
    let mut region_rows = Vec::new();
    let mut candidate_rows = Vec::new();
    let mut adversarial = Vec::new();
    let mut ok = Vec::new();
    for (s, r) in sequences.iter().zip(results) {
        match r {
            Ok(r) => {
                attack_rows.push(report::attack_row(&r, a.timing));
                confidence_rows.push(report::confidence_row(&r));
                region_rows.push(report::regions_row(&r));
                candidate_rows.extend(report::candidate_rows(&r));
                adversarial.push(r.best().sequence.with_id(format!("{}_adv", s.id())));
                ok.push(r);
            }
            Err(e) => {
                writeln!(out, "{}: failed: {e}", s.id()).map_err(|e| Error::io("stdout", e))?;
                attack_rows.push(report::failed_attack_row(s.id(), s.len()));
            }
        }
    }
    let failed = sequences.len() - ok.len();
    let summary_rows = match aggregate_results(&ok) {
        Ok(s) => vec![report::summary_row(&s, a.timing)],
        Err(_) => Vec::new(),
    };
    let dir = &a.out_dir;
    write(
        &dir.join("attack.csv"),
        &report::table(report::ATTACK_HEADER, &attack_rows),
    )?;
    write(
        &dir.join("confidence.csv"),
        &report::table(report::CONFIDENCE_HEADER, &confidence_rows),
    )?;
    write(
        &dir.join("regions.csv"),
        &report::table(report::REGIONS_HEADER, &region_rows),
    )?;
    write(
        &dir.join("candidates.csv"),
        &report::table(report::CANDIDATES_HEADER, &candidate_rows),
    )?;
    write(
        &dir.join("summary.csv"),
        &report::table(report::SUMMARY_HEADER, &summary_rows),
    )?;
    write(&dir.join("adversarial.fasta"), &write_fasta(&adversarial))?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        fasta: absolute(&a.fasta),
        fasta_hash: format!("{:016x}", fnv1a64(&[fasta_text.as_bytes()])),
        oracle: a.oracle.clone(),
        oracle_tag: oracle.tag(),
        cache_dir: a.cache_dir.as_deref().map(absolute),
        oracle_timeout_s: a.oracle_timeout,
        max_distance: a.l,
        max_changes: a.h,
        mode: config.spec.mode.to_string(),
        matrix: config.spec.matrix.name().to_string(),
        samples: a.samples,
        objective: a.objective.to_string(),
        seed: a.seed,
        position_strategy: config.position_strategy.to_string(),
        align_cutoff: a.align_cutoff,
        align_cycles: a.align_cycles,
        align_rule: a.align_rule.to_string(),
        jobs: a.jobs,
        timing: a.timing,
        started_unix,
        finished_unix: unix_now(),
    };
    write(&dir.join(MANIFEST_FILE), &manifest.to_kv())?;
    writeln!(
        out,
        "attacked {} sequence(s), {failed} failed; tables in {}",
        sequences.len(),
        dir.display()
    )
    .map_err(|e| Error::io("stdout", e))?;
    Ok(if failed == 0 { 0 } else { 1 })
}

/// Reconstructs the attack arguments recorded in a manifest.
pub fn args_from_manifest(m: &RunManifest, out_dir: &Path) -> Result<AttackArgs> {
    if m.matrix != BlosumMatrix::blosum62().name() {
        return Err(Error::Config(format!(
            "manifest matrix '{}' is not supported",
            m.matrix
        )));
    }
    let confidence_strategy = match m.position_strategy.parse::<PositionStrategy>()? {
        PositionStrategy::Uniform => None,
        PositionStrategy::Confidence(c) => Some(c),
    };
    Ok(AttackArgs {
        fasta: m.fasta.clone(),
        out_dir: out_dir.to_path_buf(),
        l: m.max_distance,
        h: m.max_changes,
        samples: m.samples,
        seed: m.seed,
        oracle: m.oracle.clone(),
        oracle_timeout: m.oracle_timeout_s,
        cache_dir: m.cache_dir.clone(),
        align_cutoff: m.align_cutoff,
        align_cycles: m.align_cycles,
        align_rule: m.align_rule.parse()?,
        exact: m.mode.parse::<DistanceMode>()? == DistanceMode::Exact,
        confidence_strategy,
        objective: m.objective.parse()?,
        jobs: m.jobs,
        timing: m.timing,
    })
}

pub fn cmd_replay(
    manifest: &Path,
    out_dir: &Path,
    jobs: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32> {
    let m = RunManifest::parse(&read(manifest)?)?;
    let mut args = args_from_manifest(&m, out_dir)?;
    if let Some(j) = jobs {
        args.jobs = j;
    }
    let hash = format!("{:016x}", fnv1a64(&[read(&args.fasta)?.as_bytes()]));
    if hash != m.fasta_hash {
        return Err(Error::Config(format!(
            "{} changed since the recorded run",
            args.fasta.display()
        )));
    }
    let oracle_tag = build_oracle(&args.oracle, args.oracle_timeout, None)?.tag();
    if oracle_tag != m.oracle_tag {
        return Err(Error::Config(format!(
            "oracle tag '{oracle_tag}' differs from recorded '{}'",
            m.oracle_tag
        )));
    }
    cmd_attack(&args, out)
}

pub fn cmd_metrics(m: &MetricsArgs, out: &mut dyn Write) -> Result<i32> {
    let target = parse_pdb_ca(&read(&m.target)?)?;
    let mobile = parse_pdb_ca(&read(&m.mobile)?)?;
    let params = AlignParams {
        cutoff: m.align_cutoff,
        max_cycles: m.align_cycles,
        rule: m.align_rule,
    };
    let sup = superpose(&target, &mobile, &params)?;
    let aligned = mobile.transformed(&sup.transform);
    let rmsd_all = rmsd(&target, &aligned)?;
    let ts = gdt(&target, &aligned, &GdtMode::TS)?;
    let ha = gdt(&target, &aligned, &GdtMode::HA)?;
    let text = if m.kv {
        format!(
            "n={}\nkept={}\ncycles={}\nrmsd_all={}\nrmsd_kept={}\ngdt_ts={}\ngdt_ha={}\n",
            target.len(),
            sup.kept.len(),
            sup.cycles_used,
            rmsd_all,
            sup.rmsd_kept,
            ts,
            ha
        )
    } else {
        format!(
            "residues:    {}\nkept:        {}\ncycles:      {}\nRMSD (all):  {} A\nRMSD (kept): {} A\nGDT-TS:      {} %\nGDT-HA:      {} %\n",
            target.len(),
            sup.kept.len(),
            sup.cycles_used,
            report::fmt4(rmsd_all),
            report::fmt4(sup.rmsd_kept),
            report::fmt4(100.0 * ts),
            report::fmt4(100.0 * ha)
        )
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("stdout", e))?;
    Ok(0)
}

pub fn cmd_reduce(graph: &Path, k: usize, out: &mut dyn Write) -> Result<i32> {
    let g = Graph::parse(&read(graph)?)?;
    let instance = reduce_clique_to_paa(&g, k)?;
    let paa = paa_feasible_exhaustive(&instance, DEFAULT_SEARCH_CAP)?;
    let clique = clique_exists_bruteforce(&g, k, DEFAULT_SEARCH_CAP)?;
    let verdict = |b: bool| if b { "feasible" } else { "infeasible" };
    let mut text = format!(
        "n={} edges={} k={k}\nL={}\nU={}\nattack: {}\n",
        g.n_vertices(),
        g.n_edges(),
        instance.l_bound,
        instance.u_bound,
        verdict(paa.feasible)
    );
    if let Some(w) = &paa.witness {
        text.push_str(&format!(
            "witness={} dseq={} dstruct={}\n",
            w.residue_string(),
            instance.seq_distance(w)?,
            instance.structural_distance(w)?
        ));
    }
    text.push_str(&format!("clique: {}\n", verdict(clique)));
    let agrees = paa.feasible == clique;
    text.push_str(&format!(
        "{}, {}\n",
        verdict(paa.feasible),
        if agrees { "agrees" } else { "DISAGREES" }
    ));
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("stdout", e))?;
    Ok(if agrees { 0 } else { 2 })
}

pub fn cmd_neighborhood(a: &NeighborhoodArgs, out: &mut dyn Write) -> Result<i32> {
    let sequences = parse_fasta(&read(&a.fasta)?)?;
    let spec = spec_from(a.l, a.h, a.exact);
    let mut records = Vec::new();
    for s in &sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        for t in sample_batch(s, &spec, a.count, &mut rng)? {
            let header = format!(
                "{} dseq={} dham={}",
                t.id(),
                seq_distance(s, &t, &spec.matrix)?,
                hamming(s, &t)?
            );
            records.push(t.with_id(header));
        }
    }
    out.write_all(write_fasta(&records).as_bytes())
        .map_err(|e| Error::io("stdout", e))?;
    Ok(0)
}
