//! CSV tables and run manifests.
//!
//! Per-protein tables use 4-decimal fixed point. `candidates.csv` keeps
//! shortest round-trip floats so every derived column can be recomputed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::attack::{AttackResult, AttackSummary, ConfidenceStats};
use crate::error::{Error, Result};
use crate::structures::ConfidenceRegion;

pub const ATTACK_HEADER: &str = "id,n,similarity_pct,rmsd_A,avg_rmsd_A,gdt_ts_pct,avg_gdt_ts_pct,gdt_ha_pct,avg_gdt_ha_pct,runtime_s,status";
pub const CONFIDENCE_HEADER: &str = "id,orig_mean_all,orig_std_all,orig_mean_diff,orig_std_diff,adv_mean_all,adv_std_all,adv_mean_diff,adv_std_diff";
pub const REGIONS_HEADER: &str =
    "id,n,r1_gdt_ts_pct,r1_pct,r2_gdt_ts_pct,r2_pct,r3_gdt_ts_pct,r3_pct,r4_gdt_ts_pct,r4_pct";
pub const CANDIDATES_HEADER: &str = "protein_id,index,candidate_id,sequence,changed_positions,rmsd_all,rmsd_kept,gdt_ts,gdt_ha,objective,best";
pub const SUMMARY_HEADER: &str = "proteins,n_mean,n_std,confidence_mean,confidence_std,rmsd_mean_A,rmsd_std_A,gdt_ts_mean_pct,gdt_ts_std_pct,runtime_mean_s,runtime_std_s";

const MISSING: &str = "NA";

/// Fixed point with 4 decimals; negative zero prints as zero.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn opt4(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_else(|| MISSING.to_string())
}

/// Quotes a field when it contains a separator, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Splits one CSV line, honoring double-quoted fields.
pub fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn attack_row(r: &AttackResult, timing: bool) -> String {
    let best = r.best();
    let runtime = if timing {
        fmt4(r.total_seconds)
    } else {
        MISSING.to_string()
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},ok",
        csv_field(r.original.id()),
        r.original.len(),
        fmt4(r.similarity_percent),
        fmt4(best.rmsd_all),
        fmt4(r.avg_rmsd),
        fmt4(100.0 * best.gdt_ts),
        fmt4(100.0 * r.avg_gdt_ts),
        fmt4(100.0 * best.gdt_ha),
        fmt4(100.0 * r.avg_gdt_ha),
        runtime,
    )
}

/// Row for a sequence whose attack failed; the message goes to the log.
pub fn failed_attack_row(id: &str, n: usize) -> String {
    let na = [MISSING; 8].join(",");
    format!("{},{n},{na},failed", csv_field(id))
}

fn confidence_cells(c: &ConfidenceStats) -> String {
    format!(
        "{},{},{},{}",
        fmt4(c.mean_all),
        fmt4(c.std_all),
        opt4(c.mean_diff),
        opt4(c.std_diff)
    )
}

pub fn confidence_row(r: &AttackResult) -> String {
    format!(
        "{},{},{}",
        csv_field(r.original.id()),
        confidence_cells(&r.original_confidence),
        confidence_cells(&r.adversarial_confidence)
    )
}

pub fn regions_row(r: &AttackResult) -> String {
    let mut row = format!("{},{}", csv_field(r.original.id()), r.original.len());
    for region in ConfidenceRegion::ALL {
        match &r.gdt_regions[region.index()] {
            Some(g) => write!(row, ",{},{}", fmt4(100.0 * g.gdt), fmt4(100.0 * g.weight)),
            None => write!(row, ",{MISSING},{}", fmt4(0.0)),
        }
        .expect("write to String");
    }
    row
}

/// One line per candidate, in evaluation order.
pub fn candidate_rows(r: &AttackResult) -> Vec<String> {
    r.candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let positions = c
                .changed_positions
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(";");
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(r.original.id()),
                i,
                csv_field(c.sequence.id()),
                c.sequence.residue_string(),
                positions,
                c.rmsd_all,
                c.rmsd_kept,
                c.gdt_ts,
                c.gdt_ha,
                c.objective,
                u8::from(i == r.best_index),
            )
        })
        .collect()
}

pub fn summary_row(s: &AttackSummary, timing: bool) -> String {
    let (rt_mean, rt_std) = if timing {
        (fmt4(s.seconds.mean), fmt4(s.seconds.std))
    } else {
        (MISSING.to_string(), MISSING.to_string())
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        s.count,
        fmt4(s.n.mean),
        fmt4(s.n.std),
        fmt4(s.mean_confidence.mean),
        fmt4(s.mean_confidence.std),
        fmt4(s.rmsd.mean),
        fmt4(s.rmsd.std),
        fmt4(100.0 * s.gdt_ts.mean),
        fmt4(100.0 * s.gdt_ts.std),
        rt_mean,
        rt_std,
    )
}

/// A header line plus rows, each terminated by `\n`.
pub fn table(header: &str, rows: &[String]) -> String {
    let mut out =
        String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

/// Everything needed to rerun an attack invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub fasta: PathBuf,
    /// FNV-1a 64 of the FASTA bytes, hex.
    pub fasta_hash: String,
    /// `mock` or `cmd:<template>`.
    pub oracle: String,
    pub oracle_tag: String,
    pub cache_dir: Option<PathBuf>,
    pub oracle_timeout_s: Option<u64>,
    pub max_distance: u32,
    pub max_changes: usize,
    pub mode: String,
    pub matrix: String,
    pub samples: usize,
    pub objective: String,
    pub seed: u64,
    pub position_strategy: String,
    pub align_cutoff: f64,
    pub align_cycles: usize,
    pub align_rule: String,
    pub jobs: usize,
    pub timing: bool,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

impl RunManifest {
    pub fn to_kv(&self) -> String {
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let pairs: Vec<(&str, String)> = vec![
            ("version", self.version.clone()),
            ("fasta", self.fasta.display().to_string()),
            ("fasta_hash", self.fasta_hash.clone()),
            ("oracle", self.oracle.clone()),
            ("oracle_tag", self.oracle_tag.clone()),
            ("cache_dir", opt(&self.cache_dir)),
            (
                "oracle_timeout_s",
                self.oracle_timeout_s
                    .map(|t| t.to_string())
                    .unwrap_or_default(),
            ),
            ("L", self.max_distance.to_string()),
            ("H", self.max_changes.to_string()),
            ("mode", self.mode.clone()),
            ("matrix", self.matrix.clone()),
            ("samples", self.samples.to_string()),
            ("objective", self.objective.clone()),
            ("seed", self.seed.to_string()),
            ("position_strategy", self.position_strategy.clone()),
            ("align_cutoff", self.align_cutoff.to_string()),
            ("align_cycles", self.align_cycles.to_string()),
            ("align_rule", self.align_rule.clone()),
            ("jobs", self.jobs.to_string()),
            ("timing", self.timing.to_string()),
            ("started_unix", self.started_unix.to_string()),
            ("finished_unix", self.finished_unix.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            writeln!(out, "{k}={}", escape(&v)).expect("write to String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("manifest line {}: expected key=value", i + 1))
            })?;
            map.insert(k.trim().to_string(), unescape(v));
        }
        let get = |k: &str| -> Result<String> {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("manifest is missing '{k}'")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("manifest '{k}': bad value '{v}'")))
        }
        let optional =
            |k: &str| -> Result<Option<String>> { Ok(Some(get(k)?).filter(|v| !v.is_empty())) };
        Ok(RunManifest {
            version: get("version")?,
            fasta: PathBuf::from(get("fasta")?),
            fasta_hash: get("fasta_hash")?,
            oracle: get("oracle")?,
            oracle_tag: get("oracle_tag")?,
            cache_dir: optional("cache_dir")?.map(PathBuf::from),
            oracle_timeout_s: optional("oracle_timeout_s")?
                .map(|v| num("oracle_timeout_s", v))
                .transpose()?,
            max_distance: num("L", get("L")?)?,
            max_changes: num("H", get("H")?)?,
            mode: get("mode")?,
            matrix: get("matrix")?,
            samples: num("samples", get("samples")?)?,
            objective: get("objective")?,
            seed: num("seed", get("seed")?)?,
            position_strategy: get("position_strategy")?,
            align_cutoff: num("align_cutoff", get("align_cutoff")?)?,
            align_cycles: num("align_cycles", get("align_cycles")?)?,
            align_rule: get("align_rule")?,
            jobs: num("jobs", get("jobs")?)?,
            timing: num("timing", get("timing")?)?,
            started_unix: num("started_unix", get("started_unix")?)?,
            finished_unix: num("finished_unix", get("finished_unix")?)?,
        })
    }
}
