//! Folding oracles: anything that maps a sequence to a predicted Cα
//! structure with per-residue confidence.
//!
//! [`MockFolder`] is a deterministic stand-in for offline work,
//! [`SubprocessOracle`] drives an external predictor through files, and
//! [`CachedOracle`] memoizes any oracle on disk.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::sequences::{write_fasta, Sequence};
use crate::structures::{parse_pdb_ca, write_pdb, Structure, Vec3};

/// A black-box sequence-to-structure predictor.
///
/// Implementations must be deterministic (the same sequence folds to the
/// same structure, bit for bit), return one residue per input residue with
/// confidence populated, and use the sequence id as the structure id.
pub trait FoldingOracle: Send + Sync {
    fn fold(&self, seq: &Sequence) -> Result<Structure>;

    /// Identity used in cache keys and run manifests.
    fn tag(&self) -> String;

    /// Whether concurrent `fold` calls are permitted.
    fn reentrant(&self) -> bool {
        false
    }
}

impl<T: FoldingOracle + ?Sized> FoldingOracle for Box<T> {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        (**self).fold(seq)
    }
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn reentrant(&self) -> bool {
        (**self).reentrant()
    }
}

impl<T: FoldingOracle + ?Sized> FoldingOracle for Arc<T> {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        (**self).fold(seq)
    }
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn reentrant(&self) -> bool {
        (**self).reentrant()
    }
}

/// Checks the oracle contract on the given sequences: determinism, length
/// preservation, confidence present.
pub fn check_conformance(oracle: &dyn FoldingOracle, seqs: &[Sequence]) -> Result<()> {
    for seq in seqs {
        let first = oracle.fold(seq)?;
        let second = oracle.fold(seq)?;
        if first.len() != seq.len() {
            return Err(Error::Conformance(format!(
                "'{}': {} residues folded into {}",
                seq.id(),
                seq.len(),
                first.len()
            )));
        }
        if first.plddt().is_none() {
            return Err(Error::Conformance(format!(
                "'{}': no confidence values",
                seq.id()
            )));
        }
        let same_bits = first.ca().len() == second.ca().len()
            && first.ca().iter().zip(second.ca()).all(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            })
            && first
                .plddt()
                .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                == second
                    .plddt()
                    .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if !same_bits {
            return Err(Error::Conformance(format!(
                "'{}': repeated folds differ",
                seq.id()
            )));
        }
    }
    Ok(())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(chunks: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for chunk in chunks {
        for &b in *chunk {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Murmur3 finalizer; spreads FNV's weak low bits across the word.
fn avalanche(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

const MOCK_SEED: &[u8] = b"foldattack-mock-v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockFolderParams {
    /// Residues on each side that influence a position.
    pub window_radius: usize,
    /// Maximum displacement per axis, Å.
    pub amplitude: f64,
    /// Helix rise per residue, Å.
    pub rise: f64,
    /// Helix radius, Å.
    pub radius: f64,
    /// Helix turn per residue, degrees.
    pub turn_degrees: f64,
}

impl Default for MockFolderParams {
    fn default() -> Self {
        MockFolderParams {
            window_radius: 4,
            amplitude: 3.0,
            rise: 1.5,
            radius: 2.3,
            turn_degrees: 100.0,
        }
    }
}

fn quantize(v: f64, scale: f64) -> f64 {
    (v * scale).round() / scale
}

/// Deterministic folder with strictly local sequence dependence.
///
/// Residue `i` sits on an ideal helix, displaced by up to `amplitude` Å per
/// axis according to a hash of `i` and the residues within `window_radius`
/// of it; confidence is `30 + 70 * u` from the same hash. Changing residue
/// `j` therefore moves only residues with `|i - j| <= window_radius`.
/// Coordinates are rounded to 0.001 Å and confidences to 0.01, so output
/// survives a PDB round trip unchanged.
#[derive(Debug, Clone, Default)]
pub struct MockFolder {
    pub params: MockFolderParams,
}

impl MockFolder {
    pub fn new(params: MockFolderParams) -> Result<Self> {
        if !(params.amplitude.is_finite() && params.amplitude >= 0.0) {
            return Err(Error::Config(format!(
                "mock amplitude must be non-negative, got {}",
                params.amplitude
            )));
        }
        Ok(MockFolder { params })
    }
}

/// Folds `seq` with the given mock parameters.
pub fn mock_fold(seq: &Sequence, params: &MockFolderParams) -> Structure {
    let n = seq.len();
    let w = params.window_radius;
    let codes = seq.residue_string().into_bytes();
    let omega = params.turn_degrees.to_radians();
    let unit = |bits: u64| (bits & 0xffff) as f64 / 65535.0;

    let mut ca = Vec::with_capacity(n);
    let mut plddt = Vec::with_capacity(n);
    for i in 0..n {
        let window = &codes[i.saturating_sub(w)..=(i + w).min(n - 1)];
        let h = avalanche(fnv1a64(&[MOCK_SEED, &(i as u64).to_le_bytes(), window]));
        let offset = Vec3::new(unit(h), unit(h >> 16), unit(h >> 32))
            .map(|u| params.amplitude * (2.0 * u - 1.0));
        let t = i as f64;
        let base = Vec3::new(
            params.radius * (omega * t).cos(),
            params.radius * (omega * t).sin(),
            params.rise * t,
        );
        ca.push((base + offset).map(|c| quantize(c, 1000.0)));
        let frac = (h >> 48) as f64 / 65536.0;
        plddt.push(quantize(30.0 + 70.0 * frac, 100.0));
    }
    Structure::new(seq.id(), ca, Some(plddt)).expect("mock output is well-formed")
}

impl FoldingOracle for MockFolder {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        Ok(mock_fold(seq, &self.params))
    }

    fn tag(&self) -> String {
        let p = &self.params;
        format!(
            "mock:w={}:a={}:rise={}:r={}:turn={}",
            p.window_radius, p.amplitude, p.rise, p.radius, p.turn_degrees
        )
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// Runs an external predictor per sequence.
///
/// The command template is run through `sh -c` after substituting `{fasta}`
/// (input path, written by the adapter) and `{out}` (PDB path the command
/// must create). Exit status 0 signals success.
#[derive(Debug)]
pub struct SubprocessOracle {
    template: String,
    workdir: PathBuf,
    timeout: Option<Duration>,
    reentrant: bool,
    counter: AtomicU64,
}

impl SubprocessOracle {
    pub fn new(template: impl Into<String>, workdir: impl Into<PathBuf>) -> Result<Self> {
        let template = template.into();
        for placeholder in ["{fasta}", "{out}"] {
            if !template.contains(placeholder) {
                return Err(Error::Config(format!(
                    "command template lacks the {placeholder} placeholder"
                )));
            }
        }
        let workdir = workdir.into();
        std::fs::create_dir_all(&workdir).map_err(|e| Error::io(&workdir, e))?;
        Ok(SubprocessOracle {
            template,
            workdir,
            timeout: None,
            reentrant: false,
            counter: AtomicU64::new(0),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    /// Declares that the external tool tolerates concurrent invocations.
    pub fn with_reentrant(mut self, reentrant: bool) -> Self {
        self.reentrant = reentrant;
        self
    }

    fn run(&self, command: &str) -> Result<()> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io("sh", e))?;

        let drain = |mut pipe: Box<dyn Read + Send>| {
            thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = pipe.read_to_end(&mut buf);
                buf
            })
        };
        let stdout = drain(Box::new(child.stdout.take().expect("piped stdout")));
        let stderr = drain(Box::new(child.stderr.take().expect("piped stderr")));

        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait().map_err(|e| Error::io("sh", e))? {
                break status;
            }
            if let Some(limit) = self.timeout {
                if started.elapsed() > limit {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::FoldTimeout(limit));
                }
            }
            thread::sleep(Duration::from_millis(5));
        };

        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();
        if !status.success() {
            let mut diagnostics = String::from_utf8_lossy(&out).into_owned();
            diagnostics.push_str(&String::from_utf8_lossy(&err));
            let diagnostics = diagnostics.trim();
            let tail_start = diagnostics
                .char_indices()
                .rev()
                .nth(4000)
                .map_or(0, |(i, _)| i);
            return Err(Error::FoldCommand {
                status: status.to_string(),
                diagnostics: diagnostics[tail_start..].to_string(),
            });
        }
        Ok(())
    }
}

impl FoldingOracle for SubprocessOracle {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        let stem = format!(
            "fold_{:016x}_{}_{}",
            fnv1a64(&[seq.residue_string().as_bytes()]),
            std::process::id(),
            self.counter.fetch_add(1, Ordering::Relaxed)
        );
        let fasta = self.workdir.join(format!("{stem}.fasta"));
        let out = self.workdir.join(format!("{stem}.pdb"));
        std::fs::write(&fasta, write_fasta(std::slice::from_ref(seq)))
            .map_err(|e| Error::io(&fasta, e))?;

        let command = self
            .template
            .replace("{fasta}", &fasta.to_string_lossy())
            .replace("{out}", &out.to_string_lossy());
        let result = self.run(&command).and_then(|()| {
            let text = std::fs::read_to_string(&out).map_err(|e| Error::io(&out, e))?;
            parse_pdb_ca(&text)
        });
        let _ = std::fs::remove_file(&fasta);
        let _ = std::fs::remove_file(&out);

        let structure = result?;
        if structure.len() != seq.len() {
            return Err(Error::FoldLength {
                expected: seq.len(),
                got: structure.len(),
            });
        }
        if structure.plddt().is_none() {
            return Err(Error::MissingConfidence);
        }
        Ok(structure.with_id(seq.id()))
    }

    fn tag(&self) -> String {
        format!("cmd:{}", self.template)
    }

    fn reentrant(&self) -> bool {
        self.reentrant
    }
}

/// Makes any oracle safe to share across threads by serializing its calls.
pub struct Serialized<O> {
    inner: O,
    lock: Mutex<()>,
}

impl<O: FoldingOracle> Serialized<O> {
    pub fn new(inner: O) -> Self {
        Serialized {
            inner,
            lock: Mutex::new(()),
        }
    }
}

impl<O: FoldingOracle> FoldingOracle for Serialized<O> {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        if self.inner.reentrant() {
            return self.inner.fold(seq);
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        self.inner.fold(seq)
    }

    fn tag(&self) -> String {
        self.inner.tag()
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// Persistent memoization of an oracle, one minimal PDB per sequence.
///
/// Entries are named by the hex FNV-1a key of the oracle tag and residue
/// string. Unreadable entries are refolded and overwritten.
pub struct CachedOracle<O> {
    inner: O,
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
    counter: AtomicU64,
    warnings: Mutex<Vec<String>>,
}

impl<O: FoldingOracle> CachedOracle<O> {
    pub fn new(inner: O, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let probe = dir.join(format!(".probe-{}", std::process::id()));
        std::fs::write(&probe, b"").map_err(|e| Error::io(&dir, e))?;
        let _ = std::fs::remove_file(&probe);
        Ok(CachedOracle {
            inner,
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            counter: AtomicU64::new(0),
            warnings: Mutex::new(Vec::new()),
        })
    }

    pub fn key(&self, seq: &Sequence) -> u64 {
        fnv1a64(&[
            self.inner.tag().as_bytes(),
            &[0],
            seq.residue_string().as_bytes(),
        ])
    }

    pub fn entry_path(&self, seq: &Sequence) -> PathBuf {
        self.dir.join(format!("{:016x}.pdb", self.key(seq)))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// Messages about corrupt entries that were refolded.
    pub fn warnings(&self) -> Vec<String> {
        self.warnings
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn load(path: &Path, seq: &Sequence) -> std::result::Result<Structure, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let s = parse_pdb_ca(&text).map_err(|e| e.to_string())?;
        if s.len() != seq.len() {
            return Err(format!(
                "{} residues cached for length {}",
                s.len(),
                seq.len()
            ));
        }
        if s.plddt().is_none() {
            return Err("cached entry lacks confidence values".into());
        }
        Ok(s.with_id(seq.id()))
    }
}

impl<O: FoldingOracle> FoldingOracle for CachedOracle<O> {
    fn fold(&self, seq: &Sequence) -> Result<Structure> {
        let path = self.entry_path(seq);
        if path.exists() {
            match Self::load(&path, seq) {
                Ok(s) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(s);
                }
                Err(why) => {
                    let msg = format!("corrupt cache entry {}: {why}; refolding", path.display());
                    log::warn!("{msg}");
                    self.warnings
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .push(msg);
                }
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let structure = self.inner.fold(seq)?;
        let names: Vec<&str> = seq.residues().iter().map(|aa| aa.three_letter()).collect();
        let text = write_pdb(&structure, Some(&names))?;
        let tmp = self.dir.join(format!(
            ".{:016x}.{}.{}.tmp",
            self.key(seq),
            std::process::id(),
            self.counter.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(structure)
    }

    fn tag(&self) -> String {
        self.inner.tag()
    }

    fn reentrant(&self) -> bool {
        self.inner.reentrant()
    }
}
