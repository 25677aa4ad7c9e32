//! Cα structures: PDB ingestion and emission, Kabsch superposition with
//! outlier-rejection cycles, RMSD and GDT.
//!
//! GDT compares the Euclidean Cα deviation (Å) against the cutoffs. The
//! squared deviation is only used inside RMSD.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Ordered Cα coordinates in Å with optional per-residue confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    id: String,
    ca: Vec<Vec3>,
    plddt: Option<Vec<f64>>,
}

#[allow(clippy::len_without_is_empty)]
impl Structure {
    pub fn new(id: impl Into<String>, ca: Vec<Vec3>, plddt: Option<Vec<f64>>) -> Result<Self> {
        if ca.is_empty() {
            return Err(Error::InvalidStructure("no residues".into()));
        }
        if let Some((i, _)) = ca
            .iter()
            .enumerate()
            .find(|(_, p)| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidStructure(format!(
                "non-finite coordinate at residue {i}"
            )));
        }
        if let Some(p) = &plddt {
            if p.len() != ca.len() {
                return Err(Error::InvalidStructure(format!(
                    "{} confidence values for {} residues",
                    p.len(),
                    ca.len()
                )));
            }
            if let Some(v) = p.iter().find(|v| !(0.0..=100.0).contains(*v)) {
                return Err(Error::InvalidStructure(format!(
                    "confidence {v} outside [0, 100]"
                )));
            }
        }
        Ok(Structure {
            id: id.into(),
            ca,
            plddt,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ca(&self) -> &[Vec3] {
        &self.ca
    }

    pub fn plddt(&self) -> Option<&[f64]> {
        self.plddt.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ca.len()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Copy of the structure with every coordinate moved by `transform`.
    pub fn transformed(&self, transform: &RigidTransform) -> Structure {
        Structure {
            id: self.id.clone(),
            ca: self.ca.iter().map(|p| transform.apply(p)).collect(),
            plddt: self.plddt.clone(),
        }
    }
}

/// Reads one Cα per residue from fixed-column ATOM records.
///
/// Only the first model is read. Alternate locations other than blank or
/// `A` are skipped. The B-factor column becomes the confidence vector when
/// every Cα carries one within `[0, 100]`; otherwise confidence is absent.
pub fn parse_pdb_ca(text: &str) -> Result<Structure> {
    let mut ca = Vec::new();
    let mut bfactors: Vec<Option<f64>> = Vec::new();
    let mut residues_seen: HashSet<(String, String, String)> = HashSet::new();
    let mut id = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.starts_with("HEADER") && id.is_empty() {
            id = line.get(62..66).unwrap_or("").trim().to_string();
            continue;
        }
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") {
            continue;
        }
        let field = |a: usize, b: usize| -> Result<&str> {
            line.get(a..b).ok_or_else(|| Error::Pdb {
                line: line_no,
                message: format!("record too short for columns {}-{}", a + 1, b),
            })
        };
        if field(12, 16)?.trim() != "CA" {
            continue;
        }
        let alt_loc = field(16, 17)?;
        if alt_loc != " " && alt_loc != "A" {
            continue;
        }
        let key = (
            field(21, 22)?.to_string(),
            field(22, 26)?.trim().to_string(),
            line.get(26..27).unwrap_or(" ").to_string(),
        );
        if !residues_seen.insert(key.clone()) {
            return Err(Error::Pdb {
                line: line_no,
                message: format!(
                    "duplicate CA for chain '{}' residue {}{}",
                    key.0,
                    key.1,
                    key.2.trim()
                ),
            });
        }
        let coord = |a: usize, b: usize, axis: &str| -> Result<f64> {
            let text = field(a, b)?.trim();
            text.parse::<f64>().map_err(|_| Error::Pdb {
                line: line_no,
                message: format!("malformed {axis} coordinate '{text}'"),
            })
        };
        let p = Vec3::new(
            coord(30, 38, "x")?,
            coord(38, 46, "y")?,
            coord(46, 54, "z")?,
        );
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::Pdb {
                line: line_no,
                message: "non-finite coordinate".into(),
            });
        }
        ca.push(p);
        bfactors.push(
            line.get(60..66)
                .and_then(|t| t.trim().parse::<f64>().ok())
                .filter(|b| (0.0..=100.0).contains(b)),
        );
    }

    if ca.is_empty() {
        return Err(Error::NoCaAtoms);
    }
    let plddt = bfactors.into_iter().collect::<Option<Vec<f64>>>();
    Structure::new(id, ca, plddt)
}

/// Emits a minimal PDB with one `CA` ATOM record per residue, coordinates
/// with three decimals and confidence in the B-factor column (0.00 when
/// absent). `residue_names` supplies three-letter names, default `UNK`.
pub fn write_pdb(structure: &Structure, residue_names: Option<&[&str]>) -> Result<String> {
    let n = structure.len();
    if n > 9999 {
        return Err(Error::PdbWrite(format!(
            "{n} residues exceed the 4-column residue number field"
        )));
    }
    if let Some(names) = residue_names {
        if names.len() != n {
            return Err(Error::PdbWrite("residue name count mismatch".into()));
        }
    }
    let mut out = String::with_capacity(81 * (n + 2));
    for (i, p) in structure.ca().iter().enumerate() {
        for c in p.iter() {
            if !(-999.9995..9999.9995).contains(c) {
                return Err(Error::PdbWrite(format!(
                    "coordinate {c} does not fit the 8.3 column format"
                )));
            }
        }
        let name = residue_names.map_or("UNK", |r| r[i]);
        let b = structure.plddt().map_or(0.0, |v| v[i]);
        writeln!(
            out,
            "ATOM  {:>5}  CA  {:>3} A{:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}           C",
            i + 1,
            name,
            i + 1,
            p.x,
            p.y,
            p.z,
            1.0,
            b
        )
        .expect("write to String");
    }
    out.push_str("TER\nEND\n");
    Ok(out)
}

/// `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

fn centroid<'a>(points: impl Iterator<Item = &'a Vec3>) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p;
        n += 1;
    }
    sum / n as f64
}

/// Least-squares proper rotation and translation taking `mobile[i]` onto
/// `target[i]` over the given index set.
fn kabsch_subset(target: &[Vec3], mobile: &[Vec3], idx: &[usize]) -> RigidTransform {
    let ct = centroid(idx.iter().map(|&i| &target[i]));
    let cm = centroid(idx.iter().map(|&i| &mobile[i]));
    let mut h = Matrix3::zeros();
    for &i in idx {
        h += (mobile[i] - cm) * (target[i] - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("U requested");
    let v = svd.v_t.expect("V^T requested").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if d < 0.0 { -1.0 } else { 1.0 }));
    let rotation = v * correction * u.transpose();
    RigidTransform {
        rotation,
        translation: ct - rotation * cm,
    }
}

/// Optimal superposition of `mobile` onto `target` over all pairs.
pub fn kabsch(target: &Structure, mobile: &Structure) -> Result<RigidTransform> {
    check_lengths(target, mobile)?;
    if target.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} residues, at least 3 required",
            target.len()
        )));
    }
    let all: Vec<usize> = (0..target.len()).collect();
    Ok(kabsch_subset(target.ca(), mobile.ca(), &all))
}

/// How outlier pairs are identified after each fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierRule {
    /// Drop pairs deviating more than `cutoff` times the current kept RMSD.
    Relative,
    /// Drop pairs deviating more than `cutoff` Å.
    Absolute,
}

impl std::fmt::Display for OutlierRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutlierRule::Relative => "relative",
            OutlierRule::Absolute => "absolute",
        })
    }
}

impl std::str::FromStr for OutlierRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(OutlierRule::Relative),
            "absolute" => Ok(OutlierRule::Absolute),
            other => Err(Error::Config(format!("unknown outlier rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignParams {
    pub cutoff: f64,
    pub max_cycles: usize,
    pub rule: OutlierRule,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            cutoff: 2.0,
            max_cycles: 5,
            rule: OutlierRule::Relative,
        }
    }
}

/// Result of [`superpose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    pub transform: RigidTransform,
    /// Residue indices surviving outlier rejection, ascending.
    pub kept: Vec<usize>,
    pub cycles_used: usize,
    pub rmsd_kept: f64,
    pub rmsd_all: f64,
    /// Kept-pair RMSD after the initial fit and after each refit.
    pub cycle_rmsds: Vec<f64>,
}

/// Below this kept RMSD (Å) the fit is exact to rounding and no pair is
/// treated as an outlier.
const EXACT_FIT_RMSD: f64 = 1e-9;

fn pair_deviations(target: &[Vec3], mobile: &[Vec3], t: &RigidTransform) -> Vec<f64> {
    target
        .iter()
        .zip(mobile)
        .map(|(a, b)| (a - t.apply(b)).norm())
        .collect()
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    (sum / n as f64).sqrt()
}

/// Superposes `mobile` onto the frame of `target`.
///
/// Cycle 0 fits all pairs. Each further cycle drops the kept pairs whose
/// deviation exceeds the rejection threshold and refits, stopping when
/// nothing is dropped or `max_cycles` refits have been made.
pub fn superpose(
    target: &Structure,
    mobile: &Structure,
    params: &AlignParams,
) -> Result<Superposition> {
    check_lengths(target, mobile)?;
    let n = target.len();
    if n < 3 {
        return Err(Error::DegenerateFit(format!(
            "{n} residues, at least 3 required"
        )));
    }
    if !(params.cutoff.is_finite() && params.cutoff > 0.0) {
        return Err(Error::Config(format!(
            "alignment cutoff must be positive, got {}",
            params.cutoff
        )));
    }
    let (t_ca, m_ca) = (target.ca(), mobile.ca());
    let mut kept: Vec<usize> = (0..n).collect();
    let mut transform = kabsch_subset(t_ca, m_ca, &kept);
    let mut deviations = pair_deviations(t_ca, m_ca, &transform);
    let mut rmsd_kept = rms(kept.iter().map(|&i| deviations[i]));
    let mut cycle_rmsds = vec![rmsd_kept];
    let mut cycles_used = 0;

    while cycles_used < params.max_cycles && rmsd_kept > EXACT_FIT_RMSD {
        let threshold = match params.rule {
            OutlierRule::Relative => params.cutoff * rmsd_kept,
            OutlierRule::Absolute => params.cutoff,
        };
        let next: Vec<usize> = kept
            .iter()
            .copied()
            .filter(|&i| deviations[i] <= threshold)
            .collect();
        if next.len() == kept.len() {
            break;
        }
        if next.len() < 3 {
            return Err(Error::DegenerateFit(format!(
                "outlier rejection left {} pairs",
                next.len()
            )));
        }
        kept = next;
        transform = kabsch_subset(t_ca, m_ca, &kept);
        deviations = pair_deviations(t_ca, m_ca, &transform);
        rmsd_kept = rms(kept.iter().map(|&i| deviations[i]));
        cycle_rmsds.push(rmsd_kept);
        cycles_used += 1;
    }

    Ok(Superposition {
        transform,
        kept,
        cycles_used,
        rmsd_kept,
        rmsd_all: rms(deviations.iter().copied()),
        cycle_rmsds,
    })
}

fn check_lengths(a: &Structure, b: &Structure) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// `sqrt(1/n * sum_i |a_i - b_i|^2)` with no superposition.
pub fn rmsd(target: &Structure, mobile_aligned: &Structure) -> Result<f64> {
    check_lengths(target, mobile_aligned)?;
    let sum: f64 = target
        .ca()
        .iter()
        .zip(mobile_aligned.ca())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok((sum / target.len() as f64).sqrt())
}

/// The four GDT distance cutoffs in Å.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdtMode {
    thresholds: [f64; 4],
}

impl GdtMode {
    /// Total score: 1, 2, 4, 8 Å.
    pub const TS: GdtMode = GdtMode {
        thresholds: [1.0, 2.0, 4.0, 8.0],
    };
    /// High accuracy: 0.5, 1, 2, 4 Å.
    pub const HA: GdtMode = GdtMode {
        thresholds: [0.5, 1.0, 2.0, 4.0],
    };

    pub fn new(thresholds: [f64; 4]) -> Result<Self> {
        let positive = thresholds.iter().all(|t| t.is_finite() && *t > 0.0);
        let increasing = thresholds.windows(2).all(|w| w[0] < w[1]);
        if !(positive && increasing) {
            return Err(Error::Config(format!(
                "GDT thresholds must be positive and strictly increasing: {thresholds:?}"
            )));
        }
        Ok(GdtMode { thresholds })
    }

    pub fn thresholds(&self) -> [f64; 4] {
        self.thresholds
    }
}

fn gdt_counts(deviations: impl Iterator<Item = f64>, mode: &GdtMode) -> (usize, usize) {
    let mut hits = 0;
    let mut n = 0;
    for d in deviations {
        n += 1;
        hits += mode.thresholds.iter().filter(|&&t| d < t).count();
    }
    (hits, n)
}

fn deviations<'a>(a: &'a Structure, b: &'a Structure) -> impl Iterator<Item = f64> + 'a {
    a.ca().iter().zip(b.ca()).map(|(p, q)| (p - q).norm())
}

/// Fraction of (residue, cutoff) pairs with deviation strictly below the
/// cutoff, in `[0, 1]`.
pub fn gdt(target: &Structure, mobile_aligned: &Structure, mode: &GdtMode) -> Result<f64> {
    check_lengths(target, mobile_aligned)?;
    let (hits, n) = gdt_counts(deviations(target, mobile_aligned), mode);
    Ok(hits as f64 / (4 * n) as f64)
}

/// Confidence regions R1 (90, 100], R2 (70, 90], R3 (50, 70], R4 [0, 50].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceRegion {
    R1,
    R2,
    R3,
    R4,
}

impl ConfidenceRegion {
    pub const ALL: [ConfidenceRegion; 4] = [
        ConfidenceRegion::R1,
        ConfidenceRegion::R2,
        ConfidenceRegion::R3,
        ConfidenceRegion::R4,
    ];

    pub fn of(plddt: f64) -> Self {
        if plddt > 90.0 {
            ConfidenceRegion::R1
        } else if plddt > 70.0 {
            ConfidenceRegion::R2
        } else if plddt > 50.0 {
            ConfidenceRegion::R3
        } else {
            ConfidenceRegion::R4
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionGdt {
    pub gdt: f64,
    /// Region size over total residue count.
    pub weight: f64,
}

/// GDT restricted to each confidence region of the target. Empty regions
/// are `None`.
pub fn gdt_by_confidence_region(
    target: &Structure,
    mobile_aligned: &Structure,
    mode: &GdtMode,
) -> Result<[Option<RegionGdt>; 4]> {
    check_lengths(target, mobile_aligned)?;
    let plddt = target.plddt().ok_or(Error::MissingConfidence)?;
    let n = target.len() as f64;
    let devs: Vec<f64> = deviations(target, mobile_aligned).collect();
    let mut out = [None; 4];
    for region in ConfidenceRegion::ALL {
        let members = devs
            .iter()
            .zip(plddt)
            .filter(|(_, &p)| ConfidenceRegion::of(p) == region)
            .map(|(&d, _)| d);
        let (hits, size) = gdt_counts(members, mode);
        if size > 0 {
            out[region.index()] = Some(RegionGdt {
                gdt: hits as f64 / (4 * size) as f64,
                weight: size as f64 / n,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn structure(points: &[[f64; 3]]) -> Structure {
        Structure::new("t", points.iter().map(|p| Vec3::from(*p)).collect(), None).unwrap()
    }

    fn random_structure(rng: &mut ChaCha8Rng, n: usize) -> Structure {
        let ca = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                )
            })
            .collect();
        Structure::new("r", ca, None).unwrap()
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Unit::new_normalize(Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::TAU)).into_inner()
    }

    const PDB: &str = "\
HEADER    TEST                                    01-JAN-00   1ABC
ATOM      1  N   MET A   1      -1.000   0.000   0.000  1.00 94.70           N
ATOM      2  CA  MET A   1       0.000   0.000   0.000  1.00 94.70           C
ATOM      3  CA AGLY A   2       1.000   0.000   0.000  0.50 88.20           C
ATOM      4  CA BGLY A   2       1.500   0.500   0.000  0.50 88.20           C
HETATM    5 CA    CA A 101       9.000   9.000   9.000  1.00 20.00          CA
ATOM      6  CA  LYS B   1       2.000   1.000  -3.250  1.00 41.05           C
ENDMDL
MODEL        2
ATOM      7  CA  LYS B   2       5.000   5.000   5.000  1.00 41.05           C
";

    #[test]
    fn parses_first_model_ca_with_altloc_rule() {
        let s = parse_pdb_ca(PDB).unwrap();
        assert_eq!(s.id(), "1ABC");
        assert_eq!(s.len(), 3);
        assert_eq!(s.ca()[0], Vec3::new(0.0, 0.0, 0.0));
        assert_eq!(s.ca()[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(s.ca()[2], Vec3::new(2.0, 1.0, -3.25));
        assert_eq!(s.plddt().unwrap(), &[94.7, 88.2, 41.05]);
    }

    #[test]
    fn pdb_errors() {
        assert!(matches!(
            parse_pdb_ca("HEADER\nEND\n"),
            Err(Error::NoCaAtoms)
        ));
        let bad =
            "ATOM      2  CA  MET A   1       0.0x0   0.000   0.000  1.00 94.70           C\n";
        assert!(matches!(parse_pdb_ca(bad), Err(Error::Pdb { line: 1, .. })));
        let dup = "\
ATOM      2  CA  MET A   1       0.000   0.000   0.000  1.00 94.70           C
ATOM      3  CA  MET A   1       1.000   0.000   0.000  1.00 94.70           C
";
        let err = parse_pdb_ca(dup).unwrap_err();
        assert!(matches!(err, Error::Pdb { line: 2, .. }), "{err}");
    }

    #[test]
    fn experimental_bfactors_do_not_become_confidence() {
        let text = "\
ATOM      2  CA  MET A   1       0.000   0.000   0.000  1.00 94.70           C
ATOM      3  CA  GLY A   2       1.000   0.000   0.000  1.00120.50           C
";
        let s = parse_pdb_ca(text).unwrap();
        assert!(s.plddt().is_none());
    }

    #[test]
    fn pdb_write_round_trip() {
        let s = Structure::new(
            "",
            vec![
                Vec3::new(1.25, -3.5, 100.125),
                Vec3::new(-999.5, 0.001, 12.0),
            ],
            Some(vec![99.99, 30.0]),
        )
        .unwrap();
        let text = write_pdb(&s, None).unwrap();
        assert_eq!(parse_pdb_ca(&text).unwrap(), s);
        for line in text.lines().filter(|l| l.starts_with("ATOM")) {
            assert_eq!(line.len(), 78);
        }
    }

    #[test]
    fn structure_invariants() {
        assert!(Structure::new("x", vec![], None).is_err());
        assert!(Structure::new("x", vec![Vec3::new(f64::NAN, 0.0, 0.0)], None).is_err());
        assert!(Structure::new("x", vec![Vec3::zeros()], Some(vec![1.0, 2.0])).is_err());
        assert!(Structure::new("x", vec![Vec3::zeros()], Some(vec![101.0])).is_err());
    }

    #[test]
    fn identity_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_structure(&mut rng, 30);
        let sup = superpose(&a, &a, &AlignParams::default()).unwrap();
        assert!((sup.transform.rotation - Matrix3::identity()).norm() < 1e-9);
        assert!(sup.transform.translation.norm() < 1e-9);
        assert!(sup.rmsd_all < 1e-12);
        assert_eq!(sup.kept.len(), 30);
    }

    #[test]
    fn recovers_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3, 4, 10, 77] {
            let a = random_structure(&mut rng, n);
            let t = RigidTransform {
                rotation: random_rotation(&mut rng),
                translation: Vec3::new(5.0, -40.0, 13.0),
            };
            let b = a.transformed(&t);
            let sup = superpose(&a, &b, &AlignParams::default()).unwrap();
            assert!(sup.rmsd_all < 1e-6, "n={n} rmsd={}", sup.rmsd_all);
            let aligned = b.transformed(&sup.transform);
            assert!(rmsd(&a, &aligned).unwrap() < 1e-6);
            assert_eq!(gdt(&a, &aligned, &GdtMode::TS).unwrap(), 1.0);
        }
    }

    #[test]
    fn planar_points_get_proper_rotation() {
        // coplanar target, mirrored mobile: the unconstrained optimum is a reflection
        let a = structure(&[
            [0.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [1.0, 1.0, 0.0],
            [2.5, 4.0, 0.0],
        ]);
        let mirrored = structure(&[
            [0.0, 0.0, 0.0],
            [-3.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [-1.0, 1.0, 0.0],
            [-2.5, 4.0, 0.0],
        ]);
        let t = kabsch(&a, &mirrored).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!((t.rotation.transpose() * t.rotation - Matrix3::identity()).norm() < 1e-9);
        // a planar set can be matched by a proper rotation (flip about the y axis)
        let aligned = mirrored.transformed(&t);
        assert!(rmsd(&a, &aligned).unwrap() < 1e-9);

        // non-planar chiral mirror image: a proper rotation cannot fit it exactly
        let c = structure(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 3.0],
        ]);
        let c_mirror = structure(&[
            [0.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 3.0],
        ]);
        let t = kabsch(&c, &c_mirror).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!(rmsd(&c, &c_mirror.transformed(&t)).unwrap() > 0.1);
    }

    #[test]
    fn too_few_residues() {
        let a = structure(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(matches!(
            superpose(&a, &a, &AlignParams::default()),
            Err(Error::DegenerateFit(_))
        ));
        let b = structure(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(matches!(
            superpose(&a, &b, &AlignParams::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn outlier_cycles_drop_a_displaced_residue() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_structure(&mut rng, 40);
        let mut moved: Vec<Vec3> = a
            .ca()
            .iter()
            .map(|p| {
                p + Vec3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                )
            })
            .collect();
        moved[7] += Vec3::new(15.0, 0.0, 0.0);
        let b = Structure::new("b", moved, None).unwrap();

        let plain = superpose(
            &a,
            &b,
            &AlignParams {
                max_cycles: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(plain.cycles_used, 0);
        assert_eq!(plain.kept.len(), 40);

        let sup = superpose(&a, &b, &AlignParams::default()).unwrap();
        assert!(!sup.kept.contains(&7));
        assert!(sup.cycles_used >= 1);
        assert!(sup.rmsd_kept < 0.5);
        assert!(sup.rmsd_all > sup.rmsd_kept);
        for w in sup.cycle_rmsds.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }

        let abs = superpose(
            &a,
            &b,
            &AlignParams {
                cutoff: 2.0,
                max_cycles: 5,
                rule: OutlierRule::Absolute,
            },
        )
        .unwrap();
        assert!(!abs.kept.contains(&7));
        let err = superpose(
            &a,
            &b,
            &AlignParams {
                cutoff: 1e-6,
                max_cycles: 5,
                rule: OutlierRule::Absolute,
            },
        );
        assert!(matches!(err, Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn rmsd_cases() {
        let a = structure(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [4.0, 4.0, 4.0]]);
        assert_eq!(rmsd(&a, &a).unwrap(), 0.0);
        let shifted = structure(&[[2.0, 0.0, 0.0], [1.0, 4.0, 3.0], [4.0, 4.0, 2.0]]);
        assert!((rmsd(&a, &shifted).unwrap() - 2.0).abs() < 1e-15);
        assert!(rmsd(&a, &structure(&[[0.0; 3]])).is_err());
    }

    #[test]
    fn rmsd_matches_per_coordinate_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_structure(&mut rng, 10);
        let b = random_structure(&mut rng, 10);
        let mut sum = 0.0;
        for i in 0..10 {
            for k in 0..3 {
                let d = a.ca()[i][k] - b.ca()[i][k];
                sum += d * d;
            }
        }
        assert!((rmsd(&a, &b).unwrap() - (sum / 10.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gdt_cases() {
        let a = structure(&[
            [0.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [0.0, 0.0, 10.0],
        ]);
        assert_eq!(gdt(&a, &a, &GdtMode::TS).unwrap(), 1.0);
        assert_eq!(gdt(&a, &a, &GdtMode::HA).unwrap(), 1.0);
        let shifted = a.transformed(&RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::new(0.0, 3.0, 0.0),
        });
        assert_eq!(gdt(&a, &shifted, &GdtMode::TS).unwrap(), 0.5);
        assert_eq!(gdt(&a, &shifted, &GdtMode::HA).unwrap(), 0.25);
        // deviation exactly on a cutoff does not count
        let on_cutoff = a.transformed(&RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::new(2.0, 0.0, 0.0),
        });
        assert_eq!(gdt(&a, &on_cutoff, &GdtMode::TS).unwrap(), 0.5);
    }

    #[test]
    fn gdt_mode_validation() {
        assert_eq!(GdtMode::TS.thresholds(), [1.0, 2.0, 4.0, 8.0]);
        assert_eq!(GdtMode::HA.thresholds(), [0.5, 1.0, 2.0, 4.0]);
        assert!(GdtMode::new([1.0, 1.0, 2.0, 3.0]).is_err());
        assert!(GdtMode::new([0.0, 1.0, 2.0, 3.0]).is_err());
        assert!(GdtMode::new([0.1, 1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn regions_match_hand_filtered_oracle() {
        let target = Structure::new(
            "t",
            (0..4)
                .map(|i| Vec3::new(10.0 * i as f64, 0.0, 0.0))
                .collect(),
            Some(vec![95.0, 80.0, 60.0, 40.0]),
        )
        .unwrap();
        // per-residue deviations 0.5, 1.5, 3, 9 Å along z
        let devs = [0.5, 1.5, 3.0, 9.0];
        let mobile = Structure::new(
            "m",
            (0..4)
                .map(|i| Vec3::new(10.0 * i as f64, 0.0, devs[i]))
                .collect(),
            None,
        )
        .unwrap();
        let regions = gdt_by_confidence_region(&target, &mobile, &GdtMode::TS).unwrap();
        // one residue per region: counts of cutoffs (1,2,4,8) above each deviation
        let expected = [4.0 / 4.0, 3.0 / 4.0, 2.0 / 4.0, 0.0];
        for (r, e) in regions.iter().zip(expected) {
            let r = r.unwrap();
            assert_eq!(r.gdt, e);
            assert_eq!(r.weight, 0.25);
        }
    }

    #[test]
    fn regions_boundaries_and_degenerate_partition() {
        assert_eq!(ConfidenceRegion::of(90.0), ConfidenceRegion::R2);
        assert_eq!(ConfidenceRegion::of(90.01), ConfidenceRegion::R1);
        assert_eq!(ConfidenceRegion::of(70.0), ConfidenceRegion::R3);
        assert_eq!(ConfidenceRegion::of(50.0), ConfidenceRegion::R4);
        assert_eq!(ConfidenceRegion::of(0.0), ConfidenceRegion::R4);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_structure(&mut rng, 12);
        let a = Structure::new("a", a.ca().to_vec(), Some(vec![75.0; 12])).unwrap();
        let b = random_structure(&mut rng, 12);
        let regions = gdt_by_confidence_region(&a, &b, &GdtMode::TS).unwrap();
        assert!(regions[0].is_none() && regions[2].is_none() && regions[3].is_none());
        let r2 = regions[1].unwrap();
        assert_eq!(r2.gdt, gdt(&a, &b, &GdtMode::TS).unwrap());
        assert_eq!(r2.weight, 1.0);

        let no_conf = random_structure(&mut rng, 12);
        assert!(gdt_by_confidence_region(&no_conf, &b, &GdtMode::TS).is_err());
    }
}
