//! Amino-acid alphabet, FASTA ingestion, substitution matrices and the
//! BLOSUM-derived sequence distance.

use std::fmt;

use crate::error::{Error, Result};

/// One of the 20 canonical amino acids.
///
/// Declaration order is the conventional BLOSUM row order, which is also the
/// index used by [`BlosumMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AminoAcid {
    A,
    R,
    N,
    D,
    C,
    Q,
    E,
    G,
    H,
    I,
    L,
    K,
    M,
    F,
    P,
    S,
    T,
    W,
    Y,
    V,
}

impl AminoAcid {
    /// All residues in matrix order.
    pub const ALL: [AminoAcid; 20] = [
        AminoAcid::A,
        AminoAcid::R,
        AminoAcid::N,
        AminoAcid::D,
        AminoAcid::C,
        AminoAcid::Q,
        AminoAcid::E,
        AminoAcid::G,
        AminoAcid::H,
        AminoAcid::I,
        AminoAcid::L,
        AminoAcid::K,
        AminoAcid::M,
        AminoAcid::F,
        AminoAcid::P,
        AminoAcid::S,
        AminoAcid::T,
        AminoAcid::W,
        AminoAcid::Y,
        AminoAcid::V,
    ];

    /// All residues sorted by their one-letter code.
    pub const ALPHABETICAL: [AminoAcid; 20] = [
        AminoAcid::A,
        AminoAcid::C,
        AminoAcid::D,
        AminoAcid::E,
        AminoAcid::F,
        AminoAcid::G,
        AminoAcid::H,
        AminoAcid::I,
        AminoAcid::K,
        AminoAcid::L,
        AminoAcid::M,
        AminoAcid::N,
        AminoAcid::P,
        AminoAcid::Q,
        AminoAcid::R,
        AminoAcid::S,
        AminoAcid::T,
        AminoAcid::V,
        AminoAcid::W,
        AminoAcid::Y,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> char {
        match self {
            AminoAcid::A => 'A',
            AminoAcid::R => 'R',
            AminoAcid::N => 'N',
            AminoAcid::D => 'D',
            AminoAcid::C => 'C',
            AminoAcid::Q => 'Q',
            AminoAcid::E => 'E',
            AminoAcid::G => 'G',
            AminoAcid::H => 'H',
            AminoAcid::I => 'I',
            AminoAcid::L => 'L',
            AminoAcid::K => 'K',
            AminoAcid::M => 'M',
            AminoAcid::F => 'F',
            AminoAcid::P => 'P',
            AminoAcid::S => 'S',
            AminoAcid::T => 'T',
            AminoAcid::W => 'W',
            AminoAcid::Y => 'Y',
            AminoAcid::V => 'V',
        }
    }

    /// Three-letter PDB residue name.
    pub fn three_letter(self) -> &'static str {
        match self {
            AminoAcid::A => "ALA",
            AminoAcid::R => "ARG",
            AminoAcid::N => "ASN",
            AminoAcid::D => "ASP",
            AminoAcid::C => "CYS",
            AminoAcid::Q => "GLN",
            AminoAcid::E => "GLU",
            AminoAcid::G => "GLY",
            AminoAcid::H => "HIS",
            AminoAcid::I => "ILE",
            AminoAcid::L => "LEU",
            AminoAcid::K => "LYS",
            AminoAcid::M => "MET",
            AminoAcid::F => "PHE",
            AminoAcid::P => "PRO",
            AminoAcid::S => "SER",
            AminoAcid::T => "THR",
            AminoAcid::W => "TRP",
            AminoAcid::Y => "TYR",
            AminoAcid::V => "VAL",
        }
    }

    /// Case-insensitive lookup. Ambiguity codes (B, Z, X, U, O) and gaps are
    /// not canonical residues and fail.
    pub fn from_code(c: char) -> Result<Self> {
        let upper = c.to_ascii_uppercase();
        AminoAcid::ALL
            .iter()
            .copied()
            .find(|aa| aa.code() == upper)
            .ok_or(Error::InvalidResidue(c))
    }
}

impl TryFrom<char> for AminoAcid {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        AminoAcid::from_code(c)
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// A non-empty protein sequence with an identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence {
    id: String,
    residues: Vec<AminoAcid>,
}

#[allow(clippy::len_without_is_empty)]
impl Sequence {
    pub fn new(id: impl Into<String>, residues: Vec<AminoAcid>) -> Result<Self> {
        if residues.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Sequence {
            id: id.into(),
            residues,
        })
    }

    /// Builds a sequence from one-letter codes.
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self> {
        let residues = text
            .chars()
            .map(AminoAcid::from_code)
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(id, residues)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn residues(&self) -> &[AminoAcid] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    /// Same residues, different identifier.
    pub fn with_id(&self, id: impl Into<String>) -> Sequence {
        Sequence {
            id: id.into(),
            residues: self.residues.clone(),
        }
    }

    /// Residue string, e.g. `"MKT"`.
    pub fn residue_string(&self) -> String {
        self.residues.iter().map(|aa| aa.code()).collect()
    }
}

/// Parses FASTA text. Lowercase residues are uppercased, blank lines and
/// whitespace inside a record are ignored, CRLF and LF are both accepted.
pub fn parse_fasta(text: &str) -> Result<Vec<Sequence>> {
    struct Pending {
        id: String,
        line: usize,
        residues: Vec<AminoAcid>,
    }

    fn finish(p: Pending) -> Result<Sequence> {
        if p.residues.is_empty() {
            return Err(Error::FastaEmptyRecord {
                record: p.id,
                line: p.line,
            });
        }
        Sequence::new(p.id, p.residues)
    }

    let mut out = Vec::new();
    let mut current: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            if let Some(p) = current.take() {
                out.push(finish(p)?);
            }
            current = Some(Pending {
                id: header.trim().to_string(),
                line: line_no,
                residues: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(p) = current.as_mut() else {
            return Err(Error::FastaOrphanLine { line: line_no });
        };
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            let aa = AminoAcid::from_code(c).map_err(|_| Error::FastaResidue {
                record: p.id.clone(),
                line: line_no,
                residue: c,
            })?;
            p.residues.push(aa);
        }
    }

    if let Some(p) = current.take() {
        out.push(finish(p)?);
    }
    if out.is_empty() {
        return Err(Error::EmptyFasta);
    }
    Ok(out)
}

/// Writes sequences as FASTA with 60 residues per line.
pub fn write_fasta(seqs: &[Sequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        out.push('>');
        out.push_str(s.id());
        out.push('\n');
        let text = s.residue_string();
        for chunk in text.as_bytes().chunks(60) {
            // residue codes are ASCII
            out.push_str(std::str::from_utf8(chunk).expect("ASCII residues"));
            out.push('\n');
        }
    }
    out
}

const BLOSUM62_TEXT: &str = include_str!("data/blosum62.txt");

/// 20x20 integer substitution scores over the canonical alphabet.
///
/// Construction checks symmetry and strict diagonal dominance within each
/// row, which is what makes [`seq_distance`] zero exactly on identical
/// sequences and positive otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlosumMatrix {
    name: String,
    scores: [[i32; 20]; 20],
}

impl BlosumMatrix {
    pub fn new(name: impl Into<String>, scores: [[i32; 20]; 20]) -> Result<Self> {
        for a in AminoAcid::ALL {
            for b in AminoAcid::ALL {
                let (i, j) = (a.index(), b.index());
                if scores[i][j] != scores[j][i] {
                    return Err(Error::Matrix(format!(
                        "asymmetric entry {a}/{b}: {} vs {}",
                        scores[i][j], scores[j][i]
                    )));
                }
                if i != j && scores[i][i] <= scores[i][j] {
                    return Err(Error::Matrix(format!(
                        "diagonal dominance violated: {a}{a}={} <= {a}{b}={}",
                        scores[i][i], scores[i][j]
                    )));
                }
            }
        }
        Ok(BlosumMatrix {
            name: name.into(),
            scores,
        })
    }

    /// The embedded BLOSUM62 matrix.
    pub fn blosum62() -> Self {
        Self::parse("BLOSUM62", BLOSUM62_TEXT).expect("embedded BLOSUM62 is valid")
    }

    /// Parses the whitespace-separated matrix format used by the standard
    /// distributions. Rows and columns for non-canonical symbols (B, Z, X,
    /// `*`) are ignored.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'));

        let header = lines
            .next()
            .ok_or_else(|| Error::Matrix("missing header row".into()))?;
        let columns: Vec<Option<AminoAcid>> =
            header.split_whitespace().map(single_residue).collect();
        for aa in AminoAcid::ALL {
            if !columns.contains(&Some(aa)) {
                return Err(Error::Matrix(format!("missing column for residue {aa}")));
            }
        }

        let mut scores = [[0i32; 20]; 20];
        let mut seen = [false; 20];
        for line in lines {
            let mut toks = line.split_whitespace();
            let label = toks.next().expect("non-empty line");
            let Some(row) = single_residue(label) else {
                continue;
            };
            let values: Vec<&str> = toks.collect();
            if values.len() != columns.len() {
                return Err(Error::Matrix(format!(
                    "row {row} has {} values, header has {}",
                    values.len(),
                    columns.len()
                )));
            }
            if seen[row.index()] {
                return Err(Error::Matrix(format!("duplicate row for residue {row}")));
            }
            seen[row.index()] = true;
            for (col, value) in columns.iter().zip(values) {
                let Some(col) = col else { continue };
                let v: i32 = value.parse().map_err(|_| {
                    Error::Matrix(format!("row {row}: non-integer score '{value}'"))
                })?;
                scores[row.index()][col.index()] = v;
            }
        }
        if let Some(missing) = AminoAcid::ALL.iter().find(|aa| !seen[aa.index()]) {
            return Err(Error::Matrix(format!("missing row for residue {missing}")));
        }
        BlosumMatrix::new(name, scores)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn score(&self, a: AminoAcid, b: AminoAcid) -> i32 {
        self.scores[a.index()][b.index()]
    }

    /// Per-position distance contribution of replacing `from` with `to`.
    pub fn gap(&self, from: AminoAcid, to: AminoAcid) -> i64 {
        i64::from(self.score(from, from)) - i64::from(self.score(from, to))
    }
}

fn single_residue(tok: &str) -> Option<AminoAcid> {
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => AminoAcid::from_code(c).ok(),
        _ => None,
    }
}

fn check_lengths(a: &Sequence, b: &Sequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// BLOSUM distance `sum_i B[s_i][s_i] - B[s_i][s'_i]`.
///
/// Asymmetric: `reference` supplies the self-scores, so the original sequence
/// must always be passed first.
pub fn seq_distance(reference: &Sequence, other: &Sequence, matrix: &BlosumMatrix) -> Result<i64> {
    check_lengths(reference, other)?;
    Ok(reference
        .residues()
        .iter()
        .zip(other.residues())
        .map(|(&a, &b)| matrix.gap(a, b))
        .sum())
}

pub fn hamming(a: &Sequence, b: &Sequence) -> Result<usize> {
    check_lengths(a, b)?;
    Ok(a.residues()
        .iter()
        .zip(b.residues())
        .filter(|(x, y)| x != y)
        .count())
}

/// Indices at which the two sequences differ, ascending.
pub fn changed_positions(a: &Sequence, b: &Sequence) -> Result<Vec<usize>> {
    check_lengths(a, b)?;
    Ok(a.residues()
        .iter()
        .zip(b.residues())
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| i)
        .collect())
}
