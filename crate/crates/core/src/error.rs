use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid residue '{0}'")]
    InvalidResidue(char),

    #[error("empty sequence")]
    EmptySequence,

    #[error("FASTA input is empty")]
    EmptyFasta,

    #[error("FASTA record '{record}' line {line}: invalid residue '{residue}'")]
    FastaResidue {
        record: String,
        line: usize,
        residue: char,
    },

    #[error("FASTA record '{record}' (line {line}) has no residues")]
    FastaEmptyRecord { record: String, line: usize },

    #[error("FASTA line {line}: sequence data before the first '>' header")]
    FastaOrphanLine { line: usize },

    #[error("substitution matrix: {0}")]
    Matrix(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid neighborhood spec: {0}")]
    InvalidSpec(String),

    #[error("sampler gave up after {attempts} attempts ({spec})")]
    SamplerExhausted { spec: String, attempts: usize },

    #[error(
        "neighborhood too large to enumerate: estimated {estimated} members exceeds cap {cap}"
    )]
    EnumerationCap { estimated: u128, cap: u64 },

    #[error("invalid confidence values: {0}")]
    InvalidConfidence(String),

    #[error("PDB line {line}: {message}")]
    Pdb { line: usize, message: String },

    #[error("PDB input contains no CA atoms")]
    NoCaAtoms,

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("degenerate superposition: {0}")]
    DegenerateFit(String),

    #[error("PDB output: {0}")]
    PdbWrite(String),

    #[error("folding command failed ({status}): {diagnostics}")]
    FoldCommand { status: String, diagnostics: String },

    #[error("folding command timed out after {0:?}")]
    FoldTimeout(std::time::Duration),

    #[error("oracle returned {got} residues for a sequence of length {expected}")]
    FoldLength { expected: usize, got: usize },

    #[error("oracle returned a structure without per-residue confidence")]
    MissingConfidence,

    #[error("oracle violates its contract: {0}")]
    Conformance(String),

    #[error("candidate {index} ('{id}') failed to fold: {source}")]
    CandidateFold {
        index: usize,
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("instance too large for exhaustive search: n = {n} exceeds cap {cap}")]
    SearchCap { n: usize, cap: usize },

    #[error("k = {k} exceeds the vertex count {n}")]
    CliqueSize { k: usize, n: usize },

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
