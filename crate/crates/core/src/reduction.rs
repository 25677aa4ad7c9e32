//! CLIQUE reduces to the attack decision problem.
//!
//! Given a graph on `n` vertices and a clique size `k`, the reduced instance
//! starts from the all-`N` sequence of length `n` over the two-letter
//! alphabet {N, K}, scores substitutions with `6 * I` and bounds the
//! sequence distance by `L = 6k`. The network ignores the `N` channel of the
//! one-hot input; every edge `(u, v)` feeds a unit-weight gate that fires
//! when both `u` and `v` are `K`, and all gates sum into the three
//! components of the first output coordinate. The first output therefore
//! counts induced edges, every other output is zero, and the unaligned RMSD
//! against the all-zero prediction of the base sequence is
//! `edges * sqrt(3 / n)`. Reaching `U = k(k-1)/2 * sqrt(3/n)` within `6k`
//! requires exactly a `k`-clique.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::sequences::{AminoAcid, Sequence};
use crate::structures::{rmsd, Structure, Vec3};

/// Default vertex cap for the exhaustive searches (2^20 assignments).
pub const DEFAULT_SEARCH_CAP: usize = 20;

/// Slack for comparing the computed RMSD against `U`. Distinct edge counts
/// are at least `sqrt(3/n)` apart, far above this.
const FEASIBILITY_EPS: f64 = 1e-9;

/// Self-score of the idealized two-letter matrix `6 * I`.
const IDEAL_SELF_SCORE: u64 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("a graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::Graph(format!("self-loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Graph { n, edges: set })
    }

    /// Edge-list text: a first line `n m`, then `m` lines `u v` (0-based).
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_pair = |line_no: usize, l: &str| -> Result<(usize, usize)> {
            let nums: Vec<&str> = l.split_whitespace().collect();
            match nums.as_slice() {
                [a, b] => Ok((
                    a.parse()
                        .map_err(|_| Error::Graph(format!("line {line_no}: bad integer '{a}'")))?,
                    b.parse()
                        .map_err(|_| Error::Graph(format!("line {line_no}: bad integer '{b}'")))?,
                )),
                _ => Err(Error::Graph(format!(
                    "line {line_no}: expected two integers"
                ))),
            }
        };
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::Graph("empty graph file".into()))?;
        let (n, m) = parse_pair(line_no, header)?;
        let mut edges = Vec::with_capacity(m);
        for (line_no, l) in lines {
            edges.push(parse_pair(line_no, l)?);
        }
        if edges.len() != m {
            return Err(Error::Graph(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Graph::new(n, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn complete(n: usize) -> Self {
        Graph::new(n, (0..n).tuple_combinations()).expect("valid complete graph")
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i - 1, i))).expect("valid path")
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

/// The attack instance built from a CLIQUE instance.
#[derive(Debug, Clone)]
pub struct PaaInstance {
    pub graph: Graph,
    pub k: usize,
    /// All-`N` sequence of length `n`.
    pub base_sequence: Sequence,
    /// `L = 6k`.
    pub l_bound: u64,
    /// `U = k(k-1)/2 * sqrt(3/n)`, Å.
    pub u_bound: f64,
}

pub fn reduce_clique_to_paa(graph: &Graph, k: usize) -> Result<PaaInstance> {
    let n = graph.n_vertices();
    if k == 0 || k > n {
        return Err(Error::CliqueSize { k, n });
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(PaaInstance {
        graph: graph.clone(),
        k,
        base_sequence: Sequence::new("base", vec![AminoAcid::N; n])?,
        l_bound: IDEAL_SELF_SCORE * k as u64,
        u_bound: pairs * (3.0 / n as f64).sqrt(),
    })
}

/// Selected vertices (`K` residues) of an assignment over {N, K}.
fn selection(instance: &PaaInstance, assignment: &Sequence) -> Result<Vec<bool>> {
    let n = instance.graph.n_vertices();
    if assignment.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: assignment.len(),
        });
    }
    assignment
        .residues()
        .iter()
        .map(|aa| match aa {
            AminoAcid::N => Ok(false),
            AminoAcid::K => Ok(true),
            other => Err(Error::InvalidResidue(other.code())),
        })
        .collect()
}

impl PaaInstance {
    /// Sequence distance under the idealized `6 * I` scoring.
    pub fn seq_distance(&self, assignment: &Sequence) -> Result<u64> {
        let selected = selection(self, assignment)?;
        let scores = |a: bool, b: bool| if a == b { IDEAL_SELF_SCORE } else { 0 };
        // base residues are all N (unselected)
        Ok(selected
            .iter()
            .map(|&s| scores(false, false) - scores(false, s))
            .sum())
    }

    /// First output coordinate of the network for `assignment`.
    pub fn eval_network(&self, assignment: &Sequence) -> Result<Vec3> {
        let selected = selection(self, assignment)?;
        // one-hot input, K channel only; N channel is disconnected
        let k_channel: Vec<f64> = selected
            .iter()
            .map(|&s| if s { 1.0 } else { 0.0 })
            .collect();
        let mut out = 0.0;
        for (u, v) in self.graph.edges() {
            // unit-weight AND gate: relu(x_u + x_v - 1)
            out += (k_channel[u] + k_channel[v] - 1.0).max(0.0);
        }
        Ok(Vec3::new(out, out, out))
    }

    /// Full network output: the first coordinate from
    /// [`eval_network`](Self::eval_network), zeros elsewhere.
    pub fn predict(&self, assignment: &Sequence) -> Result<Structure> {
        let n = self.graph.n_vertices();
        let mut ca = vec![Vec3::zeros(); n];
        ca[0] = self.eval_network(assignment)?;
        Structure::new(assignment.id(), ca, None)
    }

    /// Unaligned RMSD between the base and assignment predictions.
    pub fn structural_distance(&self, assignment: &Sequence) -> Result<f64> {
        let reference = self.predict(&self.base_sequence)?;
        rmsd(&reference, &self.predict(assignment)?)
    }

    pub fn is_feasible(&self, assignment: &Sequence) -> Result<bool> {
        Ok(self.seq_distance(assignment)? <= self.l_bound
            && self.structural_distance(assignment)? + FEASIBILITY_EPS >= self.u_bound)
    }

    /// The assignment selecting exactly `vertices`.
    pub fn assignment(&self, vertices: &[usize]) -> Result<Sequence> {
        let n = self.graph.n_vertices();
        let mut residues = vec![AminoAcid::N; n];
        for &v in vertices {
            if v >= n {
                return Err(Error::Graph(format!("vertex {v} out of range")));
            }
            residues[v] = AminoAcid::K;
        }
        Sequence::new("assignment", residues)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Lexicographically smallest feasible assignment (`K` < `N`).
    pub witness: Option<Sequence>,
}

/// Searches all `2^n` assignments over {N, K}.
pub fn paa_feasible_exhaustive(instance: &PaaInstance, cap: usize) -> Result<Feasibility> {
    let n = instance.graph.n_vertices();
    if n > cap || n >= 64 {
        return Err(Error::SearchCap { n, cap });
    }
    // counting upward with bit (n-1-i) set meaning residue i is N visits
    // strings in lexicographic order under K < N
    for code in 0u64..(1u64 << n) {
        let residues: Vec<AminoAcid> = (0..n)
            .map(|i| {
                if code >> (n - 1 - i) & 1 == 1 {
                    AminoAcid::N
                } else {
                    AminoAcid::K
                }
            })
            .collect();
        let candidate = Sequence::new("witness", residues)?;
        if instance.is_feasible(&candidate)? {
            return Ok(Feasibility {
                feasible: true,
                witness: Some(candidate),
            });
        }
    }
    Ok(Feasibility {
        feasible: false,
        witness: None,
    })
}

/// Checks every `k`-subset for completeness.
pub fn clique_exists_bruteforce(graph: &Graph, k: usize, cap: usize) -> Result<bool> {
    let n = graph.n_vertices();
    if n > cap {
        return Err(Error::SearchCap { n, cap });
    }
    if k > n {
        return Ok(false);
    }
    Ok((0..n).combinations(k).any(|subset| {
        subset
            .iter()
            .tuple_combinations()
            .all(|(&u, &v)| graph.has_edge(u, v))
    }))
}
