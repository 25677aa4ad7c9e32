//! Adversarial sequence generation against black-box protein folding
//! predictors, with Cα structure metrics and an executable CLIQUE-to-attack
//! reduction for small instances.
//!
//! The pieces:
//!
//! * [`sequences`]: alphabet, FASTA, substitution matrices, BLOSUM distance
//! * [`neighborhood`]: the bounded sequence space around a reference
//! * [`structures`]: PDB Cα I/O, Kabsch superposition, RMSD, GDT
//! * [`oracle`]: folding-oracle trait, mock folder, subprocess adapter, cache
//! * [`attack`]: sampled and exhaustive attacks, confidence statistics
//! * [`reduction`]: CLIQUE reduction and brute-force verifiers
//! * [`report`] and [`cli`]: CSV tables, run manifests, command line

pub mod attack;
pub mod cli;
pub mod error;
pub mod neighborhood;
pub mod oracle;
pub mod reduction;
pub mod report;
pub mod sequences;
pub mod structures;

pub use error::{Error, Result};
