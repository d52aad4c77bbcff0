//! Compound (gender x race) identity construction and seeded random
//! pairing for evaluation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

/// Name of the pseudo-random generator used for pairing, recorded in
/// reports so a run can be reproduced bit-for-bit.
pub const PAIRING_RNG: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Summed,
    Concatenated,
}

impl std::fmt::Display for Construction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Construction::Summed => write!(f, "summed"),
            Construction::Concatenated => write!(f, "concatenated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundIdentity {
    pub gender_term: String,
    pub race_term: String,
    pub construction: Construction,
    pub vec: Vec<f64>,
}

impl CompoundIdentity {
    pub fn label(&self) -> String {
        format!("{}_{}", self.gender_term, self.race_term)
    }
}

/// Identity term lists: one token per line; blank lines and `#` comments
/// are skipped. Tokens containing whitespace are invalid.
pub fn load_term_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut terms = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let term = line.trim();
        if term.is_empty() || term.starts_with('#') {
            continue;
        }
        if term.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("term {term:?} contains whitespace"),
            });
        }
        terms.push(term.to_string());
    }
    if terms.is_empty() {
        return Err(Error::Argument(format!(
            "{}: empty term list",
            path.display()
        )));
    }
    Ok(terms)
}

/// Ordered Cartesian product, row-major (gender outer, race inner).
pub fn cartesian<'a>(
    gender: &'a [String],
    race: &'a [String],
) -> Result<Vec<(&'a str, &'a str)>> {
    for (name, list) in [("gender", gender), ("race", race)] {
        if list.is_empty() {
            return Err(Error::Argument(format!("{name} term list is empty")));
        }
        let mut seen = HashSet::new();
        for t in list {
            if !seen.insert(t.as_str()) {
                return Err(Error::Argument(format!(
                    "{name} term list contains duplicate {t:?}"
                )));
            }
        }
    }
    Ok(gender
        .iter()
        .flat_map(|g| race.iter().map(move |r| (g.as_str(), r.as_str())))
        .collect())
}

pub fn sum_compound(eg: &[f64], er: &[f64]) -> Result<Vec<f64>> {
    if eg.len() != er.len() {
        return Err(Error::Argument(format!(
            "summed compound over mismatched dims {} and {}",
            eg.len(),
            er.len()
        )));
    }
    Ok(eg.iter().zip(er).map(|(a, b)| a + b).collect())
}

pub fn concat_compound(eg: &[f64], er: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(eg.len() + er.len());
    v.extend_from_slice(eg);
    v.extend_from_slice(er);
    v
}

/// Lift a d-dim unit direction into 2d concatenated space: [u; u]/sqrt(2).
/// Blockwise mode needs no lifted vector; operators are applied to each
/// d-block with the original direction instead.
pub fn replicate_direction(u: &[f64]) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    u.iter()
        .map(|x| x * s)
        .chain(u.iter().map(|x| x * s))
        .collect()
}

/// Build all compound identities whose source tokens resolve in the
/// table. Returns the identities along with the (g, r) pairs dropped
/// for missing vocabulary.
pub fn build_compounds(
    table: &EmbeddingTable,
    gender: &[String],
    race: &[String],
    construction: Construction,
) -> Result<(Vec<CompoundIdentity>, Vec<(String, String)>)> {
    let product = cartesian(gender, race)?;
    let mut identities = Vec::new();
    let mut dropped = Vec::new();
    for (g, r) in product {
        match (table.vector(g), table.vector(r)) {
            (Some(eg), Some(er)) => {
                let vec = match construction {
                    Construction::Summed => sum_compound(eg, er)?,
                    Construction::Concatenated => concat_compound(eg, er),
                };
                identities.push(CompoundIdentity {
                    gender_term: g.to_string(),
                    race_term: r.to_string(),
                    construction,
                    vec,
                });
            }
            _ => dropped.push((g.to_string(), r.to_string())),
        }
    }
    Ok((identities, dropped))
}

/// A seeded shuffle-then-chunk pairing over item indices. Every item
/// appears in at most one pair and never with itself; an odd leftover
/// is recorded in `dropped`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub seed: u64,
    pub generator: String,
    pub pairs: Vec<(usize, usize)>,
    pub dropped: Option<usize>,
}

pub fn random_pairing<T>(items: &[T], seed: u64) -> Result<PairingPlan> {
    if items.len() < 2 {
        return Err(Error::Argument(format!(
            "random pairing needs at least 2 items, got {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let dropped = if order.len() % 2 == 1 { order.pop() } else { None };
    let pairs = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    Ok(PairingPlan {
        seed,
        generator: PAIRING_RNG.to_string(),
        pairs,
        dropped,
    })
}
