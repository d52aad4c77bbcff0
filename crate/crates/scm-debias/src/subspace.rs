//! Fitting the warmth and competence bias directions from curated
//! antonym pairs: difference vectors, first principal component, and
//! per-axis mean vectors.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{resolve_token, EmbeddingTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Warmth,
    Competence,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Warmth => write!(f, "warmth"),
            Axis::Competence => write!(f, "competence"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPair {
    pub positive: String,
    pub negative: String,
    pub axis: Axis,
    /// Ordering key from the source list.
    pub score: f64,
}

#[derive(Deserialize)]
struct RawPair {
    pos: String,
    neg: String,
    #[serde(default)]
    score: f64,
}

/// Load an ordered antonym-pair list from a JSON array of
/// `{pos, neg, score}` objects. Duplicates are dropped with a warning.
pub fn load_word_pairs(path: impl AsRef<Path>, axis: Axis) -> Result<Vec<WordPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawPair> = serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        }
    })?;
    if raw.is_empty() {
        return Err(Error::Argument(format!(
            "{}: empty word-pair list",
            path.display()
        )));
    }
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(raw.len());
    for r in raw {
        if r.pos == r.neg {
            return Err(Error::Argument(format!(
                "{}: pair with identical poles {:?}",
                path.display(),
                r.pos
            )));
        }
        if !seen.insert((r.pos.clone(), r.neg.clone())) {
            log::warn!(
                "{}: duplicate pair ({:?}, {:?}) dropped",
                path.display(),
                r.pos,
                r.neg
            );
            continue;
        }
        pairs.push(WordPair {
            positive: r.pos,
            negative: r.neg,
            axis,
            score: r.score,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone)]
pub struct SelectedPairs {
    /// Pairs in source order with any replacement-map substitutions applied.
    pub pairs: Vec<WordPair>,
    /// True when fewer than the requested k pairs resolved.
    pub shortfall: bool,
}

/// Take the first `k` pairs whose both tokens resolve in the table
/// (after the replacement map). Unresolvable pairs are skipped and
/// later pairs backfill.
pub fn select_top_pairs(
    pairs: &[WordPair],
    k: usize,
    table: &EmbeddingTable,
    replacements: &HashMap<String, String>,
) -> Result<SelectedPairs> {
    let mut selected = Vec::with_capacity(k);
    for p in pairs {
        if selected.len() == k {
            break;
        }
        let pos = resolve_token(table, replacements, &p.positive);
        let neg = resolve_token(table, replacements, &p.negative);
        if let (Some(pos), Some(neg)) = (pos, neg) {
            selected.push(WordPair {
                positive: pos.to_string(),
                negative: neg.to_string(),
                axis: p.axis,
                score: p.score,
            });
        }
    }
    if selected.is_empty() {
        return Err(Error::Fit(
            "no word pair resolves in the vocabulary".into(),
        ));
    }
    let shortfall = selected.len() < k;
    if shortfall {
        log::warn!(
            "only {} of {k} requested pairs resolve in the vocabulary",
            selected.len()
        );
    }
    Ok(SelectedPairs {
        pairs: selected,
        shortfall,
    })
}

/// Columns of e(positive) - e(negative), one per pair.
pub fn difference_matrix(table: &EmbeddingTable, pairs: &[WordPair]) -> Result<Vec<Vec<f64>>> {
    pairs
        .iter()
        .map(|p| {
            let pos = table
                .vector(&p.positive)
                .ok_or_else(|| Error::Fit(format!("token {:?} not in vocabulary", p.positive)))?;
            let neg = table
                .vector(&p.negative)
                .ok_or_else(|| Error::Fit(format!("token {:?} not in vocabulary", p.negative)))?;
            Ok(pos.iter().zip(neg).map(|(a, b)| a - b).collect())
        })
        .collect()
}

fn mean_column(columns: &[Vec<f64>]) -> Vec<f64> {
    let d = columns[0].len();
    let mut mean = vec![0.0; d];
    for col in columns {
        for (m, x) in mean.iter_mut().zip(col) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= columns.len() as f64;
    }
    mean
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::embedding::norm(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Unit-norm first principal component of the (optionally mean-centered)
/// difference columns. Sign is fixed so the dot product with the mean
/// difference vector is non-negative. Degenerate centered variance falls
/// back to the normalized mean difference.
pub fn principal_direction(diffs: &[Vec<f64>], center: bool) -> Result<Vec<f64>> {
    if diffs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 difference columns, got {}",
            diffs.len()
        )));
    }
    let d = diffs[0].len();
    if diffs.iter().any(|c| c.len() != d) {
        return Err(Error::Argument("ragged difference matrix".into()));
    }
    let nonzero: Vec<&Vec<f64>> = diffs
        .iter()
        .filter(|c| c.iter().any(|&x| x != 0.0))
        .collect();
    if nonzero.is_empty() {
        return Err(Error::Degenerate("all difference columns are zero".into()));
    }
    let mean = mean_column(diffs);

    // Zero columns contribute to the mean but not to the covariance.
    let centered: Vec<Vec<f64>> = nonzero
        .iter()
        .map(|col| {
            if center {
                col.iter().zip(&mean).map(|(x, m)| x - m).collect()
            } else {
                (*col).clone()
            }
        })
        .collect();

    let total_var: f64 = centered
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .sum();
    if total_var < 1e-12 {
        if mean.iter().all(|&x| x == 0.0) {
            return Err(Error::Degenerate(
                "centered variance and mean difference both vanish".into(),
            ));
        }
        return Ok(orient(normalize(mean.clone()), &mean));
    }

    // Gram trick: with k columns (k << d) the top eigenvector of the
    // k x k Gram matrix maps back to the principal direction.
    let k = centered.len();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let g = crate::embedding::dot(&centered[i], &centered[j]);
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = gram.symmetric_eigen();
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite eigenvalues"))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let weights = eig.eigenvectors.column(top);

    let mut u = vec![0.0; d];
    for (col, w) in centered.iter().zip(weights.iter()) {
        for (ui, x) in u.iter_mut().zip(col) {
            *ui += w * x;
        }
    }
    Ok(orient(normalize(u), &mean))
}

fn orient(u: Vec<f64>, mean_diff: &[f64]) -> Vec<f64> {
    if crate::embedding::dot(&u, mean_diff) < 0.0 {
        u.into_iter().map(|x| -x).collect()
    } else {
        u
    }
}

/// The fitted SCM subspace: both unit directions, per-axis mean vectors
/// over all pair tokens, and the resolved pairs for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasSubspace {
    pub u_warmth: Vec<f64>,
    pub u_competence: Vec<f64>,
    pub mu_warmth: Vec<f64>,
    pub mu_competence: Vec<f64>,
    pub warmth_pairs: Vec<WordPair>,
    pub competence_pairs: Vec<WordPair>,
    pub shortfall: bool,
}

impl BiasSubspace {
    pub fn dim(&self) -> usize {
        self.u_warmth.len()
    }
}

fn axis_mean(table: &EmbeddingTable, pairs: &[WordPair]) -> Vec<f64> {
    let tokens: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.positive.as_str(), p.negative.as_str()])
        .collect();
    let d = table.dim();
    let mut mu = vec![0.0; d];
    for t in &tokens {
        let v = table.vector(t).expect("resolved token");
        for (m, x) in mu.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= tokens.len() as f64;
    }
    mu
}

fn fit_axis(
    table: &EmbeddingTable,
    pairs: &[WordPair],
    k: usize,
    replacements: &HashMap<String, String>,
    center: bool,
    axis: Axis,
) -> Result<(Vec<f64>, Vec<f64>, Vec<WordPair>, bool)> {
    let selected = select_top_pairs(pairs, k, table, replacements)?;
    if selected.pairs.len() < 2 {
        return Err(Error::Fit(format!(
            "{axis}: need at least 2 resolvable pairs, got {}",
            selected.pairs.len()
        )));
    }
    let diffs = difference_matrix(table, &selected.pairs)?;
    let u = principal_direction(&diffs, center)
        .map_err(|e| Error::Fit(format!("{axis}: {e}")))?;
    let mu = axis_mean(table, &selected.pairs);
    Ok((u, mu, selected.pairs, selected.shortfall))
}

pub fn build_subspace(
    table: &EmbeddingTable,
    warmth_pairs: &[WordPair],
    competence_pairs: &[WordPair],
    k: usize,
    replacements: &HashMap<String, String>,
    center: bool,
) -> Result<BiasSubspace> {
    let (u_w, mu_w, pairs_w, short_w) =
        fit_axis(table, warmth_pairs, k, replacements, center, Axis::Warmth)?;
    let (u_c, mu_c, pairs_c, short_c) = fit_axis(
        table,
        competence_pairs,
        k,
        replacements,
        center,
        Axis::Competence,
    )?;
    Ok(BiasSubspace {
        u_warmth: u_w,
        u_competence: u_c,
        mu_warmth: mu_w,
        mu_competence: mu_c,
        warmth_pairs: pairs_w,
        competence_pairs: pairs_c,
        shortfall: short_w || short_c,
    })
}

/// Flattened attribute tokens (both poles) of the resolved pairs for
/// both axes, in pair order. This is the attribute set A used by ECT.
pub fn attribute_tokens(subspace: &BiasSubspace) -> Vec<String> {
    subspace
        .warmth_pairs
        .iter()
        .chain(&subspace.competence_pairs)
        .flat_map(|p| [p.positive.clone(), p.negative.clone()])
        .collect()
}
