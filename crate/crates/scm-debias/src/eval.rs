//! Semantic-preservation scoring: the Embedding Coherence Test (rank
//! stability of cosine similarities) and the Embedding Quality Test
//! (analogy completion), plus significance statistics.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::compound::PairingPlan;
use crate::embedding::{cosine, nearest, EmbeddingTable};
use crate::error::{Error, Result};
use crate::subspace::WordPair;

fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // average rank over the tie group, 1-based
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric(
            "undefined correlation: zero rank variance".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties. The p-value is
/// the two-sided t-approximation on n-2 degrees of freedom.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "spearman over mismatched lengths {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::Argument(format!(
            "spearman needs at least 3 samples, got {}",
            xs.len()
        )));
    }
    let rho = pearson(&ranks(xs), &ranks(ys))?;
    let n = xs.len() as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 2.0).expect("valid dof");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok((rho, p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EctResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Lift a base-table attribute vector to the identity dimensionality.
/// Concatenated identities live in 2d, so a d-dim attribute is block
/// copied; cosine is norm-insensitive so no rescale is needed.
fn lift_attribute(attr: &[f64], target_dim: usize) -> Result<Vec<f64>> {
    if attr.len() == target_dim {
        Ok(attr.to_vec())
    } else if attr.len() * 2 == target_dim {
        Ok(crate::compound::concat_compound(attr, attr))
    } else {
        Err(Error::Argument(format!(
            "attribute dim {} incompatible with identity dim {target_dim}",
            attr.len()
        )))
    }
}

/// ECT: Spearman rank correlation between the flattened (row-major over
/// identities x attributes) cosine-similarity lists before and after
/// debiasing. `per_attribute` switches to the per-attribute-averaged
/// variant for sensitivity analysis.
pub fn ect(
    before: &[Vec<f64>],
    after: &[Vec<f64>],
    attributes: &[String],
    table: &EmbeddingTable,
    per_attribute: bool,
) -> Result<EctResult> {
    if before.len() != after.len() {
        return Err(Error::Argument(format!(
            "before/after size mismatch: {} vs {}",
            before.len(),
            after.len()
        )));
    }
    if before.is_empty() {
        return Err(Error::Argument("ect over an empty identity set".into()));
    }
    let dim = before[0].len();
    let attr_vecs: Vec<Vec<f64>> = attributes
        .iter()
        .filter_map(|a| table.vector(a))
        .map(|v| lift_attribute(v, dim))
        .collect::<Result<_>>()?;
    if attr_vecs.is_empty() {
        return Err(Error::Argument(
            "no attribute token resolves in the vocabulary".into(),
        ));
    }

    if per_attribute {
        let mut rhos = Vec::with_capacity(attr_vecs.len());
        let mut ps = Vec::with_capacity(attr_vecs.len());
        for a in &attr_vecs {
            let xs: Vec<f64> = before.iter().map(|p| cosine(p, a)).collect::<Result<_>>()?;
            let ys: Vec<f64> = after.iter().map(|p| cosine(p, a)).collect::<Result<_>>()?;
            let (rho, p) = spearman(&xs, &ys)?;
            rhos.push(rho);
            ps.push(p);
        }
        let rho = rhos.iter().sum::<f64>() / rhos.len() as f64;
        let p = ps.iter().cloned().fold(0.0, f64::max);
        return Ok(EctResult {
            rho,
            p_value: p,
            n: before.len() * attr_vecs.len(),
        });
    }

    let mut xs = Vec::with_capacity(before.len() * attr_vecs.len());
    let mut ys = Vec::with_capacity(xs.capacity());
    for (p, q) in before.iter().zip(after) {
        for a in &attr_vecs {
            xs.push(cosine(p, a)?);
            ys.push(cosine(q, a)?);
        }
    }
    let (rho, p_value) = spearman(&xs, &ys)?;
    Ok(EctResult {
        rho,
        p_value,
        n: xs.len(),
    })
}

/// Rule-based English plural: +es after s/x/z/ch/sh, consonant+y -> ies,
/// otherwise +s.
pub fn pluralize(token: &str) -> String {
    let lower = token.to_lowercase();
    if lower.ends_with('s')
        || lower.ends_with('x')
        || lower.ends_with('z')
        || lower.ends_with("ch")
        || lower.ends_with("sh")
    {
        return format!("{token}es");
    }
    if let Some(stem) = token.strip_suffix('y') {
        let prev = stem.chars().last();
        if let Some(c) = prev {
            if !"aeiouAEIOU".contains(c) {
                return format!("{stem}ies");
            }
        }
    }
    format!("{token}s")
}

/// Accepted alternative completions per token. Identity matches are
/// always accepted separately, so self-mappings are stripped on load.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    map: HashMap<String, HashSet<String>>,
}

impl SynonymLexicon {
    pub fn empty() -> Self {
        SynonymLexicon::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: HashMap<String, Vec<String>> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                msg: e.to_string(),
            })?;
        let mut map = HashMap::new();
        for (token, syns) in raw {
            let set: HashSet<String> = syns.into_iter().filter(|s| *s != token).collect();
            map.insert(token, set);
        }
        Ok(SynonymLexicon { map })
    }

    pub fn accepts(&self, expected: &str, got: &str) -> bool {
        self.map
            .get(expected)
            .map(|s| s.contains(got))
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqtItem {
    pub query: String,
    pub expected: String,
    pub got: String,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqtResult {
    pub correct: usize,
    pub total: usize,
    pub skipped: usize,
    pub score: f64,
    pub p_value: f64,
    pub per_item: Vec<EqtItem>,
}

/// EQT via 3CosAdd: for each attribute pair (a+, a-) and each identity
/// pair (p, q) in the plan, query vec(a-) - vec(a+) + vec(p) and retrieve
/// the nearest candidate excluding p. Correct iff the hit is q, q's
/// rule-based plural, or a lexicon synonym of q. The p-value is an exact
/// one-sided binomial test against the uniform-chance baseline
/// 1/|candidates|.
pub fn eqt(
    plan: &PairingPlan,
    attribute_pairs: &[WordPair],
    table: &EmbeddingTable,
    candidates: &[(String, Vec<f64>)],
    lexicon: &SynonymLexicon,
) -> Result<EqtResult> {
    eqt_with_pool(plan, attribute_pairs, table, candidates, candidates, lexicon)
}

/// EQT with a retrieval pool decoupled from the identity set the pairing
/// plan indexes into (e.g. the full vocabulary for single-group targets).
pub fn eqt_with_pool(
    plan: &PairingPlan,
    attribute_pairs: &[WordPair],
    table: &EmbeddingTable,
    items: &[(String, Vec<f64>)],
    pool: &[(String, Vec<f64>)],
    lexicon: &SynonymLexicon,
) -> Result<EqtResult> {
    if pool.is_empty() {
        return Err(Error::Argument("eqt over an empty candidate set".into()));
    }
    let candidates = pool;
    let dim = items
        .first()
        .map(|(_, v)| v.len())
        .ok_or_else(|| Error::Argument("eqt over an empty identity set".into()))?;
    let mut per_item = Vec::new();
    let mut skipped = 0usize;
    let mut correct = 0usize;

    for ap in attribute_pairs {
        let (pos, neg) = match (table.vector(&ap.positive), table.vector(&ap.negative)) {
            (Some(p), Some(n)) => (lift_attribute(p, dim)?, lift_attribute(n, dim)?),
            _ => {
                skipped += plan.pairs.len();
                continue;
            }
        };
        for &(pi, qi) in &plan.pairs {
            let (p_label, p_vec) = &items[pi];
            let (q_label, _) = &items[qi];
            let query: Vec<f64> = neg
                .iter()
                .zip(&pos)
                .zip(p_vec)
                .map(|((n, p), w)| n - p + w)
                .collect();
            let mut exclude = HashSet::new();
            exclude.insert(p_label.as_str());
            let hits = nearest(
                candidates.iter().map(|(l, v)| (l.as_str(), v.as_slice())),
                &query,
                1,
                &exclude,
            )?;
            let got = &hits[0].0;
            let ok = got == q_label
                || *got == pluralize(q_label)
                || lexicon.accepts(q_label, got);
            if ok {
                correct += 1;
            }
            per_item.push(EqtItem {
                query: format!("{}:{}::{}", ap.positive, ap.negative, p_label),
                expected: q_label.clone(),
                got: got.clone(),
                correct: ok,
            });
        }
    }

    let total = per_item.len();
    if total == 0 {
        return Err(Error::Argument(
            "no analogy constructible: every attribute pair is out of vocabulary".into(),
        ));
    }
    let score = correct as f64 / total as f64;
    let chance = 1.0 / candidates.len() as f64;
    let p_value = binomial_p_geq(correct, total, chance);
    Ok(EqtResult {
        correct,
        total,
        skipped,
        score,
        p_value,
        per_item,
    })
}

/// One-sided exact binomial tail P(X >= correct) under success rate p0.
pub fn binomial_p_geq(correct: usize, total: usize, p0: f64) -> f64 {
    let dist = Binomial::new(p0, total as u64).expect("valid binomial");
    if correct == 0 {
        1.0
    } else {
        1.0 - dist.cdf(correct as u64 - 1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 for a single run.
    pub std: f64,
    /// Conservative combined p-value: max over runs.
    pub p_value: f64,
    pub single_run: bool,
}

/// Aggregate per-seed scores and their per-run p-values into mean, std
/// and a conservative combined p-value.
pub fn significance_summary(run_scores: &[f64], run_pvalues: &[f64]) -> Result<Summary> {
    if run_scores.is_empty() {
        return Err(Error::Argument("no runs to summarize".into()));
    }
    let n = run_scores.len() as f64;
    let mean = run_scores.iter().sum::<f64>() / n;
    let single_run = run_scores.len() == 1;
    let std = if single_run {
        0.0
    } else {
        (run_scores.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let p_value = run_pvalues.iter().cloned().fold(0.0, f64::max);
    Ok(Summary {
        mean,
        std,
        p_value,
        single_run,
    })
}
