//! Loading and querying static word embedding tables in the common
//! plain-text formats (glove-text, word2vec-text).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// One record per line: `token f1 f2 ... fd`. No header.
    GloveText,
    /// Same records preceded by a `count dim` header line.
    Word2VecText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glove-text" => Ok(EmbeddingFormat::GloveText),
            "word2vec-text" => Ok(EmbeddingFormat::Word2VecText),
            other => Err(Error::Argument(format!(
                "unknown embedding format {other:?} (expected glove-text or word2vec-text)"
            ))),
        }
    }
}

/// An immutable vocabulary -> dense vector map with fixed dimensionality.
/// All arithmetic downstream is f64 regardless of file precision.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    // Flat row-major storage, entry i at [i*dim .. (i+1)*dim].
    data: Vec<f64>,
    source_tag: String,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimensionality must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            source_tag: source_tag.into(),
        })
    }

    /// Insert an entry. First occurrence of a duplicate token wins.
    /// Returns false (and leaves the table unchanged) on a duplicate.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<bool> {
        let token = token.trim();
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::Argument(format!("invalid token {token:?}")));
        }
        if vector.len() != self.dim {
            return Err(Error::Format(format!(
                "token {token:?}: expected {} components, got {}",
                self.dim,
                vector.len()
            )));
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::Format(format!(
                "token {token:?}: non-finite component {bad}"
            )));
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.data.extend_from_slice(&vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Exact-match lookup. Absence is a miss, not an error; the caller
    /// decides whether to drop or replace.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), &self.data[i * self.dim..(i + 1) * self.dim]))
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CoverageReport {
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
    pub missing: Vec<String>,
}

/// Fraction of a term list present in the table's vocabulary.
/// `missing` preserves the input order of absent terms.
pub fn coverage(table: &EmbeddingTable, terms: &[String]) -> Result<CoverageReport> {
    if terms.is_empty() {
        return Err(Error::Argument("coverage over an empty term list".into()));
    }
    let missing: Vec<String> = terms
        .iter()
        .filter(|t| !table.contains(t))
        .cloned()
        .collect();
    let covered = terms.len() - missing.len();
    Ok(CoverageReport {
        covered,
        total: terms.len(),
        ratio: covered as f64 / terms.len() as f64,
        missing,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "cosine over mismatched lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("cosine of a zero-norm vector".into()));
    }
    Ok(dot(a, b) / (na * nb))
}

/// Top-k candidates by cosine similarity to `query`, descending.
/// Ties break by ascending token order so results are deterministic.
pub fn nearest<'a, I>(
    candidates: I,
    query: &[f64],
    k: usize,
    exclude: &HashSet<&str>,
) -> Result<Vec<(String, f64)>>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    if k == 0 {
        return Err(Error::Argument("nearest with k = 0".into()));
    }
    let mut scored: Vec<(String, f64)> = Vec::new();
    for (token, vec) in candidates {
        if exclude.contains(token) {
            continue;
        }
        scored.push((token.to_string(), cosine(query, vec)?));
    }
    if scored.is_empty() {
        return Err(Error::Argument(
            "nearest over an empty candidate pool".into(),
        ));
    }
    scored.sort_by(|(ta, sa), (tb, sb)| {
        sb.partial_cmp(sa)
            .expect("finite similarities")
            .then_with(|| ta.cmp(tb))
    });
    scored.truncate(k);
    Ok(scored)
}

impl EmbeddingTable {
    pub fn nearest(
        &self,
        query: &[f64],
        k: usize,
        exclude: &HashSet<&str>,
    ) -> Result<Vec<(String, f64)>> {
        nearest(self.entries(), query, k, exclude)
    }
}

fn parse_record(
    path: &Path,
    line_no: usize,
    line: &str,
    expected_dim: Option<usize>,
) -> Result<(String, Vec<f64>)> {
    let mut fields = line.split_whitespace();
    let token = fields
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: "empty record".into(),
        })?
        .to_string();
    let mut vector = Vec::with_capacity(expected_dim.unwrap_or(64));
    for field in fields {
        let x: f64 = field.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("non-numeric component {field:?}"),
        })?;
        vector.push(x);
    }
    if vector.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("token {token:?} has no components"),
        });
    }
    if let Some(d) = expected_dim {
        if vector.len() != d {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected {d} components, got {}", vector.len()),
            });
        }
    }
    Ok((token, vector))
}

/// Load a plain-text embedding file. Dimensionality comes from the header
/// (word2vec-text) or the first record (glove-text); every later record
/// must agree. Duplicate tokens keep the first occurrence.
pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let mut declared_count = None;
    let mut dim = None;
    if format == EmbeddingFormat::Word2VecText {
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing word2vec header line".into(),
        })?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("malformed header {first:?} (expected \"count dim\")"),
            });
        }
        let count: usize = fields[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("non-numeric count {:?}", fields[0]),
        })?;
        let d: usize = fields[1].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("non-numeric dim {:?}", fields[1]),
        })?;
        declared_count = Some(count);
        dim = Some(d);
    }

    let mut table: Option<EmbeddingTable> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (token, vector) = parse_record(path, line_no, &line, dim)?;
        let table = match table.as_mut() {
            Some(t) => t,
            None => {
                dim = Some(vector.len());
                table = Some(EmbeddingTable::new(
                    vector.len(),
                    path.display().to_string(),
                )?);
                table.as_mut().unwrap()
            }
        };
        if !table.insert(&token, vector)? {
            log::warn!(
                "{}:{line_no}: duplicate token {token:?}, keeping first occurrence",
                path.display()
            );
        }
    }

    let table = table.ok_or_else(|| Error::Format(format!("{}: no records", path.display())))?;
    if let Some(count) = declared_count {
        if table.len() != count {
            log::warn!(
                "{}: header declares {count} entries, found {}",
                path.display(),
                table.len()
            );
        }
    }
    Ok(table)
}

/// Write a table in glove-text format so it can be re-loaded by
/// `load_embeddings`. Values use the shortest round-trip representation.
pub fn write_glove_text(table: &EmbeddingTable, w: &mut impl std::io::Write) -> std::io::Result<()> {
    for (token, vec) in table.entries() {
        write!(w, "{token}")?;
        for x in vec {
            write!(w, " {x:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Declarative OOV replacement map: `original substitute` per line.
pub fn load_replacement_map(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected two columns, got {}", fields.len()),
            });
        }
        map.insert(fields[0].to_string(), fields[1].to_string());
    }
    Ok(map)
}

/// Resolve a token against the table, consulting the replacement map
/// before giving up. Returns the token actually present in the vocabulary.
pub fn resolve_token<'a>(
    table: &EmbeddingTable,
    replacements: &'a HashMap<String, String>,
    token: &'a str,
) -> Option<&'a str> {
    if table.contains(token) {
        return Some(token);
    }
    replacements
        .get(token)
        .map(String::as_str)
        .filter(|sub| table.contains(sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_minimal_glove_file() {
        let f = write_temp("a 1.0 0.0\nb 0.0 1.0\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.vector("a").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn loads_word2vec_with_header() {
        let f = write_temp("2 3\na 1 2 3\nb 4 5 6\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::Word2VecText).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn inconsistent_row_names_line() {
        let mut contents = String::new();
        for i in 0..4 {
            contents.push_str(&format!("t{i} 1 2 3\n"));
        }
        contents.push_str("bad 1 2\n");
        let f = write_temp(&contents);
        let err = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_component_is_parse_error() {
        let f = write_temp("a 1.0 oops\n");
        assert!(matches!(
            load_embeddings(f.path(), EmbeddingFormat::GloveText),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn duplicate_token_keeps_first() {
        let f = write_temp("a 1 0\na 9 9\nb 0 1\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.vector("a").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn roundtrip_preserves_digits() {
        let f = write_temp("a 0.123456789012345 -1.5e-7\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        assert_eq!(t.vector("a").unwrap(), &[0.123456789012345, -1.5e-7]);

        let mut buf = Vec::new();
        write_glove_text(&t, &mut buf).unwrap();
        let f2 = write_temp(std::str::from_utf8(&buf).unwrap());
        let t2 = load_embeddings(f2.path(), EmbeddingFormat::GloveText).unwrap();
        assert_eq!(t2.vector("a").unwrap(), t.vector("a").unwrap());
    }

    #[test]
    fn coverage_examples() {
        let f = write_temp("a 1 0\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let r = coverage(&t, &["a".into(), "b".into()]).unwrap();
        assert_eq!(r.ratio, 0.5);
        assert_eq!(r.missing, vec!["b"]);

        let f = write_temp("a 1 0\nb 0 1\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let r = coverage(&t, &["a".into()]).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(r.missing.is_empty());

        assert!(matches!(
            coverage(&t, &[]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn coverage_zero_when_nothing_found() {
        let f = write_temp("q 1 0\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let r = coverage(&t, &["x".into(), "y".into(), "z".into()]).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert_eq!(r.missing, vec!["x", "y", "z"]);
    }

    #[test]
    fn lookup_miss_is_none() {
        let f = write_temp("a 1 0\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        assert!(t.vector("zzz").is_none());
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn nearest_self_and_exclusion() {
        let f = write_temp("a 1 0\nb 0.9 0.1\nc 0 1\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let q = [1.0, 0.0];

        let hits = t.nearest(&q, 1, &HashSet::new()).unwrap();
        assert_eq!(hits[0].0, "a");
        assert!((hits[0].1 - 1.0).abs() < 1e-12);

        let mut excl = HashSet::new();
        excl.insert("a");
        let hits = t.nearest(&q, 3, &excl).unwrap();
        assert!(hits.iter().all(|(tok, _)| tok != "a"));
    }

    #[test]
    fn nearest_matches_brute_force_order() {
        let f = write_temp("a 1 0\nb 0.5 0.5\nc -1 0.2\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let q = [1.0, 0.1];
        let hits = t.nearest(&q, 3, &HashSet::new()).unwrap();

        let mut brute: Vec<(String, f64)> = t
            .entries()
            .map(|(tok, v)| (tok.to_string(), cosine(&q, v).unwrap()))
            .collect();
        brute.sort_by(|(ta, sa), (tb, sb)| sb.partial_cmp(sa).unwrap().then_with(|| ta.cmp(tb)));
        assert_eq!(hits, brute);
    }

    #[test]
    fn replacement_map_resolution() {
        let f = write_temp("b 1 0\n");
        let t = load_embeddings(f.path(), EmbeddingFormat::GloveText).unwrap();
        let m = write_temp("a b\nx y\n");
        let map = load_replacement_map(m.path()).unwrap();
        assert_eq!(resolve_token(&t, &map, "a"), Some("b"));
        assert_eq!(resolve_token(&t, &map, "b"), Some("b"));
        assert_eq!(resolve_token(&t, &map, "x"), None);
    }
}
