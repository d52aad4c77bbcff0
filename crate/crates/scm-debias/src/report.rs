//! Experiment report assembly and rendering (CSV, markdown).
//!
//! Rounding happens only at render time; stored and CSV values carry
//! full precision so a report round-trips losslessly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Target;
use crate::embedding::CoverageReport;
use crate::error::{Error, Result};
use crate::eval::Summary;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedScores {
    pub seed: u64,
    pub ect_rho: f64,
    pub ect_p: f64,
    pub eqt_score: f64,
    pub eqt_p: f64,
    pub eqt_correct: usize,
    pub eqt_total: usize,
    pub eqt_skipped: usize,
}

/// Largest leftover projections onto the two applied (orthonormalized)
/// directions across all debiased vectors; near zero for LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub max_warmth_residual: f64,
    pub max_competence_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub model: String,
    pub target: Target,
    pub operator: String,
    pub operator_detail: String,
    pub status: CellStatus,
    pub ect: Option<Summary>,
    pub eqt: Option<Summary>,
    pub per_seed: Vec<SeedScores>,
    pub diagnostics: Option<ResidualDiagnostics>,
    pub identity_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub model: String,
    pub gender_coverage: CoverageReport,
    pub race_coverage: CoverageReport,
    pub warmth_pair_count: usize,
    pub competence_pair_count: usize,
    pub pair_shortfall: bool,
}

/// Everything needed to re-run the experiment bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seeds: Vec<u64>,
    pub top_k: usize,
    pub center: bool,
    pub ect_per_attribute: bool,
    pub eqt_full_vocab: bool,
    pub operators: Vec<String>,
    pub models: Vec<ModelProvenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn any_failed(&self) -> bool {
        self.cells
            .iter()
            .any(|c| !matches!(c.status, CellStatus::Ok))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn models(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.model.as_str()) {
                out.push(c.model.as_str());
            }
        }
        out
    }

    fn operators(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for c in &self.cells {
            if !out.iter().any(|(op, _)| *op == c.operator) {
                out.push((c.operator.as_str(), c.operator_detail.as_str()));
            }
        }
        out
    }

    fn cell(&self, model: &str, target: Target, operator: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.target == target && c.operator == operator)
    }

    /// One metric-by-operator summary table per model plus the cross-model
    /// aggregation table. Stds render to three decimals.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# Experiment report").unwrap();
        for model in self.models() {
            writeln!(out, "\n## {model}\n").unwrap();
            writeln!(out, "| | Race | Gender | Summed | Concatenated |").unwrap();
            writeln!(out, "|---|---|---|---|---|").unwrap();
            for (op, _) in self.operators() {
                for metric in ["ECT", "EQT"] {
                    write!(out, "| {metric}_{op} |").unwrap();
                    for target in Target::ALL {
                        let text = match self.cell(model, target, op) {
                            Some(c) if matches!(c.status, CellStatus::Ok) => {
                                let s = if metric == "ECT" { &c.ect } else { &c.eqt };
                                match s {
                                    Some(s) => format!("{:.4} ± {:.3}", s.mean, s.std),
                                    None => "—".into(),
                                }
                            }
                            Some(c) => match &c.status {
                                CellStatus::Failed(r) => format!("failed: {r}"),
                                CellStatus::Ok => unreachable!(),
                            },
                            None => "—".into(),
                        };
                        write!(out, " {text} |").unwrap();
                    }
                    writeln!(out).unwrap();
                }
            }
        }

        // cross-model means per aggregation method
        writeln!(out, "\n## Aggregation methods\n").unwrap();
        writeln!(out, "| Aggregation Method | Mean ECT | Mean EQT |").unwrap();
        writeln!(out, "|---|---|---|").unwrap();
        for (label, target) in [
            ("Summation", Target::Summed),
            ("Concatenation", Target::Concatenated),
        ] {
            let (ect, eqt) = self.aggregation_means(target);
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.4}"),
                None => "—".into(),
            };
            writeln!(out, "| {label} | {} | {} |", fmt(ect), fmt(eqt)).unwrap();
        }

        writeln!(out, "\n## Provenance\n").unwrap();
        let p = &self.provenance;
        writeln!(out, "- generator: {} seeds: {:?}", p.generator, p.seeds).unwrap();
        writeln!(
            out,
            "- top_k: {} center: {} ect_per_attribute: {} eqt_full_vocab: {}",
            p.top_k, p.center, p.ect_per_attribute, p.eqt_full_vocab
        )
        .unwrap();
        for op in &p.operators {
            writeln!(out, "- operator: {op}").unwrap();
        }
        for m in &p.models {
            writeln!(
                out,
                "- {}: gender coverage {:.4}, race coverage {:.4}, pairs {}W/{}C{}",
                m.model,
                m.gender_coverage.ratio,
                m.race_coverage.ratio,
                m.warmth_pair_count,
                m.competence_pair_count,
                if m.pair_shortfall { " (shortfall)" } else { "" }
            )
            .unwrap();
        }
        out
    }

    /// Mean of cell means over all models and operators for one target.
    fn aggregation_means(&self, target: Target) -> (Option<f64>, Option<f64>) {
        let mut ects = Vec::new();
        let mut eqts = Vec::new();
        for c in &self.cells {
            if c.target == target && matches!(c.status, CellStatus::Ok) {
                if let Some(s) = &c.ect {
                    ects.push(s.mean);
                }
                if let Some(s) = &c.eqt {
                    eqts.push(s.mean);
                }
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        (mean(&ects), mean(&eqts))
    }

    /// Full-precision CSV, one row per (cell, metric).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "model,target,operator,metric,mean,std,p_value,per_seed"
        )
        .unwrap();
        for c in &self.cells {
            for (metric, summary, per_seed) in [
                (
                    "ect",
                    &c.ect,
                    c.per_seed
                        .iter()
                        .map(|s| format!("{:?}", s.ect_rho))
                        .collect::<Vec<_>>(),
                ),
                (
                    "eqt",
                    &c.eqt,
                    c.per_seed
                        .iter()
                        .map(|s| format!("{:?}", s.eqt_score))
                        .collect::<Vec<_>>(),
                ),
            ] {
                match (&c.status, summary) {
                    (CellStatus::Ok, Some(s)) => {
                        writeln!(
                            out,
                            "{},{},{},{metric},{:?},{:?},{:?},{}",
                            c.model,
                            c.target,
                            c.operator,
                            s.mean,
                            s.std,
                            s.p_value,
                            per_seed.join(";")
                        )
                        .unwrap();
                    }
                    (CellStatus::Failed(reason), _) => {
                        writeln!(
                            out,
                            "{},{},{},{metric},failed,,,{}",
                            c.model,
                            c.target,
                            c.operator,
                            reason.replace(',', ";")
                        )
                        .unwrap();
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Parse the numeric rows of a CSV body emitted by `to_csv`.
    /// Returns (model, target, operator, metric) -> (mean, std, p_value).
    pub fn parse_csv(body: &str) -> BTreeMap<(String, String, String, String), (f64, f64, f64)> {
        let mut out = BTreeMap::new();
        for line in body.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 7 || fields[4] == "failed" {
                continue;
            }
            let key = (
                fields[0].to_string(),
                fields[1].to_string(),
                fields[2].to_string(),
                fields[3].to_string(),
            );
            let parse = |s: &str| s.parse::<f64>().unwrap();
            out.insert(key, (parse(fields[4]), parse(fields[5]), parse(fields[6])));
        }
        out
    }

    /// Write report.json plus the requested rendering into `dir`.
    pub fn emit(&self, dir: impl AsRef<Path>, format: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
        };
        write("report.json", &self.to_json())?;
        match format {
            "csv" => write("report.csv", &self.to_csv()),
            "markdown" => write("report.md", &self.to_markdown()),
            "both" => {
                write("report.csv", &self.to_csv())?;
                write("report.md", &self.to_markdown())
            }
            other => Err(Error::Argument(format!(
                "unknown report format {other:?} (expected csv, markdown, or both)"
            ))),
        }
    }
}
