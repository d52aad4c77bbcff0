//! Orchestration: run the full (models x targets x operators x seeds)
//! matrix and assemble the report. Cell failures are isolated; a corrupt
//! input for one model never aborts the rest of the matrix.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::compound::{build_compounds, random_pairing, Construction, PAIRING_RNG};
use crate::config::{ExperimentConfig, OperatorConfig, Target};
use crate::debias::{apply_subspace, applied_directions, ConcatMode, DebiasSpec};
use crate::embedding::{coverage, dot, load_embeddings, load_replacement_map, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{ect, eqt_with_pool, significance_summary, SynonymLexicon};
use crate::report::{
    CellReport, CellStatus, ExperimentReport, ModelProvenance, Provenance, ResidualDiagnostics,
    SeedScores,
};
use crate::subspace::{attribute_tokens, build_subspace, load_word_pairs, Axis, BiasSubspace};

/// Labelled vectors for one evaluation condition.
type Items = Vec<(String, Vec<f64>)>;

fn build_items(
    table: &EmbeddingTable,
    gender: &[String],
    race: &[String],
    target: Target,
) -> Result<Items> {
    match target {
        Target::Summed | Target::Concatenated => {
            let construction = if target == Target::Summed {
                Construction::Summed
            } else {
                Construction::Concatenated
            };
            let (compounds, _dropped) = build_compounds(table, gender, race, construction)?;
            Ok(compounds
                .into_iter()
                .map(|c| (c.label(), c.vec))
                .collect())
        }
        Target::RaceOnly | Target::GenderOnly => {
            let terms = if target == Target::RaceOnly { race } else { gender };
            Ok(terms
                .iter()
                .filter_map(|t| table.vector(t).map(|v| (t.clone(), v.to_vec())))
                .collect())
        }
    }
}

/// Largest |<w', u>| over both applied directions, blockwise for 2d
/// vectors under blockwise mode.
fn residual_diagnostics(
    after: &[Vec<f64>],
    subspace: &BiasSubspace,
    concat_mode: ConcatMode,
) -> Result<ResidualDiagnostics> {
    let (u_w, u_c) = applied_directions(subspace)?;
    let d = subspace.dim();
    let (lifted_w, lifted_c) = {
        let w = crate::compound::replicate_direction(&subspace.u_warmth);
        let c = crate::compound::replicate_direction(&subspace.u_competence);
        let c = crate::debias::orthogonalize(&w, &c)?;
        (w, c)
    };
    let mut max_w: f64 = 0.0;
    let mut max_c: f64 = 0.0;
    for v in after {
        if v.len() == d {
            max_w = max_w.max(dot(v, &u_w).abs());
            max_c = max_c.max(dot(v, &u_c).abs());
        } else if v.len() == 2 * d {
            match concat_mode {
                ConcatMode::Blockwise => {
                    for block in [&v[..d], &v[d..]] {
                        max_w = max_w.max(dot(block, &u_w).abs());
                        max_c = max_c.max(dot(block, &u_c).abs());
                    }
                }
                ConcatMode::Replicated => {
                    max_w = max_w.max(dot(v, &lifted_w).abs());
                    max_c = max_c.max(dot(v, &lifted_c).abs());
                }
            }
        }
    }
    Ok(ResidualDiagnostics {
        max_warmth_residual: max_w,
        max_competence_residual: max_c,
    })
}

struct ModelContext {
    name: String,
    table: EmbeddingTable,
    subspace: BiasSubspace,
    attributes: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    ctx: &ModelContext,
    config: &ExperimentConfig,
    gender: &[String],
    race: &[String],
    target: Target,
    op: &OperatorConfig,
    lexicon: &SynonymLexicon,
) -> Result<CellReport> {
    let spec: DebiasSpec = op.to_spec();
    let items = build_items(&ctx.table, gender, race, target)?;
    if items.len() < 2 {
        return Err(Error::Argument(format!(
            "target {target}: only {} identities resolve in the vocabulary",
            items.len()
        )));
    }
    let vectors: Vec<Vec<f64>> = items.iter().map(|(_, v)| v.clone()).collect();
    let debiased = apply_subspace(&vectors, &ctx.subspace, &spec, ctx.name.clone())?;
    let after_items: Items = items
        .iter()
        .zip(&debiased.after)
        .map(|((label, _), v)| (label.clone(), v.clone()))
        .collect();

    // full-vocabulary retrieval pool only makes sense at base dimension
    let full_pool: Option<Items> = if config.eqt_full_vocab
        && matches!(target, Target::RaceOnly | Target::GenderOnly)
    {
        let vocab: Vec<Vec<f64>> = ctx.table.entries().map(|(_, v)| v.to_vec()).collect();
        let deb = apply_subspace(&vocab, &ctx.subspace, &spec, ctx.name.clone())?;
        Some(
            ctx.table
                .tokens()
                .zip(deb.after)
                .map(|(t, v)| (t.to_string(), v))
                .collect(),
        )
    } else {
        None
    };

    let ect_result = ect(
        &debiased.before,
        &debiased.after,
        &ctx.attributes,
        &ctx.table,
        config.ect_per_attribute,
    )?;

    let attr_pairs: Vec<_> = ctx
        .subspace
        .warmth_pairs
        .iter()
        .chain(&ctx.subspace.competence_pairs)
        .cloned()
        .collect();

    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let plan = random_pairing(&after_items, seed)?;
        let pool = full_pool.as_deref().unwrap_or(&after_items);
        let eqt_result = eqt_with_pool(&plan, &attr_pairs, &ctx.table, &after_items, pool, lexicon)?;
        per_seed.push(SeedScores {
            seed,
            ect_rho: ect_result.rho,
            ect_p: ect_result.p_value,
            eqt_score: eqt_result.score,
            eqt_p: eqt_result.p_value,
            eqt_correct: eqt_result.correct,
            eqt_total: eqt_result.total,
            eqt_skipped: eqt_result.skipped,
        });
    }

    let ect_summary = significance_summary(
        &per_seed.iter().map(|s| s.ect_rho).collect::<Vec<_>>(),
        &per_seed.iter().map(|s| s.ect_p).collect::<Vec<_>>(),
    )?;
    let eqt_summary = significance_summary(
        &per_seed.iter().map(|s| s.eqt_score).collect::<Vec<_>>(),
        &per_seed.iter().map(|s| s.eqt_p).collect::<Vec<_>>(),
    )?;
    let diagnostics = residual_diagnostics(&debiased.after, &ctx.subspace, spec.concat_mode)?;

    Ok(CellReport {
        model: ctx.name.clone(),
        target,
        operator: spec.operator.short_name().to_string(),
        operator_detail: format!(
            "{} beta={} f={} concat_mode={}",
            spec.operator,
            spec.beta,
            spec.smoothing.describe(),
            spec.concat_mode
        ),
        status: CellStatus::Ok,
        ect: Some(ect_summary),
        eqt: Some(eqt_summary),
        per_seed,
        diagnostics: Some(diagnostics),
        identity_count: items.len(),
    })
}

fn failed_cell(model: &str, target: Target, op: &OperatorConfig, reason: String) -> CellReport {
    CellReport {
        model: model.to_string(),
        target,
        operator: op.operator.short_name().to_string(),
        operator_detail: op.operator.to_string(),
        status: CellStatus::Failed(reason),
        ect: None,
        eqt: None,
        per_seed: Vec::new(),
        diagnostics: None,
        identity_count: 0,
    }
}

/// Prepare one model: load the table, fit the subspace, collect coverage.
fn prepare_model(
    src: &crate::config::EmbeddingSource,
    config: &ExperimentConfig,
    gender: &[String],
    race: &[String],
    warmth_pairs: &[crate::subspace::WordPair],
    competence_pairs: &[crate::subspace::WordPair],
    replacements: &HashMap<String, String>,
) -> Result<(ModelContext, ModelProvenance)> {
    let format = src.format.parse()?;
    let table = load_embeddings(&src.path, format)?;
    let subspace = build_subspace(
        &table,
        warmth_pairs,
        competence_pairs,
        config.top_k,
        replacements,
        config.center,
    )?;
    let attributes = attribute_tokens(&subspace);
    let provenance = ModelProvenance {
        model: src.name.clone(),
        gender_coverage: coverage(&table, gender)?,
        race_coverage: coverage(&table, race)?,
        warmth_pair_count: subspace.warmth_pairs.len(),
        competence_pair_count: subspace.competence_pairs.len(),
        pair_shortfall: subspace.shortfall,
    };
    Ok((
        ModelContext {
            name: src.name.clone(),
            table,
            subspace,
            attributes,
        },
        provenance,
    ))
}

/// Run the full experiment matrix. Config validation problems return an
/// error before any work; all later failures land in cell status.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let gender = crate::compound::load_term_list(&config.gender_terms)?;
    let race = crate::compound::load_term_list(&config.race_terms)?;
    let warmth_pairs = load_word_pairs(&config.warmth_pairs, Axis::Warmth)?;
    let competence_pairs = load_word_pairs(&config.competence_pairs, Axis::Competence)?;
    let replacements = match &config.replacements {
        Some(p) => load_replacement_map(p)?,
        None => HashMap::new(),
    };
    let lexicon = match &config.lexicon {
        Some(p) => SynonymLexicon::load(p)?,
        None => SynonymLexicon::empty(),
    };

    let mut cells: Vec<CellReport> = Vec::new();
    let mut model_provenance = Vec::new();

    for src in &config.embeddings {
        match prepare_model(
            src,
            config,
            &gender,
            &race,
            &warmth_pairs,
            &competence_pairs,
            &replacements,
        ) {
            Ok((ctx, prov)) => {
                model_provenance.push(prov);
                let specs: Vec<(Target, &OperatorConfig)> = config
                    .constructions
                    .iter()
                    .flat_map(|&t| config.operators.iter().map(move |op| (t, op)))
                    .collect();
                let results = run_cells_parallel(&ctx, config, &gender, &race, &specs, &lexicon, jobs);
                cells.extend(results);
            }
            Err(e) => {
                log::error!("model {}: {e}", src.name);
                for &target in &config.constructions {
                    for op in &config.operators {
                        cells.push(failed_cell(&src.name, target, op, e.to_string()));
                    }
                }
            }
        }
    }

    Ok(ExperimentReport {
        provenance: Provenance {
            generator: PAIRING_RNG.to_string(),
            seeds: config.seeds.clone(),
            top_k: config.top_k,
            center: config.center,
            ect_per_attribute: config.ect_per_attribute,
            eqt_full_vocab: config.eqt_full_vocab,
            operators: config
                .operators
                .iter()
                .map(|op| {
                    let s = op.to_spec();
                    format!(
                        "{} beta={} f={} concat_mode={}",
                        s.operator,
                        s.beta,
                        s.smoothing.describe(),
                        s.concat_mode
                    )
                })
                .collect(),
            models: model_provenance,
        },
        cells,
    })
}

/// Cells are independent jobs; results merge in spec order regardless of
/// completion order.
fn run_cells_parallel(
    ctx: &ModelContext,
    config: &ExperimentConfig,
    gender: &[String],
    race: &[String],
    specs: &[(Target, &OperatorConfig)],
    lexicon: &SynonymLexicon,
    jobs: usize,
) -> Vec<CellReport> {
    let jobs = jobs.max(1).min(specs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, CellReport)>> = Mutex::new(Vec::with_capacity(specs.len()));

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= specs.len() {
                    break;
                }
                let (target, op) = specs[i];
                let cell = run_cell(ctx, config, gender, race, target, op, lexicon)
                    .unwrap_or_else(|e| failed_cell(&ctx.name, target, op, e.to_string()));
                results.lock().unwrap().push((i, cell));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, c)| c).collect()
}
