use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scm_debias::compound::load_term_list;
use scm_debias::config::{ExperimentConfig, Target};
use scm_debias::debias::{apply_subspace, applied_directions, Operator};
use scm_debias::embedding::{
    cosine, load_embeddings, load_replacement_map, norm, write_glove_text, EmbeddingFormat,
    EmbeddingTable,
};
use scm_debias::error::Error;
use scm_debias::eval::ect;
use scm_debias::report::ExperimentReport;
use scm_debias::runner::run_experiment;
use scm_debias::subspace::{build_subspace, load_word_pairs, Axis, BiasSubspace};

#[derive(Parser)]
#[command(name = "scm-debias", version, about = "SCM-based intersectional debiasing for static word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the bias subspace only and print direction diagnostics.
    Fit(FitArgs),
    /// Emit debiased vectors to a glove-text file.
    Debias(DebiasArgs),
    /// Score existing before/after embedding files with ECT.
    Eval(EvalArgs),
    /// Run the full experiment matrix from a config file.
    Run(RunArgs),
    /// Re-render an existing report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct DebiasArgs {
    #[arg(long)]
    config: PathBuf,
    /// Embedding source name from the config (default: first).
    #[arg(long)]
    model: Option<String>,
    /// Which identity set to debias.
    #[arg(long, default_value = "summed")]
    target: String,
    /// Operator: subtraction | linear_projection | partial_projection.
    #[arg(long, default_value = "linear_projection")]
    operator: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding file before debiasing (glove-text).
    #[arg(long)]
    before: PathBuf,
    /// Embedding file after debiasing (glove-text), same vocabulary.
    #[arg(long)]
    after: PathBuf,
    /// Attribute term list, one token per line; resolved in `before`.
    #[arg(long)]
    attributes: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seeds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "both")]
    format: String,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a report.json produced by `run`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "both")]
    format: String,
}

fn fit_model_subspace(
    config: &ExperimentConfig,
    name: &str,
) -> Result<(EmbeddingTable, BiasSubspace), Error> {
    let src = config
        .embeddings
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Config(format!("no embedding source named {name:?}")))?;
    let table = load_embeddings(&src.path, src.format.parse()?)?;
    let warmth = load_word_pairs(&config.warmth_pairs, Axis::Warmth)?;
    let competence = load_word_pairs(&config.competence_pairs, Axis::Competence)?;
    let replacements = match &config.replacements {
        Some(p) => load_replacement_map(p)?,
        None => HashMap::new(),
    };
    let subspace = build_subspace(
        &table,
        &warmth,
        &competence,
        config.top_k,
        &replacements,
        config.center,
    )?;
    Ok((table, subspace))
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let config = ExperimentConfig::load(&args.config)?;
    for src in &config.embeddings {
        let (table, sub) = fit_model_subspace(&config, &src.name)?;
        let (u_w, u_c_orth) = applied_directions(&sub)?;
        println!("model {}: dim={} vocab={}", src.name, table.dim(), table.len());
        println!(
            "  warmth: {} pairs, ||u||={:.9}",
            sub.warmth_pairs.len(),
            norm(&sub.u_warmth)
        );
        println!(
            "  competence: {} pairs, ||u||={:.9}",
            sub.competence_pairs.len(),
            norm(&sub.u_competence)
        );
        println!(
            "  cos(u_warmth, u_competence) = {:.6}",
            cosine(&sub.u_warmth, &sub.u_competence)?
        );
        println!(
            "  orthogonalized: <u_warmth, u_competence'> = {:.3e}",
            scm_debias::embedding::dot(&u_w, &u_c_orth)
        );
        if sub.shortfall {
            println!("  warning: fewer than top_k={} pairs resolved", config.top_k);
        }
        let names = |pairs: &[scm_debias::subspace::WordPair]| {
            pairs
                .iter()
                .map(|p| format!("{}-{}", p.positive, p.negative))
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!("  warmth pairs: {}", names(&sub.warmth_pairs));
        println!("  competence pairs: {}", names(&sub.competence_pairs));
    }
    Ok(())
}

fn parse_operator(s: &str) -> Result<Operator, Error> {
    match s {
        "subtraction" | "sub" => Ok(Operator::Subtraction),
        "linear_projection" | "lp" => Ok(Operator::LinearProjection),
        "partial_projection" | "pp" => Ok(Operator::PartialProjection),
        other => Err(Error::Argument(format!("unknown operator {other:?}"))),
    }
}

fn parse_target(s: &str) -> Result<Target, Error> {
    match s {
        "summed" => Ok(Target::Summed),
        "concatenated" => Ok(Target::Concatenated),
        "race_only" => Ok(Target::RaceOnly),
        "gender_only" => Ok(Target::GenderOnly),
        other => Err(Error::Argument(format!("unknown target {other:?}"))),
    }
}

fn cmd_debias(args: &DebiasArgs) -> Result<(), Error> {
    let config = ExperimentConfig::load(&args.config)?;
    let model = args
        .model
        .clone()
        .unwrap_or_else(|| config.embeddings[0].name.clone());
    let (table, subspace) = fit_model_subspace(&config, &model)?;
    let operator = parse_operator(&args.operator)?;
    let spec = config
        .operators
        .iter()
        .find(|op| op.operator == operator)
        .map(|op| op.to_spec())
        .unwrap_or_else(|| scm_debias::debias::DebiasSpec::new(operator));
    let target = parse_target(&args.target)?;

    let gender = load_term_list(&config.gender_terms)?;
    let race = load_term_list(&config.race_terms)?;
    let items: Vec<(String, Vec<f64>)> = match target {
        Target::Summed | Target::Concatenated => {
            let construction = if target == Target::Summed {
                scm_debias::compound::Construction::Summed
            } else {
                scm_debias::compound::Construction::Concatenated
            };
            let (compounds, _) =
                scm_debias::compound::build_compounds(&table, &gender, &race, construction)?;
            compounds.into_iter().map(|c| (c.label(), c.vec)).collect()
        }
        Target::RaceOnly | Target::GenderOnly => {
            let terms = if target == Target::RaceOnly { &race } else { &gender };
            terms
                .iter()
                .filter_map(|t| table.vector(t).map(|v| (t.clone(), v.to_vec())))
                .collect()
        }
    };
    if items.is_empty() {
        return Err(Error::Argument("no identity resolves in the vocabulary".into()));
    }
    let vectors: Vec<Vec<f64>> = items.iter().map(|(_, v)| v.clone()).collect();
    let debiased = apply_subspace(&vectors, &subspace, &spec, model.clone())?;

    let mut out = EmbeddingTable::new(debiased.after[0].len(), model)?;
    for ((label, _), vec) in items.iter().zip(&debiased.after) {
        out.insert(label, vec.clone())?;
    }
    let mut file = std::fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_glove_text(&out, &mut file).map_err(|e| Error::io(&args.out, e))?;
    println!("wrote {} debiased vectors to {}", out.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let before = load_embeddings(&args.before, EmbeddingFormat::GloveText)?;
    let after = load_embeddings(&args.after, EmbeddingFormat::GloveText)?;
    let attributes = load_term_list(&args.attributes)?;

    let mut before_vecs = Vec::new();
    let mut after_vecs = Vec::new();
    for (token, v) in before.entries() {
        if let Some(w) = after.vector(token) {
            before_vecs.push(v.to_vec());
            after_vecs.push(w.to_vec());
        }
    }
    if before_vecs.is_empty() {
        return Err(Error::Argument(
            "before/after files share no vocabulary".into(),
        ));
    }
    let result = ect(&before_vecs, &after_vecs, &attributes, &before, false)?;
    println!(
        "ect rho={:.6} p={:.3e} n={} (over {} shared tokens)",
        result.rho,
        result.p_value,
        result.n,
        before_vecs.len()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<bool, Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        if seeds.is_empty() {
            return Err(Error::Config("--seeds override is empty".into()));
        }
        config.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    let report = run_experiment(&config, args.jobs)?;
    report.emit(&config.output_dir, &args.format)?;
    let failed: Vec<_> = report
        .cells
        .iter()
        .filter(|c| !matches!(c.status, scm_debias::report::CellStatus::Ok))
        .collect();
    println!(
        "{} cells, {} failed; report written to {}",
        report.cells.len(),
        failed.len(),
        config.output_dir.display()
    );
    for c in &failed {
        if let scm_debias::report::CellStatus::Failed(reason) = &c.status {
            eprintln!("failed cell {}/{}/{}: {reason}", c.model, c.target, c.operator);
        }
    }
    Ok(report.any_failed())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Error> {
    let report = ExperimentReport::from_json_file(&args.report)?;
    report.emit(&args.out, &args.format)?;
    println!("re-rendered report to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(args) => cmd_fit(args).map(|()| false),
        Command::Debias(args) => cmd_debias(args).map(|()| false),
        Command::Eval(args) => cmd_eval(args).map(|()| false),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args).map(|()| false),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
