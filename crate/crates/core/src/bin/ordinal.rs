use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use ordinal_outcome::cohort::{CohortTable, Schema};
use ordinal_outcome::error::{Error, Result};
use ordinal_outcome::importance::{
    aggregate_importance, coalition_values, exact_shapley_all, sampled_shapley_all, PatientAttribution, MAX_EXACT_TOKENS,
};
use ordinal_outcome::models::TrainedModel;
use ordinal_outcome::outcome::{conditional_exceedance, Threshold, ThresholdProfile, CATEGORY_LABELS, THRESHOLD_LABELS};
use ordinal_outcome::pipeline::{self, Family, ModelArtifact, RunConfig};
use ordinal_outcome::rng;
use ordinal_outcome::synthetic::{generate_cohort, CohortSpec};
use ordinal_outcome::validation::GridProfile;

#[derive(Parser)]
#[command(name = "ordinal", version, about = "Ordinal outcome models: synthesis, cross-validated evaluation, reports, token importance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (cohort.csv, schema.json, truth.json).
    Synth(SynthArgs),
    /// Cross-validate model families and write pooled predictions, metrics and models.
    Run(RunArgs),
    /// Print a threshold profile and conditional exceedances along a chain.
    Report(ReportArgs),
    /// Shapley token importance of a token model over a cohort.
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1550)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Existing output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Cohort spec JSON; overrides --n only when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.15)]
    val_frac: f64,
    #[arg(long, default_value_t = 1000)]
    boot: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = GridProfile::Desk)]
    grid: GridProfile,
    /// Comma-separated families, e.g. mnlr,polr,ecpm_deep_or,apm_or.
    #[arg(long, value_delimiter = ',', default_value = "mnlr,polr")]
    models: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Repeats after which configuration dropout runs (default 1,2,4,...).
    #[arg(long, value_delimiter = ',')]
    dropout_after: Option<Vec<usize>>,
    /// Cap on training epochs for network models.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = ordinal_outcome::tokenizer::DEFAULT_BINS)]
    bins: usize,
    /// Skip refitting the chosen configuration on the full cohort.
    #[arg(long)]
    no_final_model: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// model.json written by `run`.
    #[arg(long, requires = "patient")]
    model: Option<PathBuf>,
    #[arg(long, requires = "patient")]
    cohort: Option<PathBuf>,
    #[arg(long)]
    patient: Option<String>,
    /// Six comma-separated exceedance probabilities instead of a model.
    #[arg(long, value_delimiter = ',', conflicts_with = "model")]
    profile: Option<Vec<f64>>,
    /// Thresholds low to high; the first conditions the rest.
    #[arg(long, value_delimiter = ',', default_value = ">1")]
    chain: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cohort: PathBuf,
    /// Permutations per patient when a patient has more than 12 tokens.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

enum Failure {
    Usage(String),
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Importance(a) => importance(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn require_dir(p: &Path) -> std::result::Result<(), Failure> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("output directory {} does not exist", p.display())))
    }
}

fn synth(a: SynthArgs) -> std::result::Result<(), Failure> {
    require_dir(&a.out)?;
    let spec = match &a.spec {
        Some(p) => CohortSpec::load(p)?,
        None => CohortSpec::desk(a.n, a.seed),
    };
    let cohort = generate_cohort(&spec)?;
    cohort.table.write_csv(&a.out.join("cohort.csv"))?;
    cohort.table.schema.save(&a.out.join("schema.json"))?;
    spec.save(&a.out.join("truth.json"))?;
    println!("wrote {} patients to {}", spec.n, a.out.display());
    Ok(())
}

fn load_cohort(cohort: &Path, schema: &Path) -> Result<CohortTable> {
    let schema = Schema::load(schema)?;
    CohortTable::read_csv(cohort, &schema)
}

fn run(a: RunArgs) -> std::result::Result<(), Failure> {
    let families = a.models.iter().map(|m| Family::parse(m)).collect::<Result<Vec<_>>>()?;
    let mut cfg = RunConfig::new(families);
    cfg.seed = a.seed;
    cfg.repeats = a.repeats;
    cfg.folds = a.folds;
    cfg.val_frac = a.val_frac;
    cfg.boot = a.boot;
    cfg.alpha = a.alpha;
    cfg.grid = a.grid;
    cfg.jobs = a.jobs;
    cfg.dropout_after = a.dropout_after.unwrap_or_else(|| RunConfig::default_schedule(a.repeats));
    cfg.max_epochs = a.epochs;
    cfg.n_bins = a.bins;
    cfg.final_model = !a.no_final_model;
    cfg.validate()?;
    let table = load_cohort(&a.cohort, &a.schema)?;
    let out = pipeline::run(&table, &cfg)?;
    pipeline::write_outputs(&a.out, &table, &cfg, &out)?;
    for f in &out.families {
        let m = &f.metrics;
        if let Some(r) = m.report("ORC", None) {
            println!("{:<16} {:<14} ORC {:.3} [{:.3}, {:.3}]", m.family, m.chosen_config, r.estimate, r.ci_low, r.ci_high);
        }
    }
    if out.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{} training tasks failed; see manifest.json", out.failures.len())))
    }
}

fn report(a: ReportArgs) -> std::result::Result<(), Failure> {
    let chain = a
        .chain
        .iter()
        .map(|s| s.trim().parse::<Threshold>())
        .collect::<Result<Vec<_>>>()?;
    if chain.is_empty() || chain.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::Usage("chain thresholds must be strictly increasing".into()));
    }
    let (who, q) = match (&a.profile, &a.model, &a.cohort, &a.patient) {
        (Some(p), _, _, _) => {
            let q: [f64; 6] = p
                .as_slice()
                .try_into()
                .map_err(|_| Failure::Usage(format!("--profile needs 6 values, got {}", p.len())))?;
            ("profile".to_string(), ThresholdProfile::new(q)?)
        }
        (None, Some(m), Some(c), Some(id)) => {
            let art = ModelArtifact::load(m)?;
            let table = CohortTable::read_csv(c, &art.schema)?;
            let row = table.find(id).ok_or_else(|| Failure::Usage(format!("patient '{id}' not in cohort")))?;
            (format!("{id} ({})", art.family), art.predict_row(&table, row, a.seed)?.profile)
        }
        _ => return Err(Failure::Usage("give --profile, or --model with --cohort and --patient".into())),
    };
    let lower = chain[0];
    let mut lines = Vec::new();
    for &h in &chain[1..] {
        let v = conditional_exceedance(&q, lower, h);
        lines.push((h, v));
    }
    if a.json {
        let conds: Vec<serde_json::Value> = lines
            .iter()
            .map(|(h, v)| match v {
                Ok(p) => serde_json::json!({"given": lower.label(), "threshold": h.label(), "probability": p}),
                Err(e) => serde_json::json!({"given": lower.label(), "threshold": h.label(), "error": e.to_string()}),
            })
            .collect();
        let out = serde_json::json!({
            "patient": who,
            "profile": THRESHOLD_LABELS.iter().zip(q.q).map(|(t, p)| serde_json::json!({"threshold": t, "probability": p})).collect::<Vec<_>>(),
            "unconditional": {"threshold": lower.label(), "probability": q.at(lower)},
            "conditional": conds,
        });
        println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
        return Ok(());
    }
    println!("patient: {who}");
    for (t, p) in THRESHOLD_LABELS.iter().zip(q.q) {
        println!("  Pr(GOSE {t}) = {:.1}%", 100.0 * p);
    }
    println!("Pr(GOSE {}) = {:.1}%", lower.label(), 100.0 * q.at(lower));
    for (h, v) in lines {
        match v {
            Ok(p) => println!("Pr(GOSE {} | GOSE {}) = {:.1}%", h.label(), lower.label(), 100.0 * p),
            Err(e) => println!("Pr(GOSE {} | GOSE {}) = undefined [{e}]", h.label(), lower.label()),
        }
    }
    Ok(())
}

fn importance(a: ImportanceArgs) -> std::result::Result<(), Failure> {
    require_dir(&a.out)?;
    let art = ModelArtifact::load(&a.model)?;
    let TrainedModel::Neural(model) = art.trained()? else {
        return Err(Failure::Usage(format!("{} is not a token model", art.family)));
    };
    if !art.model.kind.is_token_model() {
        return Err(Failure::Usage(format!("{} is not a token model", art.family)));
    }
    let table = CohortTable::read_csv(&a.cohort, &art.schema)?;
    let rows: Vec<(Vec<String>, Vec<u32>)> =
        (0..table.len()).map(|r| art.token_indices(&table, r).expect("token model")).collect();
    if a.samples == 0 {
        if let Some((r, (_, idx))) = rows.iter().enumerate().find(|(_, (_, i))| i.len() > MAX_EXACT_TOKENS) {
            return Err(Failure::Usage(format!(
                "patient {} has {} tokens; exact enumeration allows {MAX_EXACT_TOKENS}, so --samples must be positive",
                table.records[r].id,
                idx.len()
            )));
        }
    }
    let dict = match &art.preprocessing {
        pipeline::Preprocessing::Tokens { dictionary, .. } => dictionary,
        _ => return Err(Failure::Usage("model has no token dictionary".into())),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.max(1)).build().map_err(|e| Failure::Usage(e.to_string()))?;
    let attrs: Vec<(PatientAttribution, Vec<f64>, Vec<f64>)> = pool.install(|| {
        rows.par_iter()
            .enumerate()
            .map(|(r, (_, idx))| {
                let phi = if idx.len() <= MAX_EXACT_TOKENS {
                    exact_shapley_all(&model, idx)?
                } else {
                    sampled_shapley_all(&model, idx, a.samples, rng::derive_seed(a.seed, &[r as u64]))?
                };
                let tokens = idx.iter().map(|&i| dict.token_at(i).unwrap_or("<unrecognised>").to_string()).collect();
                let full = coalition_values(&model, idx)?;
                let empty = coalition_values(&model, &[])?;
                Ok((PatientAttribution { patient: table.records[r].id.clone(), partition: 0, tokens, phi }, full, empty))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let nodes: Vec<String> = match model.encoding() {
        ordinal_outcome::models::OutputEncoding::Multinomial => CATEGORY_LABELS.iter().map(|c| format!("GOSE={c}")).collect(),
        ordinal_outcome::models::OutputEncoding::Ordinal => THRESHOLD_LABELS.iter().map(|t| format!("GOSE{t}")).collect(),
    };
    let plain: Vec<PatientAttribution> = attrs.iter().map(|a| a.0.clone()).collect();
    let table_out = aggregate_importance(&plain, &nodes)?;
    table_out.write_csv(std::fs::File::create(a.out.join("importance.csv")).map_err(Error::from)?)?;
    std::fs::write(a.out.join("ranking.json"), serde_json::to_string_pretty(&table_out.ranking_json()).map_err(Error::from)?)
        .map_err(Error::from)?;
    let detail: Vec<serde_json::Value> = attrs
        .iter()
        .map(|(p, full, empty)| serde_json::json!({"patient": p.patient, "tokens": p.tokens, "phi": p.phi, "full": full, "empty": empty}))
        .collect();
    std::fs::write(a.out.join("attributions.json"), serde_json::to_string(&detail).map_err(Error::from)?).map_err(Error::from)?;
    for (p, s) in table_out.predictors.iter().take(10) {
        println!("{p:<20} {s:.5}");
    }
    Ok(())
}
