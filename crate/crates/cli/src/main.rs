use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use construct_forge::generate::{
    generate_llm, generate_synthetic, render_prompt, replay_file, LlmClient, PlantedModel, PromptTemplate, Source,
    Transcript,
};
use construct_forge::report::{compare_to_reference, run_pipeline, PipelineConfig, Tolerances};
use construct_forge::{
    builtin_model, parse_model, DedupKey, Error, ErrorClass, GroupTest, ItemSet, ModelSpec, Preset, WeightingScheme,
};

/// LLM-panel PLS-SEM measurement workbench.
#[derive(Parser)]
#[command(name = "construct-forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce a respondent panel from the LLM or the planted model.
    Generate(GenerateArgs),
    /// Run the full analysis pipeline and write the report bundle.
    Fit(FitArgs),
    /// Check a report bundle against reference tables.
    Compare(CompareArgs),
    /// Rebuild a panel from a recorded LLM transcript without network access.
    Replay(ReplayArgs),
    /// Print a built-in model, planted model or rendered prompt.
    Show(ShowArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Pipeline config JSON; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    study: Option<String>,
    /// Custom model JSON instead of a study preset.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    items: Option<ItemSet>,
    #[arg(long)]
    source: Option<Source>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Planted model JSON (synthetic source).
    #[arg(long)]
    planted: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    retry_limit: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Pipeline config JSON; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    items: Option<ItemSet>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use a recorded LLM transcript as the data source.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    dedup: Option<DedupKey>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    auto_drop: Option<f64>,
    #[arg(long)]
    weighting_scheme: Option<WeightingScheme>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    group_test: Option<GroupTest>,
    /// Skip the group comparison.
    #[arg(long)]
    no_groups: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Per-table tolerance, TABLE=EPS (repeatable).
    #[arg(long = "tol")]
    tol: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Per-table tolerance, TABLE=EPS (repeatable); `default=EPS` sets the fallback.
    #[arg(long = "tol", num_args = 1..)]
    tol: Vec<String>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long, conflicts_with = "model")]
    study: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    items: Option<ItemSet>,
    /// Output panel CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShowArgs {
    /// One of: model, planted, prompt.
    what: String,
    #[arg(long, default_value = "study1")]
    study: String,
    #[arg(long)]
    items: Option<ItemSet>,
    #[arg(long)]
    rows: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Comparison => 4,
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig, Error> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_model(study: Option<&str>, model: Option<&Path>, items: ItemSet) -> Result<ModelSpec, Error> {
    match (model, study) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_model(&text)
        }
        (None, Some(id)) => Ok(builtin_model(id.parse()?, items)),
        (None, None) => Err(Error::InvalidArgument("give --study or --model".into())),
    }
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let mut config = load_config(&args.config)?;
    if args.study.is_some() {
        config.preset = args.study.clone();
        config.model = None;
    }
    if args.model.is_some() {
        config.model = args.model.clone();
        config.preset = None;
    }
    if let Some(i) = args.items {
        config.items = i;
    }
    if args.planted.is_some() {
        config.planted = args.planted.clone();
    }
    let mut g = config.generate.clone().unwrap_or_default();
    if let Some(s) = args.source {
        g.source = s;
    }
    if let Some(v) = args.batches {
        g.batches = v;
    }
    if let Some(v) = args.rows {
        g.rows_per_batch = v;
    }
    if let Some(v) = args.seed {
        g.seed = v;
    }
    if let Some(v) = args.base_url {
        g.llm.base_url = v;
    }
    if let Some(v) = args.llm_model {
        g.llm.model = v;
    }
    if let Some(v) = args.temperature {
        g.llm.temperature = v;
    }
    if let Some(v) = args.retry_limit {
        g.llm.retry_limit = v;
    }
    if let Some(v) = args.parallelism {
        g.llm.parallelism = v;
    }
    g.check()?;
    let out = args.out.unwrap_or(config.out.clone());
    let spec = Arc::new(load_model(
        config.preset.as_deref(),
        config.model.as_deref(),
        config.items,
    )?);
    let preset: Option<Preset> = config.preset.as_deref().map(str::parse).transpose()?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let panel = match g.source {
        Source::Synthetic => {
            let planted = match (&config.planted, preset) {
                (Some(p), _) => PlantedModel::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                (None, Some(p)) => PlantedModel::preset(p, &spec)?,
                (None, None) => {
                    return Err(Error::InvalidArgument("a custom model needs --planted".into()));
                }
            };
            generate_synthetic(&planted, spec, g.target_size(), g.seed)?
        }
        Source::Llm => {
            let template = match preset {
                Some(Preset::Study1) => PromptTemplate::study1(),
                _ => PromptTemplate::study2(&spec),
            }
            .with_rows(g.rows_per_batch);
            let client = LlmClient::from_env(g.llm.clone())?;
            let transcript = Transcript::new();
            let result = generate_llm(&client, &template, spec, g.batches, &transcript);
            let tpath = out.join("transcript.jsonl");
            transcript.save(&tpath)?;
            eprintln!("transcript: {}", tpath.display());
            result?
        }
    };
    let path = out.join("panel.csv");
    panel.save_csv(&path)?;
    eprintln!("{} rows written to {}", panel.len(), path.display());
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let mut c = load_config(&args.config)?;
    if args.model.is_some() {
        c.model = args.model;
        c.preset = None;
    }
    if args.preset.is_some() {
        c.preset = args.preset;
        c.model = None;
    }
    if let Some(i) = args.items {
        c.items = i;
    }
    if args.data.is_some() {
        c.data = args.data;
        c.generate = None;
        c.replay = None;
    }
    if args.replay.is_some() {
        c.replay = args.replay;
        c.generate = None;
        c.data = None;
    }
    if let Some(v) = args.dedup {
        c.dedup = v;
    }
    if let Some(v) = args.bootstrap {
        c.bootstrap = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if args.threads.is_some() {
        c.threads = args.threads;
    }
    if args.auto_drop.is_some() {
        c.auto_drop = args.auto_drop;
    }
    if let Some(v) = args.weighting_scheme {
        c.fit.weighting_scheme = v;
    }
    if let Some(v) = args.max_iterations {
        c.fit.max_iterations = v;
    }
    if let Some(v) = args.group_test {
        c.group_test = v;
    }
    if args.no_groups {
        c.compare_groups = false;
    }
    if let Some(v) = args.out {
        c.out = v;
    }
    if args.reference.is_some() {
        c.reference = args.reference;
    }
    if !args.tol.is_empty() {
        let t = Tolerances::parse(args.tol.iter().map(String::as_str))?;
        c.tolerances.extend(t.per_table);
    }
    let bundle = run_pipeline(&c)?;
    print!("{}", bundle.summary_text());
    eprintln!("report written to {}", c.out.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Error> {
    let tol = Tolerances::parse(args.tol.iter().map(String::as_str))?;
    let report = compare_to_reference(&args.bundle, &args.reference, &tol)?;
    for o in &report.offenders {
        println!("{o}");
    }
    println!(
        "{} table(s) compared: {}",
        report.tables.len(),
        if report.pass() { "pass" } else { "FAIL" }
    );
    match report.offenders.first() {
        None => Ok(()),
        Some(first) => Err(Error::ComparisonFailed {
            offenders: report.offenders.len(),
            first: first.to_string(),
        }),
    }
}

fn replay(args: ReplayArgs) -> Result<(), Error> {
    let spec = load_model(
        args.study.as_deref(),
        args.model.as_deref(),
        args.items.unwrap_or_default(),
    )?;
    let panel = replay_file(&args.transcript, Arc::new(spec))?;
    panel.save_csv(&args.out)?;
    eprintln!("{} rows written to {}", panel.len(), args.out.display());
    Ok(())
}

fn show(args: ShowArgs) -> Result<(), Error> {
    let preset: Preset = args.study.parse()?;
    let spec = builtin_model(preset, args.items.unwrap_or_default());
    match args.what.as_str() {
        "model" => println!("{}", spec.to_json()),
        "planted" => println!("{}", PlantedModel::preset(preset, &spec)?.to_json()),
        "prompt" => {
            let t = match preset {
                Preset::Study1 => PromptTemplate::study1(),
                Preset::Study2 => PromptTemplate::study2(&spec),
            };
            print!("{}", render_prompt(&t.with_rows(args.rows.unwrap_or(20)))?);
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "cannot show `{other}` (expected model, planted or prompt)"
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::Replay(a) => replay(a),
        Command::Show(a) => show(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
