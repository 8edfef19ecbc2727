use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tabassist_core::eval::{
    compare_reports, make_split, parse_sweep, run_evaluation, run_sweep, EvalConfig, EvalReport, EvaluationSplit, Task,
};
use tabassist_core::index::{load_index, load_manifest, Bm25Params};
use tabassist_core::kb::{load_kb, KbFiles};
use tabassist_core::pipeline::{
    build_index_dir, exclusion_sha256, link_corpus, open_kb_files, read_corpus_file, read_exclusions,
};
use tabassist_core::{Engine, RankedSuggestions, SeedTable};
use tabassist_service::{AppState, ServiceConfig, SnapshotSource, SuggestRequest, DEFAULT_TOP_K_CAP};

#[derive(Parser)]
#[command(name = "tabassist", version, about = "Row and column suggestions for entity-focused tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index management.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Draw validation and test tables for an evaluation.
    Split(SplitArgs),
    /// Rank rows or columns for a seed table.
    Suggest {
        #[command(subcommand)]
        command: SuggestCommand,
    },
    /// Run the simulated-user evaluation.
    Evaluate(EvaluateArgs),
    /// Paired t-test on per-table AP between two reports.
    Compare(CompareArgs),
    /// Serve suggestions over HTTP.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    Build(BuildArgs),
    /// Print an index manifest.
    Info {
        #[arg(long, env = "TABASSIST_INDEX")]
        index: PathBuf,
    },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// KB dump, or a directory holding kb.jsonl and optionally redirects.tsv.
    #[arg(long, env = "TABASSIST_KB")]
    kb: PathBuf,
    #[arg(long)]
    redirects: Option<PathBuf>,
    /// Tables to leave out: a split file or one id per line.
    #[arg(long)]
    exclude: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = Bm25Params::default().k1)]
    k1: f64,
    #[arg(long, default_value_t = Bm25Params::default().b)]
    b: f64,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, env = "TABASSIST_KB")]
    kb: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tables per side (validation and test).
    #[arg(long, default_value_t = 50)]
    size: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SuggestCommand {
    Rows(SuggestArgs),
    Columns(SuggestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Acsdb,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long, env = "TABASSIST_INDEX")]
    index: PathBuf,
    /// Required for rows; columns do not consult the KB.
    #[arg(long, env = "TABASSIST_KB")]
    kb: Option<PathBuf>,
    /// Seed table JSON: {"caption": str, "entities": [str], "labels": [str]}.
    #[arg(long)]
    seed: PathBuf,
    /// Comma-separated component names.
    #[arg(long, value_delimiter = ',')]
    components: Option<Vec<String>>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    mu_labels: Option<f64>,
    #[arg(long)]
    mu_caption: Option<f64>,
    /// relations, wlm or jaccard.
    #[arg(long)]
    kb_similarity: Option<String>,
    /// Candidate-selection cut-off, `method=k`; repeatable.
    #[arg(long = "candidate-k", value_parser = parse_candidate_k)]
    candidate_k: Vec<(String, usize)>,
    /// Rank columns with the label co-occurrence baseline.
    #[arg(long)]
    baseline: Option<Baseline>,
    #[arg(long, default_value_t = 100)]
    top: usize,
    /// Print the suggestions as JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

fn parse_candidate_k(s: &str) -> Result<(String, usize), String> {
    let (name, k) = s.split_once('=').ok_or("expected method=k")?;
    Ok((name.trim().to_string(), k.trim().parse().map_err(|e| format!("{k:?}: {e}"))?))
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    task: Task,
    #[arg(long, env = "TABASSIST_INDEX")]
    index: PathBuf,
    #[arg(long, env = "TABASSIST_KB")]
    kb: PathBuf,
    /// Corpus holding the split's test tables.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// EvalConfig JSON; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `parameter=start:stop:step`, e.g. `lambda-e=0:1:0.1`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed_size: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "TABASSIST_INDEX")]
    index: PathBuf,
    #[arg(long, env = "TABASSIST_KB")]
    kb: PathBuf,
    #[arg(long, env = "TABASSIST_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "TABASSIST_TOP_K_CAP", default_value_t = DEFAULT_TOP_K_CAP)]
    top_k_cap: usize,
    /// Comma-separated origins allowed by CORS.
    #[arg(long, env = "TABASSIST_CORS", value_delimiter = ',')]
    cors: Vec<String>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Index { command: IndexCommand::Build(args) } => index_build(args),
        Command::Index { command: IndexCommand::Info { index } } => {
            println!("{}", serde_json::to_string_pretty(&load_manifest(&index)?)?);
            Ok(())
        }
        Command::Split(args) => split(args),
        Command::Suggest { command: SuggestCommand::Rows(args) } => suggest(Task::Rows, args),
        Command::Suggest { command: SuggestCommand::Columns(args) } => suggest(Task::Columns, args),
        Command::Evaluate(args) => evaluate(args),
        Command::Compare(args) => compare(args),
        Command::Serve(args) => serve(args),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn index_build(args: BuildArgs) -> Result<()> {
    let mut exclusions = Vec::new();
    for path in &args.exclude {
        exclusions.extend(read_exclusions(path)?);
    }
    let params = Bm25Params { k1: args.k1, b: args.b };
    if !(params.k1 >= 0.0 && (0.0..=1.0).contains(&params.b)) {
        bail!("BM25 needs k1 >= 0 and b in [0, 1]");
    }
    let kb = KbFiles::locate(&args.kb, args.redirects.as_deref());
    let summary = build_index_dir(&args.corpus, &kb, &exclusions, params, &args.out)?;
    tracing::info!(
        tables = summary.manifest.n_tables,
        skipped_tables = summary.skipped_tables,
        skipped_kb_records = summary.skipped_kb_records,
        out = %args.out.display(),
        "index built"
    );
    println!("{}", serde_json::to_string_pretty(&summary.manifest)?);
    Ok(())
}

fn linked_corpus(corpus: &Path, kb: &tabassist_core::kb::KbStore) -> Result<Vec<tabassist_core::Table>> {
    let mut file = read_corpus_file(corpus)?;
    if !file.parsed.errors.is_empty() {
        tracing::warn!(skipped = file.parsed.errors.len(), "corpus records skipped");
    }
    link_corpus(kb, &mut file.parsed.tables);
    Ok(file.parsed.tables)
}

fn split(args: SplitArgs) -> Result<()> {
    let kb = open_kb_files(&KbFiles::locate(&args.kb, None))?;
    let tables = linked_corpus(&args.corpus, &kb.loaded.store)?;
    let split = make_split(&tables, args.task, args.seed, args.size)?;
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&split)? + "\n"))
}

fn load_engine(index: &Path, kb: Option<&Path>) -> Result<Engine> {
    match kb {
        Some(kb) => Ok(SnapshotSource::new(index, kb).load(0)?.engine),
        None => {
            let (index, _) = load_index(index).with_context(|| format!("loading {}", index.display()))?;
            Ok(Engine::new(load_kb(&b""[..])?.store, index))
        }
    }
}

fn suggest(task: Task, args: SuggestArgs) -> Result<()> {
    if task == Task::Rows && args.kb.is_none() {
        bail!("suggest rows needs --kb");
    }
    let seed_text = fs::read_to_string(&args.seed).with_context(|| format!("reading {}", args.seed.display()))?;
    let seed: SeedTable =
        serde_json::from_str(&seed_text).with_context(|| format!("parsing {}", args.seed.display()))?;
    let candidate_k: BTreeMap<String, usize> = args.candidate_k.into_iter().collect();
    let req = SuggestRequest {
        top_k: Some(args.top),
        components: args.components,
        lambda_e: args.lambda_e,
        lambda_l: args.lambda_l,
        lambda_c: args.lambda_c,
        mu_labels: args.mu_labels,
        mu_caption: args.mu_caption,
        kb_similarity: args.kb_similarity,
        method: args.baseline.map(|_| "baseline".to_string()),
        candidate_k: (!candidate_k.is_empty()).then_some(candidate_k),
        ..SuggestRequest::from_seed(seed)
    };
    let plan = tabassist_service::plan(task, &req, usize::MAX)?;
    let engine = load_engine(&args.index, args.kb.as_deref())?;
    let ranked: RankedSuggestions = plan.run(&engine);
    if args.json {
        println!("{}", serde_json::to_string(&ranked.items)?);
    } else {
        print!("{}", ranked.to_tsv());
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let split: EvaluationSplit = serde_json::from_str(&fs::read_to_string(&args.split)?)
        .with_context(|| format!("parsing {}", args.split.display()))?;
    if split.task != args.task {
        bail!("split {} was drawn for {}, not {}", args.split.display(), split.task, args.task);
    }
    let manifest = load_manifest(&args.index)?;
    if manifest.exclusion_sha256 != exclusion_sha256(&split.exclusion_list()) {
        bail!("index {} was not built with this split excluded", args.index.display());
    }
    let cfg: EvalConfig = match &args.config {
        Some(path) => {
            serde_json::from_str(&fs::read_to_string(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        None => EvalConfig::default(),
    };
    let engine = load_engine(&args.index, Some(&args.kb))?;
    let tables: Vec<_> =
        linked_corpus(&args.corpus, &engine.kb)?.into_iter().filter(|t| split.test.contains(&t.id)).collect();
    if tables.len() != split.test.len() {
        bail!("corpus holds {} of the split's {} test tables", tables.len(), split.test.len());
    }
    let json = match &args.sweep {
        Some(text) => {
            let sweep = parse_sweep(text)?;
            serde_json::to_string_pretty(&run_sweep(&engine, args.task, &tables, &cfg, &sweep)?)?
        }
        None => {
            let report = run_evaluation(&engine, args.task, &tables, &cfg)?;
            for r in &report.per_seed_size {
                tracing::info!(seed_size = r.seed_size, evaluated = r.evaluated, map = r.map, mrr = r.mrr, "evaluated");
            }
            report.to_json()
        }
    };
    write_output(args.out.as_deref(), &(json + "\n"))
}

fn compare(args: CompareArgs) -> Result<()> {
    let read = |p: &Path| -> Result<EvalReport> {
        serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))
    };
    let (a, b) = (read(&args.a)?, read(&args.b)?);
    let t = compare_reports(&a, &b, args.seed_size)
        .with_context(|| format!("no paired cases at seed size {}", args.seed_size))?;
    println!("{}", serde_json::to_string_pretty(&t)?);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let source = SnapshotSource::new(&args.index, &args.kb);
    let config = ServiceConfig { top_k_cap: args.top_k_cap, cors_allowlist: args.cors };
    let state = AppState::new(Some(source.clone()), config);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let ticket = state.snapshots.begin_reload().expect("fresh state has no reload running");
        let loader = std::sync::Arc::clone(&state);
        tokio::task::spawn_blocking(move || {
            let result = source.load(ticket.version);
            if let Err(e) = &result {
                tracing::error!(error = %e, "initial snapshot load failed");
            }
            loader.snapshots.finish_reload(ticket, result);
        });
        tabassist_service::serve(state, args.bind).await
    })?;
    Ok(())
}
