//! `sgp`: batch front end for schema checks, corpus generation, splitting,
//! evaluation runs and report rendering.
//!
//! Exit codes: 0 success, 1 validation findings, 2 operational error.

mod backends;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sgp_core::backends::HttpGenerator;
use sgp_core::corpus::{read_corpus, write_corpus};
use sgp_core::harness::{
    deltas, make_splits, render_table, run_experiment, EvalReport, Protocol, ProtocolConfig, RunOptions,
    SplitPlan, StratifyBy, Summary, TaskMode,
};
use sgp_core::ontology::{load_schema, validate_graph};
use sgp_core::synthgen::{
    default_persona, generate_corpus, ArtifactRenderer, ExternalRenderer, GenConfig, Persona, RendererKind,
    TemplateRenderer,
};
use sgp_core::{Corpus, SchemaDef, Stratum};

use backends::BackendsConfig;

#[derive(Parser)]
#[command(name = "sgp", version, about = "Situation graph prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a schema and print its statistics or the first violation.
    SchemaCheck {
        /// Schema JSON; the built-in schema when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Generate a synthetic corpus.
    Generate(GenerateArgs),
    /// Validate every gold graph of a corpus against a schema.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Write a k-fold split plan.
    Split(SplitArgs),
    /// Run one protocol over a corpus and write the report.
    Run(Box<RunArgs>),
    /// Render one report, or two reports with a delta column.
    Report {
        #[arg(required = true, num_args = 1..=2)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Generator config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Persona JSON object of string fields.
    #[arg(long)]
    persona: Option<PathBuf>,
    /// Backends config; only its `renderer` section is used.
    #[arg(long)]
    backends: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Stratify::Domain)]
    stratify: Stratify,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Protocol config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Backends config JSON.
    #[arg(long)]
    backends: Option<PathBuf>,
    /// Predictor override: oracle, noisy_oracle or http.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    #[arg(long, value_enum)]
    task_mode: Option<TaskModeArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u32>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Cache file for bundle embeddings.
    #[arg(long)]
    index_cache: Option<PathBuf>,
    /// Log full request bodies of live backends instead of hashes.
    #[arg(long)]
    log_requests: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stratify {
    Domain,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    #[value(alias = "zero_shot")]
    ZeroShot,
    #[value(alias = "ra_icl")]
    RaIcl,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskModeArg {
    Static,
    #[value(alias = "temporal_oracle")]
    TemporalOracle,
    #[value(alias = "temporal_autoregressive")]
    TemporalAutoregressive,
}

/// A failure that maps to exit code 1 rather than 2.
#[derive(Debug)]
struct Findings(usize);

impl std::fmt::Display for Findings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} validation finding(s)", self.0)
    }
}

impl std::error::Error for Findings {}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("{} is not valid", path.display()))
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| anyhow!(e.error))
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_schema_arg(path: Option<&Path>) -> Result<SchemaDef> {
    match path {
        None => Ok(SchemaDef::default_schema()),
        Some(p) => load_schema(&read_text(p)?).with_context(|| format!("schema {}", p.display())),
    }
}

fn open_corpus(path: &Path, schema: Option<&SchemaDef>) -> Result<Corpus> {
    let f = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_corpus(BufReader::new(f), schema).with_context(|| format!("corpus {}", path.display()))
}

fn path_value(p: Option<&PathBuf>) -> Value {
    p.map_or(Value::Null, |p| Value::String(p.display().to_string()))
}

fn cmd_schema_check(schema: Option<PathBuf>) -> Result<()> {
    let s = match &schema {
        None => SchemaDef::default_schema(),
        Some(p) => match load_schema(&read_text(p)?) {
            Ok(s) => s,
            Err(e) => {
                println!("violation: {e}");
                return Err(Findings(1).into());
            }
        },
    };
    let counts = s.stratum_counts();
    println!(
        "{} kinds / {} predicates / {} strata",
        s.kind_ids().len(),
        s.predicate_ids().len(),
        counts.len()
    );
    for stratum in Stratum::ALL {
        let kinds = s.kinds_in(stratum);
        if !kinds.is_empty() {
            println!("  {:<14} {}", stratum.as_str(), kinds.join(", "));
        }
    }
    let latent = s
        .predicate_ids()
        .iter()
        .filter(|p| s.is_latent_predicate(p))
        .count();
    println!("  latent predicates: {latent}");
    println!(
        "  triplets per graph: {}..={}",
        s.min_triplets(),
        s.max_triplets()
    );
    println!("  fingerprint: {}", s.fingerprint());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let schema = load_schema_arg(a.schema.as_deref())?;
    let mut cfg: GenConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GenConfig::default(),
    };
    if let Some(n) = a.n {
        cfg.n_instances = n;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let persona: Persona = match &a.persona {
        Some(p) => read_json(p)?,
        None => default_persona(),
    };
    let renderer: Box<dyn ArtifactRenderer> = match cfg.renderer {
        RendererKind::Template => Box::new(TemplateRenderer::with_default_cues(&schema)?),
        RendererKind::External => {
            let backends: BackendsConfig = match &a.backends {
                Some(p) => read_json(p)?,
                None => bail!("the external renderer needs --backends with a `renderer` section"),
            };
            let http = backends
                .renderer
                .ok_or_else(|| anyhow!("backends config has no `renderer` section"))?;
            Box::new(ExternalRenderer::new(
                &schema,
                Arc::new(HttpGenerator::new(http)?),
            ))
        }
    };
    let mut corpus = generate_corpus(&schema, &cfg, &persona, renderer.as_ref())?;
    corpus.provenance.insert(
        "invocation".into(),
        json!({
            "command": "generate",
            "schema": path_value(a.schema.as_ref()),
            "persona": path_value(a.persona.as_ref()),
        }),
    );
    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    println!(
        "{} instances / {} artifacts -> {}",
        corpus.instances.len(),
        corpus.artifact_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_validate(corpus: PathBuf, schema: Option<PathBuf>) -> Result<()> {
    let schema = load_schema_arg(schema.as_deref())?;
    let c = open_corpus(&corpus, Some(&schema))?;
    let mut findings = 0;
    for inst in &c.instances {
        for v in validate_graph(&schema, &inst.gold) {
            println!("{}: {v}", inst.instance_id);
            findings += 1;
        }
    }
    println!("{} instances checked, {findings} finding(s)", c.instances.len());
    if findings > 0 {
        return Err(Findings(findings).into());
    }
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let c = open_corpus(&a.corpus, None)?;
    if a.folds == 0 {
        bail!("--folds must be at least 1");
    }
    let stratify = match a.stratify {
        Stratify::Domain => StratifyBy::Domain,
        Stratify::None => StratifyBy::None,
    };
    let plan = make_splits(&c, a.folds, 1.0 / a.folds as f64, stratify, a.seed)?;
    let mut text = serde_json::to_string_pretty(&plan)?;
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;

    let table = plan.stratum_table(&c);
    let strata: Vec<&String> = {
        let mut all: Vec<&String> = table.iter().flat_map(|m| m.keys()).collect();
        all.sort();
        all.dedup();
        all
    };
    print!("{:<6}{:>6}{:>11}", "fold", "test", "retrieval");
    for s in &strata {
        print!("  {s}");
    }
    println!();
    for (i, (fold, counts)) in plan.folds.iter().zip(&table).enumerate() {
        print!("{i:<6}{:>6}{:>11}", fold.test_ids.len(), fold.retrieval_ids.len());
        for s in &strata {
            print!("  {:>w$}", counts.get(*s).copied().unwrap_or(0), w = s.len());
        }
        println!();
    }
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    println!("plan -> {}", a.out.display());
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let schema = load_schema_arg(a.schema.as_deref())?;
    let corpus = open_corpus(&a.corpus, Some(&schema))?;
    let plan: SplitPlan = read_json(&a.plan)?;

    let mut cfg: ProtocolConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ProtocolConfig::default(),
    };
    if let Some(p) = a.protocol {
        cfg.protocol = match p {
            ProtocolArg::ZeroShot => Protocol::ZeroShot,
            ProtocolArg::RaIcl => Protocol::RaIcl,
        };
    }
    if let Some(m) = a.task_mode {
        cfg.task_mode = match m {
            TaskModeArg::Static => TaskMode::Static,
            TaskModeArg::TemporalOracle => TaskMode::TemporalOracle,
            TaskModeArg::TemporalAutoregressive => TaskMode::TemporalAutoregressive,
        };
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(tau) = a.tau {
        cfg.tau = tau;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = a.runs {
        cfg.runs_per_fold = runs;
    }
    cfg.validate()?;

    let mut bcfg: BackendsConfig = match &a.backends {
        Some(p) => read_json(p)?,
        None => BackendsConfig::default(),
    };
    if let Some(name) = &a.backend {
        bcfg.override_predictor(name)?;
    }
    if a.log_requests {
        bcfg.set_log_full();
    }
    let backends = bcfg.build(&schema, &corpus)?;

    let opts = RunOptions {
        jobs: a.jobs,
        index_cache: a.index_cache.clone(),
    };
    let mut report = run_experiment(&schema, &corpus, &plan, &cfg, &backends, &opts)?;
    report.config.invocation = BTreeMap::from([
        ("command".to_string(), json!("run")),
        ("schema".to_string(), path_value(a.schema.as_ref())),
        ("corpus".to_string(), path_value(Some(&a.corpus))),
        ("plan".to_string(), path_value(Some(&a.plan))),
        ("backends".to_string(), serde_json::to_value(&bcfg)?),
    ]);
    write_atomic(&a.out, report.to_json().as_bytes())?;

    let summary = report.summary();
    print!("{}", render_table(std::slice::from_ref(&summary)));
    if summary.n_errored > 0 {
        eprintln!("warning: {} instance(s) could not be scored", summary.n_errored);
    }
    println!("report -> {}", a.out.display());
    Ok(())
}

fn cmd_report(paths: Vec<PathBuf>, format: Format, out: Option<PathBuf>) -> Result<()> {
    let summaries = paths
        .iter()
        .map(|p| {
            let report =
                EvalReport::from_json(&read_text(p)?).with_context(|| format!("report {}", p.display()))?;
            Ok(report.summary())
        })
        .collect::<Result<Vec<Summary>>>()?;
    let text = match format {
        Format::Table => render_table(&summaries),
        Format::Json => {
            let mut doc = json!({ "summaries": summaries });
            if let [a, b] = summaries.as_slice() {
                doc["delta"] = serde_json::to_value(deltas(a, b))?;
            }
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
    };
    match out {
        Some(p) => write_atomic(&p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SchemaCheck { schema } => cmd_schema_check(schema),
        Command::Generate(a) => cmd_generate(a),
        Command::Validate { corpus, schema } => cmd_validate(corpus, schema),
        Command::Split(a) => cmd_split(a),
        Command::Run(a) => cmd_run(*a),
        Command::Report { reports, format, out } => cmd_report(reports, format, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Findings>() => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
