use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use promptscope::digest::write_atomic;
use promptscope::inference::{BackendKind, MockProfile};
use promptscope::orchestrator::{
    load_catalog, paths, run_pipeline, run_stage, FailureKind, GeneralizationSummary, PipelineConfig, PipelineError,
    RunManifest, Stage,
};
use promptscope::promptgen::{validate_catalog, CatalogProfile, PromptCatalog};
use promptscope::synth::synthetic_corpus;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE_FAILED: u8 = 3;
const EXIT_DELTA_BREACH: u8 = 4;

/// Evaluate prompt strategies for binary transcript classification.
#[derive(Debug, Parser)]
#[command(name = "promptscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Is,
    Oos,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the backend kind. `mock` falls back to the reference profile.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage, reusing intact results from an earlier run.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Exit with status 4 when the chosen prompt's |delta F1| exceeds this.
        #[arg(long)]
        fail_on_delta: Option<f64>,
    },
    /// Build the in-sample / out-of-sample split.
    Sample(RunArgs),
    /// Run inference on one split.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        split: SplitArg,
    },
    /// Compute in-sample metrics and consistency.
    Evaluate(RunArgs),
    /// Rank prompts and write the recommendation.
    Select(RunArgs),
    /// Compare the chosen prompt out-of-sample against in-sample.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        fail_on_delta: Option<f64>,
    },
    /// Render the report bundle from stored artifacts.
    Report(RunArgs),
    /// Inspect or check prompt catalogs.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Write a synthetic labeled corpus (JSONL).
    Synth {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        positive_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a starter config using the mock backend.
    InitConfig {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// List the prompts a config would use.
    List {
        #[arg(long, short)]
        config: Option<PathBuf>,
    },
    /// Write the catalog as JSON.
    Export {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a catalog file; `--strict` also requires 7 families x 4 variants.
    Validate {
        file: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

/// Errors carrying a specific process exit status.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn exit(code: u8, msg: impl Into<String>) -> anyhow::Error {
    Exit(code, msg.into()).into()
}

fn pipeline_error(e: PipelineError) -> anyhow::Error {
    match e {
        PipelineError::Config(m) => exit(EXIT_CONFIG, format!("config error: {m}")),
        other => other.into(),
    }
}

fn load_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config).map_err(pipeline_error)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match args.backend {
        Some(BackendArg::Mock) => {
            cfg.backend.kind = BackendKind::Mock;
            cfg.mock_profile.get_or_insert_with(MockProfile::reference);
        }
        Some(BackendArg::Http) => cfg.backend.kind = BackendKind::Http,
        None => {}
    }
    if let Some(out) = &args.out {
        let abs = std::path::absolute(out).context("resolving --out")?;
        cfg.output_dir = abs.to_string_lossy().into_owned();
    }
    cfg.validate().map_err(pipeline_error)?;
    Ok(cfg)
}

fn report_manifest(cfg: &PipelineConfig, manifest: &RunManifest) -> Result<()> {
    for s in &manifest.stages {
        let status = format!("{:?}", s.status).to_lowercase();
        println!("{:<10} {status}", s.stage.name());
    }
    if let Some(failed) = manifest.failed_stage() {
        let kind = match failed.failure {
            Some(FailureKind::Backend) => "backend",
            Some(FailureKind::Data) => "data",
            _ => "internal",
        };
        return Err(exit(
            EXIT_STAGE_FAILED,
            format!(
                "stage {} failed ({kind}): {}",
                failed.stage,
                failed.diagnostic.as_deref().unwrap_or("no diagnostic")
            ),
        ));
    }
    println!("output: {}", cfg.output_path().display());
    Ok(())
}

fn check_delta(cfg: &PipelineConfig, threshold: Option<f64>) -> Result<()> {
    let path = cfg.output_path().join(paths::GENERALIZATION);
    let Ok(text) = std::fs::read_to_string(&path) else {
        return Ok(());
    };
    let summary: GeneralizationSummary = serde_json::from_str(&text).context("reading generalization report")?;
    let g = &summary.chosen;
    println!(
        "chosen {}: F1 in-sample {:.3}, out-of-sample {:.3}, delta {:+.3}",
        g.prompt_id, g.in_sample.metrics.f1, g.out_of_sample.metrics.f1, g.delta_f1
    );
    if let Some(t) = threshold {
        if g.abs_delta_f1 > t {
            return Err(exit(
                EXIT_DELTA_BREACH,
                format!("|delta F1| {:.3} exceeds {t}", g.abs_delta_f1),
            ));
        }
    }
    Ok(())
}

fn stage(args: &RunArgs, stage: Stage) -> Result<()> {
    let cfg = load_config(args)?;
    let manifest = run_stage(&cfg, stage).map_err(pipeline_error)?;
    report_manifest(&cfg, &manifest)
}

fn catalog_for(config: Option<&Path>) -> Result<PromptCatalog> {
    match config {
        Some(p) => {
            let cfg = PipelineConfig::load(p).map_err(pipeline_error)?;
            load_catalog(&cfg).map_err(pipeline_error)
        }
        None => Ok(promptscope::promptgen::generate_catalog(&Default::default())?),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { run, fail_on_delta } => {
            let cfg = load_config(&run)?;
            let manifest = run_pipeline(&cfg).map_err(pipeline_error)?;
            report_manifest(&cfg, &manifest)?;
            check_delta(&cfg, fail_on_delta)
        }
        Command::Sample(a) => stage(&a, Stage::Sample),
        Command::Infer { run, split } => {
            // The catalog stage is cheap and a prerequisite for inference.
            let cfg = load_config(&run)?;
            let s = match split {
                SplitArg::Is => {
                    run_stage(&cfg, Stage::Catalog).map_err(pipeline_error)?;
                    Stage::InferIs
                }
                SplitArg::Oos => Stage::InferOos,
            };
            let manifest = run_stage(&cfg, s).map_err(pipeline_error)?;
            report_manifest(&cfg, &manifest)
        }
        Command::Evaluate(a) => stage(&a, Stage::Evaluate),
        Command::Select(a) => stage(&a, Stage::Select),
        Command::Validate { run, fail_on_delta } => {
            let cfg = load_config(&run)?;
            let manifest = run_stage(&cfg, Stage::Validate).map_err(pipeline_error)?;
            report_manifest(&cfg, &manifest)?;
            check_delta(&cfg, fail_on_delta)
        }
        Command::Report(a) => stage(&a, Stage::Report),
        Command::Catalog(CatalogCommand::List { config }) => {
            for v in &catalog_for(config.as_deref())?.variants {
                println!("{:<6} {}", v.id, v.family.approach_label());
            }
            Ok(())
        }
        Command::Catalog(CatalogCommand::Export { config, out }) => {
            let catalog = catalog_for(config.as_deref())?;
            write_atomic(&out, catalog.to_json().as_bytes()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} prompts written to {}", catalog.len(), out.display());
            Ok(())
        }
        Command::Catalog(CatalogCommand::Validate { file, strict }) => {
            let catalog = PromptCatalog::load(&file).map_err(|e| exit(EXIT_CONFIG, e.to_string()))?;
            let profile = if strict {
                CatalogProfile::DEFAULT
            } else {
                CatalogProfile::ANY
            };
            let violations = validate_catalog(&catalog, &profile);
            if violations.is_empty() {
                println!("{}: {} prompts, ok", file.display(), catalog.len());
                return Ok(());
            }
            for v in &violations {
                println!("{v}");
            }
            Err(exit(EXIT_CONFIG, format!("{} violation(s)", violations.len())))
        }
        Command::Synth {
            n,
            positive_fraction,
            seed,
            out,
        } => {
            if !(0.0..=1.0).contains(&positive_fraction) {
                bail!("--positive-fraction must be in [0, 1]");
            }
            let corpus = synthetic_corpus(n, positive_fraction, seed)?;
            write_atomic(&out, corpus.to_jsonl().as_bytes()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} records written to {}", corpus.len(), out.display());
            Ok(())
        }
        Command::InitConfig { corpus, out } => {
            let cfg = PipelineConfig::new_mock(corpus, "out", 0);
            write_atomic(&out, cfg.to_toml().as_bytes()).with_context(|| format!("writing {}", out.display()))?;
            println!("config written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Exit>() {
                Some(Exit(code, _)) => ExitCode::from(*code),
                None => ExitCode::FAILURE,
            }
        }
    }
}
