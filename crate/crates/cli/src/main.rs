//! `sgi`: scores retrieval-augmented generation outputs by how far each
//! response moves from the question toward the retrieved context on the
//! embedding hypersphere, and runs the accompanying analysis suite.
//!
//! Subcommands: `score` (embed + score a corpus), `evaluate` (analysis
//! reports from scored records), `synth` (deterministic synthetic benchmark),
//! and `crossmodel` / `calibrate` as single-analysis shortcuts for
//! `evaluate`.  Logs go to stderr; data only ever goes to files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use sgi_cli::config::{load_config_file, AnalysisKind, OutputFormat, SchemaMap, ScoreConfig};
use sgi_cli::pipeline::{self, cmd_evaluate, cmd_score, cmd_synth, EvaluateArgs, Log, SynthArgs};
use sgi_core::synth::SynthConfig;

#[derive(Parser)]
#[command(
    name = "sgi",
    version,
    about = "Angular grounding scores for retrieval-augmented generation"
)]
struct Cli {
    /// Suppress progress logs (errors still print).
    #[arg(long, global = true)]
    quiet: bool,
    /// Extra diagnostics on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a corpus and write scored records (one JSONL per model).
    Score(ScoreCliArgs),
    /// Run analyses over scored records and write a report bundle.
    Evaluate(EvaluateCliArgs),
    /// Generate the synthetic benchmark corpus with precomputed embeddings.
    Synth(SynthCliArgs),
    /// Shortcut: evaluate with only the cross-model agreement analysis.
    Crossmodel(ShortcutCliArgs),
    /// Shortcut: evaluate with only the calibration analysis.
    Calibrate(ShortcutCliArgs),
}

#[derive(Args)]
struct ScoreCliArgs {
    /// JSON config file; every field can be overridden by a flag, flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input corpus JSONL.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Field mapping: "default", "halueval", or inline JSON.
    #[arg(long)]
    schema_map: Option<String>,
    /// Treat input lines as question/correct/incorrect pairs and expand each
    /// into one valid and one hallucinated instance.
    #[arg(long)]
    paired: bool,
    /// Embeddings API endpoint (POST, OpenAI-style wire shape).
    #[arg(long)]
    provider_url: Option<String>,
    /// Precomputed-embedding JSONL instead of a provider.
    #[arg(long)]
    offline_embeddings: Option<PathBuf>,
    /// Embedding model id; repeat for multiple models.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Seed for sampling (and recorded in provenance).
    #[arg(long)]
    seed: Option<u64>,
    /// Label-stratified subsample size.
    #[arg(long)]
    sample_n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Embedding cache directory (default: <out>/cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Texts per provider request.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout_secs: Option<f64>,
    /// Extra attempts on transient provider failures.
    #[arg(long)]
    max_retries: Option<u32>,
    /// Concurrent in-flight provider requests.
    #[arg(long)]
    threads: Option<usize>,
}

impl ScoreCliArgs {
    /// Config file first, then flag overrides.
    fn into_config(self) -> anyhow::Result<ScoreConfig> {
        let mut config = load_config_file(self.config.as_ref())?;
        if let Some(v) = self.input {
            config.input = Some(v);
        }
        if let Some(v) = self.schema_map {
            config.schema_map = SchemaMap::parse(&v)?;
        }
        if self.paired {
            config.paired_input = true;
        }
        if let Some(v) = self.provider_url {
            config.provider_url = Some(v);
        }
        if let Some(v) = self.offline_embeddings {
            config.offline_embeddings = Some(v);
        }
        if !self.models.is_empty() {
            config.model_ids = self.models;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.sample_n {
            config.sample_n = Some(v);
        }
        if let Some(v) = self.out {
            config.out = Some(v);
        }
        if let Some(v) = self.cache_dir {
            config.cache_dir = Some(v);
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.timeout_secs {
            config.timeout_secs = v;
        }
        if let Some(v) = self.max_retries {
            config.max_retries = v;
        }
        if let Some(v) = self.threads {
            config.threads = v;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct EvaluateCliArgs {
    /// Scored-record JSONL; repeat for multiple models' files.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for the report bundle.
    #[arg(long)]
    out: PathBuf,
    /// Recorded in provenance.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Analyses to run (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    analyses: Vec<AnalysisKind>,
}

impl EvaluateCliArgs {
    fn into_args(self) -> EvaluateArgs {
        let analyses = if self.analyses.is_empty() {
            AnalysisKind::ALL.to_vec()
        } else {
            self.analyses
        };
        EvaluateArgs {
            inputs: self.inputs,
            out: self.out,
            seed: self.seed,
            format: self.format,
            analyses,
        }
    }
}

#[derive(Args)]
struct ShortcutCliArgs {
    /// Scored-record JSONL; repeat for multiple models' files.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory for the report bundle.
    #[arg(long)]
    out: PathBuf,
    /// Recorded in provenance.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

impl ShortcutCliArgs {
    fn into_args(self, kind: AnalysisKind) -> EvaluateArgs {
        EvaluateArgs {
            inputs: self.inputs,
            out: self.out,
            seed: self.seed,
            format: self.format,
            analyses: vec![kind],
        }
    }
}

#[derive(Args)]
struct SynthCliArgs {
    /// JSON file with generator settings; flags override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of instances.
    #[arg(long)]
    n: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Question–context angle in radians.
    #[arg(long)]
    theta_qc: Option<f64>,
    /// Generator seed; every instance derives from it deterministically.
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of hallucinated instances.
    #[arg(long)]
    halluc_fraction: Option<f64>,
}

impl SynthCliArgs {
    fn into_args(self) -> anyhow::Result<SynthArgs> {
        let mut config: SynthConfig = match &self.config {
            None => SynthConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    anyhow::anyhow!("reading synth config {}: {e}", path.display())
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    anyhow::anyhow!("parsing synth config {}: {e}", path.display())
                })?
            }
        };
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = self.dim {
            config.dim = v;
        }
        if let Some(v) = self.theta_qc {
            config.theta_qc = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.halluc_fraction {
            config.halluc_fraction = v;
        }
        Ok(SynthArgs { config, out: self.out })
    }
}

fn run(command: Command, log: &Log) -> anyhow::Result<i32> {
    match command {
        Command::Score(args) => cmd_score(&args.into_config()?, log),
        Command::Evaluate(args) => cmd_evaluate(&args.into_args(), log),
        Command::Crossmodel(args) => cmd_evaluate(&args.into_args(AnalysisKind::Crossmodel), log),
        Command::Calibrate(args) => cmd_evaluate(&args.into_args(AnalysisKind::Calibrate), log),
        Command::Synth(args) => cmd_synth(&args.into_args()?, log),
    }
}

fn main() {
    let cli = Cli::parse();
    let log = Log { quiet: cli.quiet, verbose: cli.verbose };
    let code = match run(cli.command, &log) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sgi: error: {e:#}");
            pipeline::EXIT_FATAL
        }
    };
    std::process::exit(code);
}
