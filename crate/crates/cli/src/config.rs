//! Run configuration: a JSON config file, every field overridable by a
//! command-line flag (flags win), plus the schema map that adapts foreign
//! JSONL field names onto the (question, context, response, label) schema.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sgi_core::corpus::Label;

/// Maps input-file field names onto the canonical instance fields.
///
/// `label_truthy` fixes the polarity of boolean-like label values: a truthy
/// value (`true`, `1`, `"yes"`) is read as this label.  The self-describing
/// strings `"valid"` / `"hallucinated"` are always accepted as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaMap {
    pub id: Option<String>,
    pub question: String,
    pub context: String,
    pub response: String,
    pub label: Option<String>,
    pub label_truthy: Label,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            id: Some("id".to_string()),
            question: "question".to_string(),
            context: "context".to_string(),
            response: "response".to_string(),
            label: Some("label".to_string()),
            label_truthy: Label::Hallucinated,
        }
    }
}

impl SchemaMap {
    /// The common hallucination-benchmark layout: question / knowledge /
    /// answer plus a yes-no hallucination flag.
    pub fn halueval() -> Self {
        SchemaMap {
            id: Some("id".to_string()),
            question: "question".to_string(),
            context: "knowledge".to_string(),
            response: "answer".to_string(),
            label: Some("hallucination".to_string()),
            label_truthy: Label::Hallucinated,
        }
    }

    /// Resolves a `--schema-map` argument: a preset name or inline JSON.
    pub fn parse(arg: &str) -> anyhow::Result<Self> {
        let trimmed = arg.trim();
        match trimmed {
            "default" => Ok(SchemaMap::default()),
            "halueval" => Ok(SchemaMap::halueval()),
            _ if trimmed.starts_with('{') => serde_json::from_str(trimmed)
                .context("inline schema map is not valid JSON for a schema map"),
            other => bail!("unknown schema map {other:?}: expected \"default\", \"halueval\", or inline JSON"),
        }
    }
}

/// Interprets one JSON value as a label under this schema map's polarity.
pub fn parse_label(value: &serde_json::Value, truthy: Label) -> Result<Label, String> {
    let flipped = match truthy {
        Label::Hallucinated => Label::Valid,
        Label::Valid => Label::Hallucinated,
    };
    match value {
        serde_json::Value::Bool(true) => Ok(truthy),
        serde_json::Value::Bool(false) => Ok(flipped),
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(x) if x == 1.0 => Ok(truthy),
            Some(x) if x == 0.0 => Ok(flipped),
            _ => Err(format!("numeric label must be 0 or 1, got {n}")),
        },
        serde_json::Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(truthy),
            "false" | "0" | "no" => Ok(flipped),
            "valid" => Ok(Label::Valid),
            "hallucinated" => Ok(Label::Hallucinated),
            other => Err(format!("unrecognized label value {other:?}")),
        },
        other => Err(format!("label must be a bool, 0/1 number, or string, got {other}")),
    }
}

/// Which report serializations a run emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

/// One of the evaluate-stage analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Separation,
    Stratify,
    Subgroups,
    Decompose,
    Crossmodel,
    Calibrate,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 6] = [
        AnalysisKind::Separation,
        AnalysisKind::Stratify,
        AnalysisKind::Subgroups,
        AnalysisKind::Decompose,
        AnalysisKind::Crossmodel,
        AnalysisKind::Calibrate,
    ];

    /// File stem for this analysis's report artifacts.
    pub fn stem(self) -> &'static str {
        match self {
            AnalysisKind::Separation => "separation",
            AnalysisKind::Stratify => "stratified",
            AnalysisKind::Subgroups => "subgroups",
            AnalysisKind::Decompose => "decomposition",
            AnalysisKind::Crossmodel => "crossmodel",
            AnalysisKind::Calibrate => "calibration",
        }
    }

}

/// Effective settings for the scoring stage, after merging config file and
/// flags.  Serialized canonically into the provenance digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub input: Option<PathBuf>,
    pub schema_map: SchemaMap,
    /// Treat the input as paired question/correct/incorrect records and
    /// expand each into one valid and one hallucinated instance.
    pub paired_input: bool,
    pub provider_url: Option<String>,
    pub offline_embeddings: Option<PathBuf>,
    pub model_ids: Vec<String>,
    pub seed: u64,
    pub sample_n: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub batch_size: usize,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub threads: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            input: None,
            schema_map: SchemaMap::default(),
            paired_input: false,
            provider_url: None,
            offline_embeddings: None,
            model_ids: Vec::new(),
            seed: 42,
            sample_n: None,
            out: None,
            cache_dir: None,
            batch_size: 32,
            timeout_secs: 30.0,
            max_retries: 3,
            threads: 4,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.input.is_none() {
            bail!("no input file configured (use --input or the config file)");
        }
        if self.out.is_none() {
            bail!("no output directory configured (use --out)");
        }
        if self.model_ids.is_empty() {
            bail!("at least one --model is required");
        }
        if self.provider_url.is_none() && self.offline_embeddings.is_none() {
            bail!("no embedding source: set --provider-url or --offline-embeddings");
        }
        if self.batch_size == 0 {
            bail!("batch size must be at least 1");
        }
        if !(self.timeout_secs > 0.0) {
            bail!("timeout must be positive");
        }
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        Ok(())
    }
}

/// Loads a JSON config file when given.
pub fn load_config_file(path: Option<&PathBuf>) -> anyhow::Result<ScoreConfig> {
    match path {
        None => Ok(ScoreConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config file {}", p.display()))
        }
    }
}
