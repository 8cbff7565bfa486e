//! The three command pipelines — score, evaluate, synth — wired from corpus
//! loading through embedding, scoring, analysis, and artifact writing.
//!
//! Determinism contract: with identical config, inputs, and cache state,
//! every byte written by these pipelines is identical across runs.  Nothing
//! here reads clocks, process ids, or map iteration orders that could vary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::Serialize;
use sgi_core::analysis::{
    self, CalibrationAnalysis, DecompositionReport, LengthField, ScoredRecord, SeparationReport,
    StratifiedReport, SubgroupReport,
};
use sgi_core::corpus::{stratified_sample, RagInstance};
use sgi_core::synth::{generate, SynthConfig};

use crate::canonical::to_canonical_json;
use crate::config::{AnalysisKind, OutputFormat, ScoreConfig};
use crate::embedder::{resolve, text_digest, EmbeddingProviderConfig, VectorCache, VectorSource};
use crate::jsonl::{self, PrecomputedRow};
use crate::report::{
    self, bytes_digest, file_digest, ArtifactWriter, ManifestInput, Provenance, ReportBody,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
/// Some instances were skipped but the run otherwise completed.
pub const EXIT_PARTIAL: i32 = 2;

/// Stderr-only logger; data never goes to the terminal.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub quiet: bool,
    pub verbose: bool,
}

impl Log {
    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("sgi: {msg}");
        }
    }

    pub fn debug(&self, msg: &str) {
        if self.verbose && !self.quiet {
            eprintln!("sgi: {msg}");
        }
    }
}

/// Filename-safe rendering of a model id for artifact names.  Distinct model
/// ids that collide after sanitization are rejected up front.
pub fn sanitize_model(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn config_digest<T: Serialize>(config: &T) -> anyhow::Result<String> {
    Ok(bytes_digest(to_canonical_json(config)?.as_bytes()))
}

fn offline_requested() -> bool {
    std::env::var("NO_NETWORK").map(|v| v == "1").unwrap_or(false)
}

/// Embeds and scores a corpus, writing one scored-record JSONL per model plus
/// the skip report and manifest.  Exit 2 when any input line was skipped.
pub fn cmd_score(config: &ScoreConfig, log: &Log) -> anyhow::Result<i32> {
    config.validate()?;
    let input = config.input.as_ref().expect("validated");
    let out_dir = config.out.as_ref().expect("validated");

    // Distinct models must yield distinct artifact names.
    let mut models: Vec<String> = Vec::new();
    for model in &config.model_ids {
        if !models.contains(model) {
            models.push(model.clone());
        }
    }
    {
        let mut stems: BTreeMap<String, &String> = BTreeMap::new();
        for model in &models {
            if let Some(earlier) = stems.insert(sanitize_model(model), model) {
                bail!("model ids {earlier:?} and {model:?} collide after filename sanitization");
            }
        }
    }

    let outcome = if config.paired_input {
        jsonl::load_paired(input)?
    } else {
        jsonl::load_instances(input, &config.schema_map)?
    };
    log.info(&format!(
        "loaded {} instances from {} ({} skipped)",
        outcome.instances.len(),
        input.display(),
        outcome.skipped.len()
    ));
    if outcome.instances.is_empty() {
        bail!("no usable instances in {}", input.display());
    }

    let instances: Vec<RagInstance> = match config.sample_n {
        Some(n) => stratified_sample(&outcome.instances, n, config.seed)
            .map_err(|e| anyhow::anyhow!("stratified sampling failed: {e}"))?,
        None => outcome.instances.clone(),
    };

    let precomputed = match &config.offline_embeddings {
        Some(path) => Some(jsonl::load_precomputed(path)?),
        None => None,
    };
    let empty_precomputed = BTreeMap::new();
    let offline = offline_requested();
    if offline {
        log.info("NO_NETWORK=1: refusing network fetches; cache and files only");
    }
    let cache_dir = config.cache_dir.clone().unwrap_or_else(|| out_dir.join("cache"));

    let mut writer = ArtifactWriter::new(out_dir)?;
    for model in &models {
        let provider_config;
        let source = match (&precomputed, &config.provider_url) {
            (Some(map), _) => VectorSource::Precomputed(map),
            (None, Some(_)) if offline => {
                // Warm-cache runs still work; any miss becomes an explicit
                // missing-embedding error instead of a network call.
                VectorSource::Precomputed(&empty_precomputed)
            }
            (None, Some(url)) => {
                provider_config = EmbeddingProviderConfig {
                    endpoint_url: url.clone(),
                    model_id: model.clone(),
                    batch_size: config.batch_size,
                    timeout_secs: config.timeout_secs,
                    max_retries: config.max_retries,
                    auth_token: std::env::var("SGI_PROVIDER_TOKEN").ok(),
                    threads: config.threads,
                };
                VectorSource::Provider(&provider_config)
            }
            (None, None) => unreachable!("validated: some embedding source is configured"),
        };
        let mut cache = VectorCache::open(&cache_dir, model)?;
        let embedded = resolve(&instances, model, &source, &mut cache)
            .with_context(|| format!("embedding under model {model}"))?;
        let records = analysis::score_dataset(&embedded)?;
        let n_degenerate = records.iter().filter(|r| r.degenerate).count();
        log.info(&format!(
            "model {model}: scored {} records ({n_degenerate} degenerate)",
            records.len()
        ));
        let scores_name = format!("scores-{}.jsonl", sanitize_model(model));
        writer.write(&scores_name, &jsonl::to_jsonl_bytes(&records)?)?;
    }
    writer.write("skips.jsonl", &jsonl::to_jsonl_bytes(&outcome.skipped)?)?;

    let mut sorted_models = models.clone();
    sorted_models.sort();
    let provenance = Provenance {
        tool_version: report::tool_version(),
        config_digest: config_digest(config)?,
        seed: config.seed,
        model_ids: sorted_models,
    };
    let mut inputs = vec![ManifestInput {
        path: input.display().to_string(),
        sha256: file_digest(input)?,
    }];
    if let Some(path) = &config.offline_embeddings {
        inputs.push(ManifestInput { path: path.display().to_string(), sha256: file_digest(path)? });
    }
    writer.finish(&provenance, inputs)?;

    if outcome.skipped.is_empty() {
        Ok(EXIT_OK)
    } else {
        log.info(&format!("{} input lines skipped; see skips.jsonl", outcome.skipped.len()));
        Ok(EXIT_PARTIAL)
    }
}

/// Evaluate-stage settings (already merged from flags).
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    /// Scored-record JSONL files, one or more.
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Carried into provenance so downstream bundles stay attributable.
    pub seed: u64,
    pub format: OutputFormat,
    pub analyses: Vec<AnalysisKind>,
}

/// Runs the enabled analyses over scored records and writes one report file
/// per analysis plus the manifest.  An analysis that cannot run on this data
/// still writes its file, as `{provenance, skipped: reason}`.
pub fn cmd_evaluate(args: &EvaluateArgs, log: &Log) -> anyhow::Result<i32> {
    if args.inputs.is_empty() {
        bail!("evaluate needs at least one scores file (--input)");
    }
    if args.analyses.is_empty() {
        bail!("no analyses enabled");
    }

    let mut by_model: BTreeMap<String, Vec<ScoredRecord>> = BTreeMap::new();
    for path in &args.inputs {
        let records = jsonl::read_scored_records(path)?;
        log.debug(&format!("{}: {} records", path.display(), records.len()));
        for record in records {
            by_model.entry(record.model_id.clone()).or_default().push(record);
        }
    }
    if by_model.is_empty() {
        bail!("no scored records found in the given inputs");
    }
    let models: Vec<String> = by_model.keys().cloned().collect();
    log.info(&format!(
        "evaluating {} model(s) over {} records",
        models.len(),
        by_model.values().map(Vec::len).sum::<usize>()
    ));

    let provenance = Provenance {
        tool_version: report::tool_version(),
        config_digest: config_digest(args)?,
        seed: args.seed,
        model_ids: models.clone(),
    };

    // Per-model analyses: all models must succeed for a Ready body; any
    // failure turns the whole file into a notice naming each failing model.
    fn per_model<T>(
        by_model: &BTreeMap<String, Vec<ScoredRecord>>,
        mut run: impl FnMut(&str, &[ScoredRecord]) -> Result<Vec<T>, analysis::AnalysisError>,
    ) -> ReportBody<Vec<T>> {
        let mut ready = Vec::new();
        let mut failures = Vec::new();
        for (model, records) in by_model {
            match run(model, records) {
                Ok(mut reports) => ready.append(&mut reports),
                Err(e) => failures.push(format!("model {model}: {e}")),
            }
        }
        if failures.is_empty() {
            ReportBody::Ready(ready)
        } else {
            ReportBody::Skipped(failures.join("; "))
        }
    }

    let mut writer = ArtifactWriter::new(&args.out)?;
    let mut enabled: Vec<AnalysisKind> =
        AnalysisKind::ALL.iter().copied().filter(|k| args.analyses.contains(k)).collect();
    enabled.dedup();
    for kind in enabled {
        let stem = kind.stem();
        match kind {
            AnalysisKind::Separation => {
                let body: ReportBody<Vec<SeparationReport>> =
                    per_model(&by_model, |_, records| analysis::separation(records).map(|r| vec![r]));
                write_report(&mut writer, &provenance, stem, "reports", &body, args.format, |r| {
                    Ok(vec![("separation.csv".to_string(), report::separation_csv(r)?)])
                })?;
            }
            AnalysisKind::Stratify => {
                let body: ReportBody<Vec<StratifiedReport>> = per_model(&by_model, |_, records| {
                    analysis::stratify_by_separation(records).map(|r| vec![r])
                });
                write_report(&mut writer, &provenance, stem, "reports", &body, args.format, |r| {
                    Ok(vec![("stratified.csv".to_string(), report::stratified_csv(r)?)])
                })?;
            }
            AnalysisKind::Subgroups => {
                let body: ReportBody<Vec<SubgroupReport>> = per_model(&by_model, |_, records| {
                    let mut out = Vec::new();
                    for field in
                        [LengthField::Question, LengthField::Context, LengthField::Response]
                    {
                        out.push(analysis::subgroup_by_length(records, field)?);
                    }
                    Ok(out)
                });
                write_report(&mut writer, &provenance, stem, "reports", &body, args.format, |r| {
                    Ok(vec![("subgroups.csv".to_string(), report::subgroups_csv(r)?)])
                })?;
            }
            AnalysisKind::Decompose => {
                let body: ReportBody<Vec<DecompositionReport>> =
                    per_model(&by_model, |_, records| analysis::decompose(records).map(|r| vec![r]));
                write_report(&mut writer, &provenance, stem, "reports", &body, args.format, |r| {
                    Ok(vec![("decomposition.csv".to_string(), report::decomposition_csv(r)?)])
                })?;
            }
            AnalysisKind::Crossmodel => {
                let body = if by_model.len() < 2 {
                    ReportBody::Skipped(format!(
                        "cross-model agreement needs at least two models, got {}",
                        by_model.len()
                    ))
                } else {
                    let mut score_sets: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
                    for (model, records) in &by_model {
                        let scores: Vec<(String, f64)> = records
                            .iter()
                            .filter(|r| !r.degenerate)
                            .map(|r| (r.id.clone(), r.score.sgi))
                            .collect();
                        score_sets.insert(model.clone(), scores);
                    }
                    match analysis::cross_model(&score_sets) {
                        Ok(report) => ReportBody::Ready(report),
                        Err(e) => ReportBody::Skipped(e.to_string()),
                    }
                };
                write_report(&mut writer, &provenance, stem, "report", &body, args.format, |r| {
                    Ok(vec![("crossmodel.csv".to_string(), report::crossmodel_csv(r)?)])
                })?;
            }
            AnalysisKind::Calibrate => {
                let body: ReportBody<Vec<CalibrationAnalysis>> =
                    per_model(&by_model, |_, records| analysis::calibrate(records).map(|r| vec![r]));
                write_report(&mut writer, &provenance, stem, "reports", &body, args.format, |r| {
                    Ok(vec![
                        ("calibration_bins.csv".to_string(), report::calibration_bins_csv(r)?),
                        (
                            "calibration_deciles.csv".to_string(),
                            report::calibration_deciles_csv(r)?,
                        ),
                    ])
                })?;
            }
        }
    }

    let mut inputs = Vec::new();
    for path in &args.inputs {
        inputs.push(ManifestInput { path: path.display().to_string(), sha256: file_digest(path)? });
    }
    writer.finish(&provenance, inputs)?;
    Ok(EXIT_OK)
}

/// Writes one analysis's JSON report and, when ready and requested, its CSV
/// companion(s).
fn write_report<T: Serialize>(
    writer: &mut ArtifactWriter,
    provenance: &Provenance,
    stem: &str,
    key: &str,
    body: &ReportBody<T>,
    format: OutputFormat,
    csv_of: impl Fn(&T) -> anyhow::Result<Vec<(String, String)>>,
) -> anyhow::Result<()> {
    if format.wants_json() {
        let rendered = report::report_json(provenance, key, body)?;
        writer.write(&format!("{stem}.json"), rendered.as_bytes())?;
    }
    if format.wants_csv() {
        if let ReportBody::Ready(payload) = body {
            for (name, content) in csv_of(payload)? {
                writer.write(&name, content.as_bytes())?;
            }
        }
    }
    Ok(())
}

/// Synth-stage settings.
#[derive(Debug, Clone, Serialize)]
pub struct SynthArgs {
    pub config: SynthConfig,
    pub out: PathBuf,
}

/// Generates the synthetic corpus and writes it as an instances JSONL plus a
/// precomputed-embedding JSONL, so the whole pipeline can run offline.
pub fn cmd_synth(args: &SynthArgs, log: &Log) -> anyhow::Result<i32> {
    let dataset = generate(&args.config)?;
    log.info(&format!(
        "generated {} instances (dim {}, seed {})",
        dataset.instances.len(),
        args.config.dim,
        args.config.seed
    ));

    let instances: Vec<&RagInstance> = dataset.instances.iter().map(|e| &e.instance).collect();
    let mut rows: Vec<PrecomputedRow> = Vec::with_capacity(instances.len() * 3);
    for embedded in &dataset.instances {
        for (text, vector) in [
            (&embedded.instance.question, &embedded.q_vec),
            (&embedded.instance.context, &embedded.c_vec),
            (&embedded.instance.response, &embedded.r_vec),
        ] {
            rows.push(PrecomputedRow {
                model: embedded.model_id.clone(),
                sha256: text_digest(text),
                dim: vector.dim(),
                vector: vector.as_slice().to_vec(),
            });
        }
    }

    let mut writer = ArtifactWriter::new(&args.out)?;
    writer.write("instances.jsonl", &jsonl::to_jsonl_bytes(&instances)?)?;
    let mut embedding_bytes = Vec::new();
    jsonl::write_precomputed(&mut embedding_bytes, &rows)?;
    writer.write("embeddings.jsonl", &embedding_bytes)?;

    let provenance = Provenance {
        tool_version: report::tool_version(),
        config_digest: config_digest(&args.config)?,
        seed: args.config.seed,
        model_ids: vec!["synthetic".to_string()],
    };
    writer.finish(&provenance, Vec::new())?;
    Ok(EXIT_OK)
}
