//! Report assembly: provenance-stamped JSON envelopes, CSV companions, and
//! the run manifest that digests every artifact.
//!
//! All human-facing numbers pass through the 6-significant-digit formatter;
//! full-precision values live in the scores JSONL, not here.

use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sgi_core::analysis::{
    CalibrationAnalysis, CrossModelReport, DecompositionReport, LengthField, PrimaryDriver,
    ScoreKind, SeparationReport, StratifiedReport, SubgroupReport,
};

use crate::canonical::{format_sig6, to_canonical_json};

/// Identity block stamped into every report file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the effective run configuration.
    pub config_digest: String,
    pub seed: u64,
    /// Sorted; one entry per embedding model in the run.
    pub model_ids: Vec<String>,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Hex SHA-256 of in-memory bytes.
pub fn bytes_digest(bytes: &[u8]) -> String {
    use sha2::Digest;
    let hash = sha2::Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in hash {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Hex SHA-256 of a file's contents, streamed.
pub fn file_digest(path: &Path) -> anyhow::Result<String> {
    use sha2::Digest;
    let mut file = std::fs::File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open {} for hashing: {e}", path.display()))?;
    let mut hasher = sha2::Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let mut out = String::with_capacity(64);
    for byte in hasher.finalize() {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}

/// An analysis outcome destined for one report file: the payload, or the
/// stated reason the analysis could not run (the file is written either way,
/// so a fixed artifact set survives partial runs).
pub enum ReportBody<T> {
    Ready(T),
    Skipped(String),
}

/// Renders one report file: `{provenance, <key>: payload}` when ready,
/// `{provenance, skipped: reason}` otherwise.  `key` is `"reports"` for
/// per-model arrays and `"report"` for singular payloads.
pub fn report_json<T: Serialize>(
    provenance: &Provenance,
    key: &str,
    body: &ReportBody<T>,
) -> anyhow::Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("provenance".into(), serde_json::to_value(provenance)?);
    match body {
        ReportBody::Ready(payload) => {
            map.insert(key.into(), serde_json::to_value(payload)?);
        }
        ReportBody::Skipped(reason) => {
            map.insert("skipped".into(), serde_json::Value::String(reason.clone()));
        }
    }
    to_canonical_json(&serde_json::Value::Object(map))
}

fn kind_name(kind: ScoreKind) -> &'static str {
    match kind {
        ScoreKind::Sgi => "sgi",
        ScoreKind::ThetaRq => "theta_rq",
    }
}

fn field_name(field: LengthField) -> &'static str {
    match field {
        LengthField::Question => "question",
        LengthField::Context => "context",
        LengthField::Response => "response",
    }
}

fn driver_name(driver: PrimaryDriver) -> &'static str {
    match driver {
        PrimaryDriver::ThetaRq => "theta_rq",
        PrimaryDriver::ThetaRc => "theta_rc",
    }
}

fn csv_string(writer: csv::Writer<Vec<u8>>) -> anyhow::Result<String> {
    Ok(String::from_utf8(writer.into_inner()?)?)
}

pub fn separation_csv(reports: &[SeparationReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model_id",
        "score_kind",
        "n_valid",
        "n_halluc",
        "n_degenerate_excluded",
        "mean_valid",
        "mean_halluc",
        "cohens_d",
        "welch_t",
        "welch_df",
        "p_two_sided",
        "p_log10",
        "auc",
    ])?;
    for r in reports {
        w.write_record([
            r.model_id.clone(),
            kind_name(r.score_kind).to_string(),
            r.n_valid.to_string(),
            r.n_halluc.to_string(),
            r.n_degenerate_excluded.to_string(),
            format_sig6(r.mean_valid),
            format_sig6(r.mean_halluc),
            format_sig6(r.cohens_d),
            format_sig6(r.welch.t),
            format_sig6(r.welch.df),
            format_sig6(r.welch.p_two_sided),
            format_sig6(r.welch.p_log10),
            format_sig6(r.auc),
        ])?;
    }
    csv_string(w)
}

pub fn stratified_csv(reports: &[StratifiedReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model_id",
        "tercile",
        "range_min",
        "range_max",
        "n",
        "mean_valid",
        "mean_halluc",
        "cohens_d",
        "auc",
    ])?;
    for r in reports {
        for (i, t) in r.terciles.iter().enumerate() {
            w.write_record([
                r.model_id.clone(),
                i.to_string(),
                format_sig6(t.range.min),
                format_sig6(t.range.max),
                t.n.to_string(),
                format_sig6(t.mean_valid),
                format_sig6(t.mean_halluc),
                format_sig6(t.cohens_d),
                format_sig6(t.auc),
            ])?;
        }
    }
    csv_string(w)
}

pub fn subgroups_csv(reports: &[SubgroupReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model_id",
        "field",
        "tercile",
        "range_min",
        "range_max",
        "n",
        "mean_valid",
        "mean_halluc",
        "cohens_d",
        "auc",
        "degenerate_boundaries",
    ])?;
    for r in reports {
        for (i, t) in r.terciles.iter().enumerate() {
            w.write_record([
                r.model_id.clone(),
                field_name(r.field).to_string(),
                i.to_string(),
                format_sig6(t.range.min),
                format_sig6(t.range.max),
                t.n.to_string(),
                format_sig6(t.mean_valid),
                format_sig6(t.mean_halluc),
                format_sig6(t.cohens_d),
                format_sig6(t.auc),
                r.degenerate_boundaries.to_string(),
            ])?;
        }
    }
    csv_string(w)
}

pub fn decomposition_csv(reports: &[DecompositionReport]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model_id",
        "d_theta_rq",
        "d_theta_rc",
        "primary_driver",
        "n_degenerate_excluded",
    ])?;
    for r in reports {
        w.write_record([
            r.model_id.clone(),
            format_sig6(r.d_theta_rq),
            format_sig6(r.d_theta_rc),
            driver_name(r.primary_driver).to_string(),
            r.n_degenerate_excluded.to_string(),
        ])?;
    }
    csv_string(w)
}

/// Long-form pairwise agreement: one row per unordered model pair.
pub fn crossmodel_csv(report: &CrossModelReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model_a", "model_b", "n_common", "pearson", "spearman"])?;
    for i in 0..report.model_ids.len() {
        for j in (i + 1)..report.model_ids.len() {
            w.write_record([
                report.model_ids[i].clone(),
                report.model_ids[j].clone(),
                report.n_common.to_string(),
                format_sig6(report.pearson[i][j]),
                format_sig6(report.spearman[i][j]),
            ])?;
        }
    }
    csv_string(w)
}

pub fn calibration_bins_csv(analyses: &[CalibrationAnalysis]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model_id", "bin", "mean_predicted", "observed_rate", "count", "ece"])?;
    for a in analyses {
        for (i, bin) in a.calibration.bins.iter().enumerate() {
            w.write_record([
                a.model_id.clone(),
                i.to_string(),
                format_sig6(bin.mean_predicted),
                format_sig6(bin.observed_rate),
                bin.count.to_string(),
                format_sig6(a.calibration.ece),
            ])?;
        }
    }
    csv_string(w)
}

pub fn calibration_deciles_csv(analyses: &[CalibrationAnalysis]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model_id", "decile", "range_min", "range_max", "n", "halluc_rate"])?;
    for a in analyses {
        for (i, d) in a.deciles.iter().enumerate() {
            w.write_record([
                a.model_id.clone(),
                i.to_string(),
                format_sig6(d.range.min),
                format_sig6(d.range.max),
                d.n.to_string(),
                format_sig6(d.halluc_rate),
            ])?;
        }
    }
    csv_string(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestInput {
    /// The path exactly as the user supplied it.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestArtifact {
    /// Filename relative to the output directory.
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// The run manifest: every produced file with its content digest, plus enough
/// identity to reproduce the run.  Deliberately timestamp-free so identical
/// runs write identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub model_ids: Vec<String>,
    pub inputs: Vec<ManifestInput>,
    pub artifacts: Vec<ManifestArtifact>,
}

/// Writes artifacts under one output directory while accumulating their
/// manifest rows; `finish` writes `manifest.json` itself (which is therefore
/// the one file not listed in the manifest).
pub struct ArtifactWriter {
    out_dir: std::path::PathBuf,
    artifacts: Vec<ManifestArtifact>,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", out_dir.display()))?;
        Ok(ArtifactWriter { out_dir: out_dir.to_path_buf(), artifacts: Vec::new() })
    }

    /// Writes one artifact and records its digest.
    pub fn write(&mut self, name: &str, content: &[u8]) -> anyhow::Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        self.artifacts.push(ManifestArtifact {
            name: name.to_string(),
            sha256: bytes_digest(content),
            bytes: content.len(),
        });
        Ok(())
    }

    /// Writes `manifest.json` and returns the full manifest.
    pub fn finish(
        self,
        provenance: &Provenance,
        inputs: Vec<ManifestInput>,
    ) -> anyhow::Result<Manifest> {
        let manifest = Manifest {
            tool_version: provenance.tool_version.clone(),
            config_digest: provenance.config_digest.clone(),
            seed: provenance.seed,
            model_ids: provenance.model_ids.clone(),
            inputs,
            artifacts: self.artifacts,
        };
        let rendered = to_canonical_json(&manifest)?;
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, rendered.as_bytes())
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        Ok(manifest)
    }
}
