//! JSONL ingestion and emission: instances in (with per-line skip
//! collection), scored records out and back in, and the precomputed
//! embedding format for offline runs.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sgi_core::analysis::ScoredRecord;
use sgi_core::corpus::{pair_to_instances, ContextSource, PairedRecord, RagInstance};

use crate::config::{parse_label, SchemaMap};

/// One rejected input line and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub line: usize,
    pub reason: String,
}

/// Load result: whatever parsed cleanly plus the skip report.
#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub instances: Vec<RagInstance>,
    pub skipped: Vec<SkipEntry>,
}

fn field<'v>(object: &'v Value, name: &str, line: usize) -> Result<&'v Value, SkipEntry> {
    object.get(name).ok_or_else(|| SkipEntry {
        line,
        reason: format!("missing field {name:?}"),
    })
}

fn text_field(object: &Value, name: &str, line: usize) -> Result<String, SkipEntry> {
    let value = field(object, name, line)?;
    match value {
        Value::String(s) => Ok(s.clone()),
        other => Err(SkipEntry {
            line,
            reason: format!("field {name:?} must be a string, got {other}"),
        }),
    }
}

/// Parses one line into an instance under the schema map.  The id falls back
/// to `line-NNNNNN` when the mapped id field is absent.
fn instance_from_line(
    text: &str,
    map: &SchemaMap,
    line: usize,
) -> Result<RagInstance, SkipEntry> {
    let object: Value = serde_json::from_str(text).map_err(|e| SkipEntry {
        line,
        reason: format!("malformed JSON: {e}"),
    })?;
    let id = match map.id.as_deref().and_then(|name| object.get(name)) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => {
            return Err(SkipEntry {
                line,
                reason: format!("id field must be a string or number, got {other}"),
            })
        }
        None => format!("line-{line:06}"),
    };
    let label = match map.label.as_deref().and_then(|name| object.get(name)) {
        // Absent and explicit-null both mean "unlabeled".
        None | Some(Value::Null) => None,
        Some(value) => Some(
            parse_label(value, map.label_truthy).map_err(|reason| SkipEntry { line, reason })?,
        ),
    };
    let instance = RagInstance {
        id,
        question: text_field(&object, &map.question, line)?,
        context: text_field(&object, &map.context, line)?,
        response: text_field(&object, &map.response, line)?,
        label,
    };
    instance.validate().map_err(|e| SkipEntry { line, reason: e.to_string() })?;
    Ok(instance)
}

/// Loads a JSONL instance file, collecting per-line failures instead of
/// aborting.  Blank lines are ignored; duplicate ids are skipped with a
/// report entry (first occurrence wins).
pub fn load_instances(path: &Path, map: &SchemaMap) -> anyhow::Result<LoadOutcome> {
    let file = File::open(path).with_context(|| format!("opening input {}", path.display()))?;
    let mut instances = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index + 1;
        let text = line.with_context(|| format!("reading line {line_no}"))?;
        if text.trim().is_empty() {
            continue;
        }
        match instance_from_line(&text, map, line_no) {
            Ok(instance) => {
                if seen_ids.contains(&instance.id) {
                    skipped.push(SkipEntry {
                        line: line_no,
                        reason: format!("duplicate id {:?}", instance.id),
                    });
                } else {
                    seen_ids.insert(instance.id.clone());
                    instances.push(instance);
                }
            }
            Err(entry) => skipped.push(entry),
        }
    }
    Ok(LoadOutcome { instances, skipped })
}

/// Loads a paired-answers JSONL file (id, question, correct_answer,
/// incorrect_answer) and expands each pair into a valid and a hallucinated
/// instance with the question standing in as context.
pub fn load_paired(path: &Path) -> anyhow::Result<LoadOutcome> {
    let file = File::open(path).with_context(|| format!("opening input {}", path.display()))?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index + 1;
        let text = line.with_context(|| format!("reading line {line_no}"))?;
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PairedRecord>(&text) {
            Ok(pair) => pairs.push((line_no, pair)),
            Err(e) => skipped.push(SkipEntry { line: line_no, reason: format!("malformed pair: {e}") }),
        }
    }
    let bare: Vec<PairedRecord> = pairs.iter().map(|(_, p)| p.clone()).collect();
    let outcome = pair_to_instances(&bare, ContextSource::QuestionAsContext);
    for skip in outcome.skipped {
        // Map pair-level skips back to their source lines by id.
        let line = pairs
            .iter()
            .find(|(_, p)| p.id == skip.id)
            .map(|(l, _)| *l)
            .unwrap_or(0);
        skipped.push(SkipEntry { line, reason: format!("pair {:?}: {}", skip.id, skip.reason) });
    }
    Ok(LoadOutcome { instances: outcome.instances, skipped })
}

/// Serializes records as one JSON object per line.
pub fn to_jsonl_bytes<T: Serialize>(records: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Reads scored records back for the evaluate stage.
pub fn read_scored_records(path: &Path) -> anyhow::Result<Vec<ScoredRecord>> {
    let file = File::open(path).with_context(|| format!("opening scores {}", path.display()))?;
    let mut records = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: ScoredRecord = serde_json::from_str(&text)
            .with_context(|| format!("scores line {} of {}", index + 1, path.display()))?;
        records.push(record);
    }
    Ok(records)
}

/// One row of the precomputed-embedding interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedRow {
    pub model: String,
    pub sha256: String,
    pub dim: usize,
    pub vector: Vec<f64>,
}

/// Loads precomputed embeddings into a (model, digest) → raw-vector map.
pub fn load_precomputed(
    path: &Path,
) -> anyhow::Result<std::collections::BTreeMap<(String, String), Vec<f64>>> {
    let file =
        File::open(path).with_context(|| format!("opening embeddings {}", path.display()))?;
    let mut map = std::collections::BTreeMap::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let row: PrecomputedRow = serde_json::from_str(&text).with_context(|| {
            format!("malformed embedding record at line {line_no} of {}", path.display())
        })?;
        if row.vector.len() != row.dim {
            anyhow::bail!(
                "malformed embedding record at line {line_no}: dim says {} but vector has {} components",
                row.dim,
                row.vector.len()
            );
        }
        if let Some(bad) = row.vector.iter().position(|x| !x.is_finite()) {
            anyhow::bail!(
                "malformed embedding record at line {line_no}: non-finite component at index {bad}"
            );
        }
        map.insert((row.model, row.sha256), row.vector);
    }
    Ok(map)
}

/// Appends precomputed rows to a writer in the interchange format.
pub fn write_precomputed(out: &mut impl Write, rows: &[PrecomputedRow]) -> anyhow::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut *out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
