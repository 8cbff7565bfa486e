//! Embedding acquisition: a thin HTTP client for the common embeddings-API
//! wire shape, an append-only on-disk cache, and the resolver that turns
//! instances into unit-vector triples.
//!
//! Precision policy: every vector — fresh from the provider, from a
//! precomputed file, or from the cache — passes through the same funnel:
//! normalize in f64, round to f32 (the cache's storage width), widen back,
//! renormalize.  Cold and warm runs therefore produce bit-identical unit
//! vectors, which the pipeline's byte-identical-rerun guarantee rests on.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sgi_core::corpus::RagInstance;
use sgi_core::embedding::EmbeddedInstance;
use sgi_core::geometry::{normalize, UnitVector};

/// Connection details for one embedding provider.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProviderConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub batch_size: usize,
    pub timeout_secs: f64,
    /// Additional attempts after the first (0 = fail immediately).
    pub max_retries: u32,
    /// Bearer token; never logged.
    pub auth_token: Option<String>,
    /// Maximum concurrent in-flight requests.
    pub threads: usize,
}

/// Errors from embedding acquisition.
#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("provider unreachable after {attempts} attempts: {detail}")]
    ProviderUnreachable { attempts: u32, detail: String },
    #[error("provider error (status {status}): {body_excerpt}")]
    ProviderError { status: u16, body_excerpt: String },
    #[error("provider returned {got} vectors for {expected} inputs")]
    WrongCardinality { expected: usize, got: usize },
    #[error("vectors in one response differ in dimension: {first} vs {other}")]
    DimensionInconsistent { first: usize, other: usize },
    #[error("offline mode: missing embeddings under model {model:?} for {count} texts (first digests: {sample:?})")]
    MissingEmbedding { model: String, count: usize, sample: Vec<String> },
    #[error("embedding rejected for instance {id:?}: {source}")]
    BadVector {
        id: String,
        #[source]
        source: sgi_core::geometry::GeometryError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cache corrupted: {0}")]
    CacheCorrupt(String),
}

/// Hex-encoded SHA-256 of the text's UTF-8 bytes: the cache key.
pub fn text_digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in hash {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    data: Vec<WireItem>,
}

#[derive(Deserialize)]
struct WireItem {
    index: usize,
    embedding: Vec<f64>,
}

fn transient_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// One POST with retries; returns the batch's vectors in input order.
fn request_batch(
    client: &reqwest::blocking::Client,
    config: &EmbeddingProviderConfig,
    texts: &[String],
) -> Result<Vec<Vec<f64>>, EmbedError> {
    let mut last_detail = String::new();
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            // Exponential backoff: 100ms, 200ms, 400ms, ...
            std::thread::sleep(Duration::from_millis(100 << (attempt - 1).min(6)));
        }
        let mut request = client
            .post(&config.endpoint_url)
            .json(&WireRequest { model: &config.model_id, input: texts });
        if let Some(token) = &config.auth_token {
            request = request.bearer_auth(token);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) => {
                last_detail = e.to_string();
                continue;
            }
        };
        let status = response.status().as_u16();
        if transient_status(status) {
            last_detail = format!("status {status}");
            continue;
        }
        if status != 200 {
            let body = response.text().unwrap_or_default();
            return Err(EmbedError::ProviderError {
                status,
                body_excerpt: body.chars().take(200).collect(),
            });
        }
        let parsed: WireResponse = response.json().map_err(|e| EmbedError::ProviderError {
            status,
            body_excerpt: format!("unparseable body: {e}"),
        })?;
        return assemble_batch(parsed, texts.len());
    }
    Err(EmbedError::ProviderUnreachable {
        attempts: config.max_retries + 1,
        detail: last_detail,
    })
}

/// Orders response items by their index field and checks cardinality/dims.
fn assemble_batch(response: WireResponse, expected: usize) -> Result<Vec<Vec<f64>>, EmbedError> {
    if response.data.len() != expected {
        return Err(EmbedError::WrongCardinality { expected, got: response.data.len() });
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; expected];
    for item in response.data {
        if item.index >= expected || slots[item.index].is_some() {
            return Err(EmbedError::WrongCardinality { expected, got: expected + 1 });
        }
        slots[item.index] = Some(item.embedding);
    }
    let vectors: Vec<Vec<f64>> = slots.into_iter().map(|s| s.expect("all slots filled")).collect();
    if let Some(first) = vectors.first() {
        for v in &vectors {
            if v.len() != first.len() {
                return Err(EmbedError::DimensionInconsistent {
                    first: first.len(),
                    other: v.len(),
                });
            }
        }
    }
    Ok(vectors)
}

/// Fetches embeddings for `texts` in input order, chunked by `batch_size`,
/// with up to `threads` batches in flight at once.
pub fn embed_batch(
    config: &EmbeddingProviderConfig,
    texts: &[String],
) -> Result<Vec<Vec<f64>>, EmbedError> {
    assert!(!texts.is_empty(), "corpus invariants keep text lists nonempty");
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs_f64(config.timeout_secs))
        .build()
        .map_err(|e| EmbedError::ProviderUnreachable { attempts: 0, detail: e.to_string() })?;

    let batches: Vec<&[String]> = texts.chunks(config.batch_size.max(1)).collect();
    let workers = config.threads.max(1).min(batches.len());
    let mut results: Vec<Option<Result<Vec<Vec<f64>>, EmbedError>>> =
        (0..batches.len()).map(|_| None).collect();

    if workers <= 1 {
        for (slot, batch) in results.iter_mut().zip(&batches) {
            *slot = Some(request_batch(&client, config, batch));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= batches.len() {
                        break;
                    }
                    let outcome = request_batch(&client, config, batches[i]);
                    slots.lock().expect("result mutex poisoned")[i] = Some(outcome);
                });
            }
        });
    }

    let mut vectors = Vec::with_capacity(texts.len());
    for slot in results {
        vectors.extend(slot.expect("every batch processed")?);
    }
    Ok(vectors)
}

/// Append-only per-model vector cache: raw f32 little-endian components in a
/// `.bin` file, with a JSONL `.idx` sidecar mapping digest → (offset, dim).
pub struct VectorCache {
    bin_path: PathBuf,
    idx_path: PathBuf,
    index: BTreeMap<String, (u64, usize)>,
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    digest: String,
    offset: u64,
    dim: usize,
}

/// Filename-safe identity for a model: readable prefix plus a digest tail so
/// distinct ids never collide after sanitization.
fn model_file_stem(model_id: &str) -> String {
    let safe: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{}-{}", safe, &text_digest(model_id)[..8])
}

impl VectorCache {
    /// Opens (creating if needed) the cache for one model under `dir`.
    pub fn open(dir: &Path, model_id: &str) -> Result<Self, EmbedError> {
        std::fs::create_dir_all(dir)?;
        let stem = model_file_stem(model_id);
        let bin_path = dir.join(format!("{stem}.bin"));
        let idx_path = dir.join(format!("{stem}.idx"));
        let mut index = BTreeMap::new();
        if idx_path.exists() {
            let reader = BufReader::new(File::open(&idx_path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: IndexRow = serde_json::from_str(&line)
                    .map_err(|e| EmbedError::CacheCorrupt(format!("bad index row: {e}")))?;
                index.insert(row.digest, (row.offset, row.dim));
            }
        }
        Ok(VectorCache { bin_path, idx_path, index })
    }

    /// Reads one cached vector, widened to f64.
    pub fn get(&self, digest: &str) -> Result<Option<Vec<f64>>, EmbedError> {
        let Some(&(offset, dim)) = self.index.get(digest) else {
            return Ok(None);
        };
        let mut file = File::open(&self.bin_path)?;
        file.seek(SeekFrom::Start(offset))?;
        let mut bytes = vec![0u8; dim * 4];
        file.read_exact(&mut bytes).map_err(|e| {
            EmbedError::CacheCorrupt(format!("truncated vector at offset {offset}: {e}"))
        })?;
        let vector = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Some(vector))
    }

    /// Appends one vector (stored at f32 precision); last write wins on the
    /// rare duplicate.  The caller is the single writer.
    pub fn put(&mut self, digest: &str, vector_f32: &[f32]) -> Result<(), EmbedError> {
        let mut bin = OpenOptions::new().create(true).append(true).open(&self.bin_path)?;
        let offset = bin.seek(SeekFrom::End(0))?;
        let mut bytes = Vec::with_capacity(vector_f32.len() * 4);
        for x in vector_f32 {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        bin.write_all(&bytes)?;
        bin.flush()?;
        let mut idx = OpenOptions::new().create(true).append(true).open(&self.idx_path)?;
        let row = IndexRow { digest: digest.to_string(), offset, dim: vector_f32.len() };
        serde_json::to_writer(&mut idx, &row)
            .map_err(|e| EmbedError::CacheCorrupt(e.to_string()))?;
        idx.write_all(b"\n")?;
        idx.flush()?;
        self.index.insert(digest.to_string(), (offset, vector_f32.len()));
        Ok(())
    }
}

/// Normalizes a raw provider/file vector and returns both the storage form
/// (f32) and the final unit vector derived from it.
fn settle_vector(raw: &[f64], id: &str) -> Result<(Vec<f32>, UnitVector), EmbedError> {
    let unit_f64 = normalize(raw)
        .map_err(|source| EmbedError::BadVector { id: id.to_string(), source })?;
    let stored: Vec<f32> = unit_f64.as_slice().iter().map(|&x| x as f32).collect();
    let widened: Vec<f64> = stored.iter().map(|&x| x as f64).collect();
    let unit = normalize(&widened)
        .map_err(|source| EmbedError::BadVector { id: id.to_string(), source })?;
    Ok((stored, unit))
}

/// Where vectors may come from.
pub enum VectorSource<'a> {
    /// Live HTTP provider.
    Provider(&'a EmbeddingProviderConfig),
    /// Fully offline: precomputed (model, digest) → raw vector map.
    Precomputed(&'a BTreeMap<(String, String), Vec<f64>>),
}

/// Resolves every instance to an embedded triple under one model.
///
/// Unique texts are collected first (so shared contexts embed once), served
/// from the cache when possible, fetched or looked up otherwise, and written
/// back to the cache.  Output order matches input order.
pub fn resolve(
    instances: &[RagInstance],
    model_id: &str,
    source: &VectorSource,
    cache: &mut VectorCache,
) -> Result<Vec<EmbeddedInstance>, EmbedError> {
    // Unique texts in first-appearance order, keyed by digest.
    let mut order: Vec<(String, String)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for instance in instances {
        for text in [&instance.question, &instance.context, &instance.response] {
            let digest = text_digest(text);
            if !seen.contains_key(&digest) {
                seen.insert(digest.clone(), order.len());
                order.push((digest, text.clone()));
            }
        }
    }

    // Raw f64 vectors per digest, from cache then source.
    let mut raw_by_digest: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut missing: Vec<&(String, String)> = Vec::new();
    for entry in &order {
        match cache.get(&entry.0)? {
            Some(widened) => {
                raw_by_digest.insert(entry.0.as_str(), widened);
            }
            None => missing.push(entry),
        }
    }

    if !missing.is_empty() {
        let fetched: Vec<(usize, Vec<f64>)> = match source {
            VectorSource::Provider(config) => {
                let texts: Vec<String> = missing.iter().map(|(_, t)| t.clone()).collect();
                let vectors = embed_batch(config, &texts)?;
                vectors.into_iter().enumerate().collect()
            }
            VectorSource::Precomputed(map) => {
                let mut found = Vec::with_capacity(missing.len());
                let mut absent = Vec::new();
                for (i, (digest, _)) in missing.iter().enumerate() {
                    match map.get(&(model_id.to_string(), digest.clone())) {
                        Some(raw) => found.push((i, raw.clone())),
                        None => absent.push(digest.clone()),
                    }
                }
                if !absent.is_empty() {
                    return Err(EmbedError::MissingEmbedding {
                        model: model_id.to_string(),
                        count: absent.len(),
                        sample: absent.into_iter().take(5).collect(),
                    });
                }
                found
            }
        };
        for (i, raw) in fetched {
            let digest = missing[i].0.as_str();
            let (stored, _) = settle_vector(&raw, digest)?;
            cache.put(digest, &stored)?;
            raw_by_digest.insert(digest, stored.iter().map(|&x| x as f64).collect());
        }
    }

    // Assemble triples; every path below reads the f32-widened form.
    let mut out = Vec::with_capacity(instances.len());
    for instance in instances {
        let vector_for = |text: &str| -> Result<UnitVector, EmbedError> {
            let digest = text_digest(text);
            let widened = raw_by_digest
                .get(digest.as_str())
                .unwrap_or_else(|| panic!("digest {digest} resolved above"));
            normalize(widened).map_err(|source| EmbedError::BadVector {
                id: instance.id.clone(),
                source,
            })
        };
        let q = vector_for(&instance.question)?;
        let c = vector_for(&instance.context)?;
        let r = vector_for(&instance.response)?;
        let embedded = EmbeddedInstance::new(instance.clone(), q, c, r, model_id.to_string())
            .map_err(|source| EmbedError::BadVector { id: instance.id.clone(), source })?;
        out.push(embedded);
    }
    Ok(out)
}
