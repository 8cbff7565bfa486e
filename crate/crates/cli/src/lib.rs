//! Pipeline plumbing for the `sgi` binary: corpus ingestion, embedding
//! acquisition with caching, canonical report serialization, and the
//! score / evaluate / synth command flows.
//!
//! The binary in `main.rs` is a thin argument-parsing shell over
//! [`pipeline`]; everything with behavior worth testing lives here.

pub mod canonical;
pub mod config;
pub mod embedder;
pub mod jsonl;
pub mod pipeline;
pub mod report;
