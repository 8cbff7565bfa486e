//! Geometric grounding analysis for retrieval-augmented generation.
//!
//! A generated response is embedded on the unit hypersphere together with the
//! question that prompted it and the retrieved context it was supposed to be
//! grounded in.  The grounding score is the ratio of two geodesic (angular)
//! distances: how far the response drifted from the question, over how far it
//! drifted from the context.  Hallucinated responses tend to hug the question
//! and ignore the context, which pushes the ratio down; grounded responses pull
//! toward the context, which pushes it up.
//!
//! The crate is split into:
//!
//! * [`geometry`] — unit vectors, angular distance, the score itself and its
//!   triangle-inequality bounds;
//! * [`corpus`] — labeled question/context/response instances, length
//!   features, stratified sampling, and pairing of truthful/untruthful answer
//!   pairs into scoreable instances;
//! * [`embedding`] — an embedded instance (three unit vectors plus provenance);
//! * [`stats`] — self-contained effect-size, rank, and calibration kernels
//!   (Cohen's d, Welch's t, ROC-AUC, Pearson/Spearman, ECE, quantile buckets);
//! * [`analysis`] — dataset-level reports: separation, difficulty strata,
//!   length subgroups, numerator/denominator decomposition, cross-model score
//!   agreement, calibration;
//! * [`synth`] — a seeded generator of synthetic embedded corpora with a known
//!   grounded/ungrounded mechanism, used as a falsification harness.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature (on by
//! default) only switches the float math from `libm` to the platform intrinsics
//! and enables `std::error::Error` integration in dependencies.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod geometry;
mod numeric;
pub mod stats;
pub mod synth;

pub use analysis::{ScoreKind, ScoredRecord, SeparationReport};
pub use corpus::{Label, LengthFeatures, RagInstance};
pub use embedding::EmbeddedInstance;
pub use geometry::{Angle, GeometryError, SgiBounds, SgiScore, UnitVector};
pub use synth::SynthConfig;
