//! An instance paired with the unit-sphere embeddings of its three texts.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::RagInstance;
use crate::geometry::{GeometryError, UnitVector};

/// A [`RagInstance`] whose question, context, and response have been embedded
/// (by one model) and projected onto the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedInstance {
    pub instance: RagInstance,
    pub q_vec: UnitVector,
    pub c_vec: UnitVector,
    pub r_vec: UnitVector,
    /// Identifier of the embedding model that produced the vectors.
    pub model_id: String,
}

impl EmbeddedInstance {
    /// Bundles an instance with its three vectors, enforcing that all three
    /// share one dimension (mixed dimensions would make the angles
    /// incomparable).
    pub fn new(
        instance: RagInstance,
        q_vec: UnitVector,
        c_vec: UnitVector,
        r_vec: UnitVector,
        model_id: String,
    ) -> Result<Self, GeometryError> {
        if q_vec.dim() != c_vec.dim() {
            return Err(GeometryError::DimMismatch { left: q_vec.dim(), right: c_vec.dim() });
        }
        if q_vec.dim() != r_vec.dim() {
            return Err(GeometryError::DimMismatch { left: q_vec.dim(), right: r_vec.dim() });
        }
        Ok(Self { instance, q_vec, c_vec, r_vec, model_id })
    }

    /// Embedding dimension shared by the three vectors.
    pub fn dim(&self) -> usize {
        self.q_vec.dim()
    }
}
