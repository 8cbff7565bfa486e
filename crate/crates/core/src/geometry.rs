//! Unit vectors, angular distance, and the grounding score.
//!
//! Embeddings live on the unit hypersphere S^(d-1); the natural metric there
//! is the geodesic angle `acos(a . b)`.  The grounding score of a response
//! `r` for a question `q` answered against a retrieved context `c` is
//!
//! ```text
//! sgi(r; q, c) = theta(r, q) / (theta(r, c) + EPS)
//! ```
//!
//! i.e. the response's angular distance from the question, normalized by its
//! angular distance from the context.  The small `EPS` only guards the
//! denominator; scores with `theta(r, c)` at or below
//! [`DEGENERATE_DENOMINATOR_THRESHOLD`] are flagged degenerate and excluded
//! from aggregate statistics by the analysis layer.
//!
//! The triangle inequality on the sphere pins the ratio between data-free
//! bounds computed from `theta(q, c)` alone (see [`sgi_bounds`]), which gives
//! a cheap self-check on every scored triple.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::numeric::pairwise_dot;

/// Norm below which an input vector is considered zero and unnormalizable.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;
/// A stored unit vector's norm must be within this of 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;
/// Additive guard on the score denominator.
pub const SGI_EPSILON: f64 = 1e-8;
/// `theta(r, c)` at or below this marks the score degenerate: the response is
/// numerically on top of the context and the ratio carries no information.
pub const DEGENERATE_DENOMINATOR_THRESHOLD: f64 = 1e-6;
/// Minimum embedding dimension; the sphere S^0 = {-1, +1} has no angles worth
/// measuring.
pub const MIN_DIM: usize = 2;

/// Errors from vector validation and score computation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// Input norm below [`ZERO_NORM_THRESHOLD`]; direction is undefined.
    #[error("cannot normalize: norm {norm:e} is below {ZERO_NORM_THRESHOLD:e}")]
    ZeroVector { norm: f64 },
    /// A NaN or infinite component.
    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },
    /// Fewer than [`MIN_DIM`] components.
    #[error("dimension {dim} is below the minimum {MIN_DIM}")]
    DimTooSmall { dim: usize },
    /// Two vectors of different dimension in one operation.
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    /// A claimed unit vector whose norm is off by more than
    /// [`UNIT_NORM_TOLERANCE`].
    #[error("norm {norm} deviates from 1 by more than {UNIT_NORM_TOLERANCE:e}")]
    NotUnit { norm: f64 },
    /// An angle outside `[0, pi]`.
    #[error("angle {radians} is outside [0, pi]")]
    InvalidAngle { radians: f64 },
    /// `theta(r, c)` at or below [`DEGENERATE_DENOMINATOR_THRESHOLD`]; the
    /// ratio bounds are meaningless there.
    #[error(
        "degenerate denominator: theta(r, c) = {theta_rc:e} <= {DEGENERATE_DENOMINATOR_THRESHOLD:e}"
    )]
    DegenerateDenominator { theta_rc: f64 },
}

/// A point on the unit hypersphere: finite components, dimension >= 2, norm
/// within [`UNIT_NORM_TOLERANCE`] of 1.  Construction is the only way in, so
/// every held value satisfies the invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector {
    components: Vec<f64>,
}

impl UnitVector {
    /// Wraps components that are already unit-norm; rejects anything that is
    /// not finite, too short, or off the sphere.
    pub fn new(components: Vec<f64>) -> Result<Self, GeometryError> {
        validate_finite(&components)?;
        if components.len() < MIN_DIM {
            return Err(GeometryError::DimTooSmall { dim: components.len() });
        }
        let norm = pairwise_dot(&components, &components).sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeometryError::NotUnit { norm });
        }
        Ok(Self { components })
    }

    /// Embedding dimension.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Components as a slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    /// Dot product; both vectors must share a dimension.
    pub fn dot(&self, other: &Self) -> Result<f64, GeometryError> {
        check_dims(self, other)?;
        Ok(pairwise_dot(&self.components, &other.components))
    }

    /// The antipodal point.
    pub fn negated(&self) -> Self {
        Self { components: self.components.iter().map(|x| -x).collect() }
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.components
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = GeometryError;

    fn try_from(components: Vec<f64>) -> Result<Self, Self::Error> {
        UnitVector::new(components)
    }
}

/// An angle in radians, restricted to `[0, pi]` (geodesic distances on the
/// sphere never exceed pi).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    /// Validates `radians` into an `Angle`.
    pub fn new(radians: f64) -> Result<Self, GeometryError> {
        if !radians.is_finite() || !(0.0..=core::f64::consts::PI).contains(&radians) {
            return Err(GeometryError::InvalidAngle { radians });
        }
        Ok(Self(radians))
    }

    /// The value in radians.
    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> Self {
        a.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = GeometryError;

    fn try_from(radians: f64) -> Result<Self, Self::Error> {
        Angle::new(radians)
    }
}

/// Triangle-inequality bounds on the raw ratio `theta(r, q) / theta(r, c)`,
/// computable from `theta(q, c)` and `theta(r, c)` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgiBounds {
    pub lower: f64,
    pub upper: f64,
}

/// A scored (question, context, response) triple: the three pairwise angles,
/// the grounding score, and its bounds when the denominator is usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgiScore {
    /// Angle between response and question (the score numerator).
    pub theta_rq: Angle,
    /// Angle between response and context (the score denominator).
    pub theta_rc: Angle,
    /// Angle between question and context (drives the bounds).
    pub theta_qc: Angle,
    /// `theta_rq / (theta_rc + EPS)`.
    pub sgi: f64,
    /// `None` exactly when the score is degenerate
    /// (`theta_rc <= DEGENERATE_DENOMINATOR_THRESHOLD`).
    pub bounds: Option<SgiBounds>,
}

impl SgiScore {
    /// Assembles a score from the three pairwise angles.
    pub fn from_angles(theta_rq: Angle, theta_rc: Angle, theta_qc: Angle) -> Self {
        let sgi = theta_rq.radians() / (theta_rc.radians() + SGI_EPSILON);
        let bounds = sgi_bounds(theta_qc, theta_rc).ok();
        Self { theta_rq, theta_rc, theta_qc, sgi, bounds }
    }

    /// True when `theta(r, c)` was too small for the ratio to mean anything.
    /// Degenerate scores are reported but excluded from aggregate statistics.
    pub fn is_degenerate(&self) -> bool {
        self.bounds.is_none()
    }
}

fn validate_finite(components: &[f64]) -> Result<(), GeometryError> {
    for (index, x) in components.iter().enumerate() {
        if !x.is_finite() {
            return Err(GeometryError::NonFinite { index });
        }
    }
    Ok(())
}

fn check_dims(a: &UnitVector, b: &UnitVector) -> Result<(), GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Projects a raw embedding onto the unit sphere.
///
/// Scaling by the largest absolute component first keeps the norm computation
/// from overflowing or underflowing on extreme inputs; the result is fully
/// determined by the input bits, so repeated calls agree exactly.
pub fn normalize(raw: &[f64]) -> Result<UnitVector, GeometryError> {
    validate_finite(raw)?;
    if raw.len() < MIN_DIM {
        return Err(GeometryError::DimTooSmall { dim: raw.len() });
    }
    let max_abs = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max_abs == 0.0 {
        return Err(GeometryError::ZeroVector { norm: 0.0 });
    }
    let scaled: Vec<f64> = raw.iter().map(|x| x / max_abs).collect();
    let scaled_norm = pairwise_dot(&scaled, &scaled).sqrt();
    let norm = max_abs * scaled_norm;
    if !(norm.is_finite()) || norm < ZERO_NORM_THRESHOLD {
        return Err(GeometryError::ZeroVector { norm });
    }
    let components: Vec<f64> = scaled.iter().map(|x| x / scaled_norm).collect();
    UnitVector::new(components)
}

/// Geodesic distance `acos(clip(a . b, -1, 1))`.
///
/// The clip absorbs the inevitable `|dot| = 1 + O(eps)` rounding on aligned
/// vectors, so the result is always finite and in `[0, pi]`.  The underlying
/// dot product is order-symmetric bit-for-bit, hence so is the distance.
pub fn angular_distance(a: &UnitVector, b: &UnitVector) -> Result<Angle, GeometryError> {
    let dot = a.dot(b)?.clamp(-1.0, 1.0);
    Angle::new(dot.acos())
}

/// Scores one (question, context, response) triple.
///
/// All three vectors must share a dimension.  The score is
/// `theta(r, q) / (theta(r, c) + EPS)`; bounds are attached unless
/// `theta(r, c)` is degenerate, in which case [`SgiScore::bounds`] is `None`
/// and [`SgiScore::is_degenerate`] reports true.
pub fn compute_sgi(
    question: &UnitVector,
    context: &UnitVector,
    response: &UnitVector,
) -> Result<SgiScore, GeometryError> {
    check_dims(question, context)?;
    check_dims(question, response)?;
    let theta_rq = angular_distance(response, question)?;
    let theta_rc = angular_distance(response, context)?;
    let theta_qc = angular_distance(question, context)?;
    Ok(SgiScore::from_angles(theta_rq, theta_rc, theta_qc))
}

/// Data-free bounds on the raw ratio `theta(r, q) / theta(r, c)`.
///
/// From the spherical triangle inequality,
/// `|theta(q, c) - theta(r, c)| <= theta(r, q) <= theta(q, c) + theta(r, c)`,
/// dividing through by `theta(r, c)` gives
///
/// ```text
/// |theta_qc / theta_rc - 1|  <=  theta_rq / theta_rc  <=  theta_qc / theta_rc + 1
/// ```
///
/// Errors with [`GeometryError::DegenerateDenominator`] when `theta_rc` is at
/// or below [`DEGENERATE_DENOMINATOR_THRESHOLD`].
pub fn sgi_bounds(theta_qc: Angle, theta_rc: Angle) -> Result<SgiBounds, GeometryError> {
    let rc = theta_rc.radians();
    if rc <= DEGENERATE_DENOMINATOR_THRESHOLD {
        return Err(GeometryError::DegenerateDenominator { theta_rc: rc });
    }
    let ratio = theta_qc.radians() / rc;
    Ok(SgiBounds { lower: (ratio - 1.0).abs(), upper: ratio + 1.0 })
}

/// Geodesic interpolation from `a` (at `t = 0`) to `b` (at `t = 1`).
///
/// For nearly parallel endpoints the chord and the arc coincide to rounding,
/// so the implementation falls back to a normalized linear mix there;
/// antiparallel endpoints have no unique geodesic and are rejected as
/// degenerate.
pub fn slerp(a: &UnitVector, b: &UnitVector, t: f64) -> Result<UnitVector, GeometryError> {
    check_dims(a, b)?;
    if !t.is_finite() {
        return Err(GeometryError::NonFinite { index: 0 });
    }
    let omega = angular_distance(a, b)?.radians();
    const PARALLEL_TOL: f64 = 1e-9;
    if omega < PARALLEL_TOL {
        let mixed: Vec<f64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(&x, &y)| (1.0 - t) * x + t * y)
            .collect();
        return normalize(&mixed);
    }
    if omega > core::f64::consts::PI - PARALLEL_TOL {
        return Err(GeometryError::DegenerateDenominator { theta_rc: omega });
    }
    let sin_omega = omega.sin();
    let wa = ((1.0 - t) * omega).sin() / sin_omega;
    let wb = (t * omega).sin() / sin_omega;
    let mixed: Vec<f64> =
        a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| wa * x + wb * y).collect();
    normalize(&mixed)
}
