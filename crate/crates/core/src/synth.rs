//! Synthetic benchmark generator with known geometric ground truth.
//!
//! Each instance places three points on the unit hypersphere: a question
//! direction `q` drawn uniformly, a context `c` at a configured exact angle
//! from `q`, and a response `r` drawn around a class-dependent mean
//! direction.  Hallucinated responses concentrate near the question
//! (geodesic pull 0.2 toward the context); valid responses sit much closer
//! to the context (pull 0.7) with a wider spread.  Under this construction
//! valid responses get systematically higher grounding ratios, so the
//! generator doubles as an oracle for the separation analyses.
//!
//! Design choices worth naming:
//!
//! * **Geodesic mean placement.**  Class means interpolate between `q` and
//!   `c` along the great circle (slerp), so the configured pulls are true
//!   arc-length fractions of the question–context angle.
//! * **Tangent-space Gaussian noise, not von Mises–Fisher.**  Responses are
//!   displaced from their mean by an isotropic Gaussian step in the tangent
//!   space with per-component scale `1/sqrt(noise_kappa)`.  In high
//!   dimension this matches vMF concentration (the angular displacement is
//!   chi-distributed with `dim - 1` degrees of freedom) while staying exact,
//!   cheap, and free of rejection loops.
//! * **Counter-based seeding.**  Every instance gets its own ChaCha8 stream
//!   (`set_stream(index)`) from the one seed, so generation is reproducible
//!   across platforms and independent of iteration order.
//!
//! Labels alternate through the index range (evenly striped rather than
//! block-assigned) so any positional slicing of the dataset still contains
//! both classes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// Brings f64 math methods into scope under no_std; redundant (and therefore
// allowed as unused) when std is enabled.
#[allow(unused_imports)]
use num_traits::Float;

use crate::analysis::{separation, AnalysisError, ScoredRecord, SeparationReport};
use crate::corpus::{Label, RagInstance};
use crate::embedding::EmbeddedInstance;
use crate::geometry::{slerp, GeometryError, UnitVector};
use crate::numeric::pairwise_dot;

/// Smallest embedding dimension the angular construction supports: placing
/// `c` at an exact angle needs an orthogonal complement, and the tangent
/// noise needs at least one direction orthogonal to both.
pub const MIN_SYNTH_DIM: usize = 3;

/// Errors from the synthetic generator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    /// A configuration field is out of range.
    #[error("invalid synthetic config: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Configuration for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Embedding dimension (at least [`MIN_SYNTH_DIM`]).
    pub dim: usize,
    /// Number of instances.
    pub n: usize,
    /// Exact question–context angle in radians, in (0, π).
    pub theta_qc: f64,
    /// Geodesic fraction from `q` toward `c` for hallucinated means.
    pub lazy_pull: f64,
    /// Geodesic fraction from `q` toward `c` for valid means.
    pub grounded_pull: f64,
    /// Noise concentration; per-component tangent scale is `1/sqrt(this)`.
    pub noise_kappa: f64,
    /// Base RNG seed; each instance derives stream `i` from it.
    pub seed: u64,
    /// Fraction of instances labeled hallucinated (count is `floor(n * f)`).
    pub halluc_fraction: f64,
    /// Multiplier on the valid class's noise scale.  Values above 1 make
    /// valid responses more dispersed than hallucinated ones, which also
    /// separates the raw response–context angle in the expected direction.
    pub valid_noise_scale: f64,
    /// Strength of the response-length noise modulation in [0, 1]: 0 leaves
    /// noise independent of length; larger values shrink noise for longer
    /// responses.  A deliberately simple hook for exercising the length
    /// subgroup analysis against a known effect.
    pub response_length_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 64,
            n: 2000,
            theta_qc: 1.0,
            lazy_pull: 0.2,
            grounded_pull: 0.7,
            noise_kappa: 50.0,
            seed: 42,
            halluc_fraction: 0.5,
            valid_noise_scale: 1.4,
            response_length_noise: 0.0,
        }
    }
}

impl SynthConfig {
    /// Checks every field range; returns the first violation.
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: &str| {
            Err(SynthError::InvalidConfig { reason: reason.to_string() })
        };
        if self.dim < MIN_SYNTH_DIM {
            return fail(&format!("dim must be at least {MIN_SYNTH_DIM}, got {}", self.dim));
        }
        if self.n == 0 {
            return fail("n must be positive");
        }
        if !self.theta_qc.is_finite()
            || self.theta_qc <= 0.0
            || self.theta_qc >= core::f64::consts::PI
        {
            return fail(&format!("theta_qc must lie in (0, pi), got {}", self.theta_qc));
        }
        for (name, pull) in [("lazy_pull", self.lazy_pull), ("grounded_pull", self.grounded_pull)] {
            if !pull.is_finite() || !(0.0..=1.0).contains(&pull) {
                return fail(&format!("{name} must lie in [0, 1], got {pull}"));
            }
        }
        if !self.noise_kappa.is_finite() || self.noise_kappa <= 0.0 {
            return fail(&format!("noise_kappa must be positive, got {}", self.noise_kappa));
        }
        if !self.halluc_fraction.is_finite() || !(0.0..=1.0).contains(&self.halluc_fraction) {
            return fail(&format!(
                "halluc_fraction must lie in [0, 1], got {}",
                self.halluc_fraction
            ));
        }
        if !self.valid_noise_scale.is_finite() || self.valid_noise_scale <= 0.0 {
            return fail(&format!(
                "valid_noise_scale must be positive, got {}",
                self.valid_noise_scale
            ));
        }
        if !self.response_length_noise.is_finite()
            || !(0.0..=1.0).contains(&self.response_length_noise)
        {
            return fail(&format!(
                "response_length_noise must lie in [0, 1], got {}",
                self.response_length_noise
            ));
        }
        Ok(())
    }
}

/// A generated dataset together with its scored records and separation
/// summary, so callers get the ground-truth-checked artifacts in one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub instances: Vec<EmbeddedInstance>,
    pub records: Vec<ScoredRecord>,
    pub separation: SeparationReport,
}

/// One point of a question–context-angle sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSweepPoint {
    pub theta_qc: f64,
    pub separation: SeparationReport,
}

/// Marsaglia polar method; two uniforms per accepted pair, no tables.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Draws a uniformly distributed direction on the unit sphere in `dim`
/// dimensions (normalized isotropic Gaussian).
pub fn random_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Result<UnitVector, GeometryError> {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        // Resampling on a zero draw keeps the output exactly uniform; the
        // branch is unreachable in practice.
        if let Ok(v) = crate::geometry::normalize(&raw) {
            return Ok(v);
        }
    }
}

/// Returns a unit vector at exactly `angle` radians from `anchor`, with the
/// off-axis direction drawn uniformly from the anchor's orthocomplement.
///
/// Requires `dim >= 3`.  The endpoint angles are handled exactly: 0 returns
/// the anchor, π returns its antipode.
pub fn sample_at_angle<R: Rng>(
    anchor: &UnitVector,
    angle: f64,
    rng: &mut R,
) -> Result<UnitVector, SynthError> {
    let dim = anchor.dim();
    if dim < MIN_SYNTH_DIM {
        return Err(SynthError::InvalidConfig {
            reason: format!("sample_at_angle needs dim >= {MIN_SYNTH_DIM}, got {dim}"),
        });
    }
    if !angle.is_finite() || !(0.0..=core::f64::consts::PI).contains(&angle) {
        return Err(SynthError::Geometry(GeometryError::InvalidAngle { radians: angle }));
    }
    if angle == 0.0 {
        return Ok(anchor.clone());
    }
    if angle == core::f64::consts::PI {
        return Ok(anchor.negated());
    }
    let direction = orthonormal_step(anchor, rng)?;
    let (sin_a, cos_a) = angle.sin_cos();
    let out: Vec<f64> = anchor
        .as_slice()
        .iter()
        .zip(direction.iter())
        .map(|(&a, &d)| cos_a * a + sin_a * d)
        .collect();
    Ok(crate::geometry::normalize(&out)?)
}

/// Draws a uniform unit direction orthogonal to `anchor` (Gaussian draw,
/// Gram–Schmidt projection, renormalize).
fn orthonormal_step<R: Rng>(anchor: &UnitVector, rng: &mut R) -> Result<Vec<f64>, SynthError> {
    let dim = anchor.dim();
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let along = pairwise_dot(&raw, anchor.as_slice());
        let perp: Vec<f64> = raw
            .iter()
            .zip(anchor.as_slice())
            .map(|(&g, &a)| g - along * a)
            .collect();
        let norm = pairwise_dot(&perp, &perp).sqrt();
        if norm > 1e-12 {
            return Ok(perp.iter().map(|&p| p / norm).collect());
        }
    }
}

/// Displaces `mean_dir` by a tangent-space Gaussian step with per-component
/// scale `sigma`: the step's length becomes the angular displacement, its
/// direction the great-circle heading.
fn perturb<R: Rng>(
    mean_dir: &UnitVector,
    sigma: f64,
    rng: &mut R,
) -> Result<UnitVector, SynthError> {
    let dim = mean_dir.dim();
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| sigma * standard_normal(rng)).collect();
        let along = pairwise_dot(&raw, mean_dir.as_slice());
        let perp: Vec<f64> = raw
            .iter()
            .zip(mean_dir.as_slice())
            .map(|(&g, &m)| g - along * m)
            .collect();
        let delta = pairwise_dot(&perp, &perp).sqrt();
        if delta <= 1e-12 {
            continue;
        }
        let (sin_d, cos_d) = delta.sin_cos();
        let out: Vec<f64> = mean_dir
            .as_slice()
            .iter()
            .zip(perp.iter())
            .map(|(&m, &p)| cos_d * m + sin_d * p / delta)
            .collect();
        return Ok(crate::geometry::normalize(&out)?);
    }
}

/// True when instance `i` of the dataset is labeled hallucinated.  The
/// assignment stripes `floor(n * fraction)` hallucinated labels evenly
/// through the index range.
fn is_hallucinated(index: usize, fraction: f64) -> bool {
    let f = fraction;
    ((index as f64 + 1.0) * f).floor() - (index as f64 * f).floor() >= 1.0
}

/// Placeholder text with exactly `tokens` whitespace-separated tokens, the
/// first carrying the instance id so texts stay distinct.
fn placeholder_text(prefix: &str, index: usize, tokens: usize) -> String {
    let mut text = format!("{prefix}{index:06}");
    for _ in 1..tokens {
        text.push_str(" w");
    }
    text
}

/// Generates the dataset, scores it, and summarizes the separation.
///
/// Postconditions: every instance's question–context angle equals
/// `config.theta_qc` to within 1e-9; exactly `floor(n * halluc_fraction)`
/// instances are labeled hallucinated; output is a pure function of the
/// config.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    let mut instances = Vec::with_capacity(config.n);
    let base_sigma = 1.0 / config.noise_kappa.sqrt();
    for i in 0..config.n {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let hallucinated = is_hallucinated(i, config.halluc_fraction);

        let q = random_unit_vector(config.dim, &mut rng)?;
        let c = sample_at_angle(&q, config.theta_qc, &mut rng)?;
        let pull = if hallucinated { config.lazy_pull } else { config.grounded_pull };
        let mean_dir = slerp(&q, &c, pull)?;

        let q_len = rng.random_range(3..=20usize);
        let c_len = rng.random_range(10..=200usize);
        let r_len = rng.random_range(5..=120usize);
        // Longer responses get proportionally less noise when the hook is on;
        // the factor spans [1, 1 + strength] over the length range.
        let length_factor = 1.0
            + config.response_length_noise * (1.0 - (r_len as f64 - 5.0) / 115.0);
        let class_scale = if hallucinated { 1.0 } else { config.valid_noise_scale };
        let sigma = base_sigma * class_scale * length_factor;
        let r = perturb(&mean_dir, sigma, &mut rng)?;

        let label = if hallucinated { Label::Hallucinated } else { Label::Valid };
        let instance = RagInstance {
            id: format!("synth-{i:06}"),
            question: placeholder_text("q", i, q_len),
            context: placeholder_text("c", i, c_len),
            response: placeholder_text("r", i, r_len),
            label: Some(label),
        };
        instances.push(EmbeddedInstance::new(instance, q, c, r, "synthetic".to_string())?);
    }
    let records = crate::analysis::score_dataset(&instances)?;
    let separation = separation(&records)?;
    Ok(SynthDataset { config: config.clone(), instances, records, separation })
}

/// Runs [`generate`] across several question–context angles with the rest of
/// the config held fixed.  Requires at least two angles, each valid for the
/// base config.
pub fn sweep_theta_qc(
    config: &SynthConfig,
    angles: &[f64],
) -> Result<Vec<ThetaSweepPoint>, SynthError> {
    if angles.len() < 2 {
        return Err(SynthError::InvalidConfig {
            reason: format!("sweep needs at least 2 angles, got {}", angles.len()),
        });
    }
    let mut points = Vec::with_capacity(angles.len());
    for &theta_qc in angles {
        let swept = SynthConfig { theta_qc, ..config.clone() };
        let dataset = generate(&swept)?;
        points.push(ThetaSweepPoint { theta_qc, separation: dataset.separation });
    }
    Ok(points)
}
