//! Dataset-level analyses over scored instances.
//!
//! Each pipeline here consumes [`ScoredRecord`]s (produced by
//! [`score_dataset`] from embedded instances) and emits a report struct:
//! valid/hallucinated separation, difficulty strata by question–context
//! angle, length subgroups, numerator/denominator decomposition, cross-model
//! score agreement, and calibration.  Conventions shared by all of them:
//!
//! * degenerate records (denominator angle ≈ 0) are excluded from every
//!   statistic and the exclusion count is reported;
//! * the positive class is `valid` and higher SGI predicts it;
//! * outputs are deterministic functions of their inputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{length_features, Label, LengthFeatures};
use crate::embedding::EmbeddedInstance;
use crate::geometry::{compute_sgi, GeometryError, SgiScore};
use crate::numeric::mean;
use crate::stats::{
    cohens_d, ece, minmax_prob, pearson, quantile_buckets, roc_auc, spearman, welch_t,
    CalibrationReport, StatsError, ValueRange, WelchResult,
};

/// Errors from the analysis pipelines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    /// Instances embedded under different models in one dataset.
    #[error("mixed model ids: {first:?} vs {other:?}")]
    MixedModels { first: String, other: String },
    /// Cross-model inputs whose instance ids cannot be aligned.
    #[error("misaligned ids across models: {detail}")]
    MisalignedIds { detail: String },
    /// A label-dependent analysis hit an unlabeled record.
    #[error("record {id:?} has no label")]
    UnlabeledRecord { id: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One instance's scored quantities: the angles, the score, label and length
/// metadata, and the degeneracy flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub label: Option<Label>,
    pub model_id: String,
    pub score: SgiScore,
    pub lengths: LengthFeatures,
    /// True when the denominator angle was below threshold; such records are
    /// excluded from statistics but still reported.
    pub degenerate: bool,
}

/// Which per-record quantity a separation report ranks by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// The grounding ratio itself (the default everywhere).
    Sgi,
    /// The raw response–question angle; used for paired truthful-answer
    /// corpora where no retrieved context exists and the question stands in.
    ThetaRq,
}

impl ScoreKind {
    fn extract(self, record: &ScoredRecord) -> f64 {
        match self {
            ScoreKind::Sgi => record.score.sgi,
            ScoreKind::ThetaRq => record.score.theta_rq.radians(),
        }
    }
}

/// Valid-vs-hallucinated separation of one scored dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub model_id: String,
    pub score_kind: ScoreKind,
    pub n_valid: usize,
    pub n_halluc: usize,
    pub n_degenerate_excluded: usize,
    pub mean_valid: f64,
    pub mean_halluc: f64,
    /// Pooled-SD effect size, valid minus hallucinated.
    pub cohens_d: f64,
    pub welch: WelchResult,
    /// Valid as positive class; higher score predicts valid.  Below 0.5 means
    /// the score ranks the classes the other way and is reported as-is.
    pub auc: f64,
}

/// Per-tercile separation summary used by stratification and subgroups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TercileReport {
    /// Observed [min, max] of the stratifying quantity in this tercile.
    pub range: ValueRange,
    pub n: usize,
    pub mean_valid: f64,
    pub mean_halluc: f64,
    pub cohens_d: f64,
    pub auc: f64,
}

/// Separation stratified by question–context angular separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub model_id: String,
    pub terciles: Vec<TercileReport>,
    pub n_degenerate_excluded: usize,
}

/// Which length feature a subgroup analysis cuts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthField {
    Question,
    Context,
    Response,
}

impl LengthField {
    fn extract(self, lengths: &LengthFeatures) -> f64 {
        match self {
            LengthField::Question => lengths.q_len as f64,
            LengthField::Context => lengths.c_len as f64,
            LengthField::Response => lengths.r_len as f64,
        }
    }
}

/// Separation within terciles of one length feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub model_id: String,
    pub field: LengthField,
    pub terciles: Vec<TercileReport>,
    /// True when a tie group straddles a tercile cut, i.e. membership at the
    /// boundary was decided positionally (always the case for constant
    /// features, common for integer lengths).
    pub degenerate_boundaries: bool,
    pub n_degenerate_excluded: usize,
}

/// Which angle carries the separation signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryDriver {
    ThetaRq,
    ThetaRc,
}

/// Effect sizes of the score's numerator and denominator taken separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub model_id: String,
    /// Cohen's d of θ(r,q), valid minus hallucinated.
    pub d_theta_rq: f64,
    /// Cohen's d of θ(r,c), valid minus hallucinated.
    pub d_theta_rc: f64,
    /// The component with the larger |d| (ties go to θ(r,q)).
    pub primary_driver: PrimaryDriver,
    pub n_degenerate_excluded: usize,
}

/// Pairwise score agreement between embedding models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModelReport {
    /// Sorted model ids; matrix rows/columns follow this order.
    pub model_ids: Vec<String>,
    /// Instances present (non-degenerate) under every model.
    pub n_common: usize,
    pub pearson: Vec<Vec<f64>>,
    pub spearman: Vec<Vec<f64>>,
    pub mean_offdiag_pearson: f64,
    pub mean_offdiag_spearman: f64,
}

/// One SGI decile's hallucination rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub range: ValueRange,
    pub n: usize,
    pub halluc_rate: f64,
}

/// Calibration of min-max probabilities plus the decile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnalysis {
    pub model_id: String,
    pub calibration: CalibrationReport,
    /// Hallucination rate by SGI decile, ascending in SGI.
    pub deciles: Vec<DecileRow>,
    pub n_used: usize,
    pub n_degenerate_excluded: usize,
}

/// Scores every embedded instance, preserving input order.
///
/// All instances must carry the same `model_id`; lengths are recomputed from
/// the texts so records stay self-describing.
pub fn score_dataset(embedded: &[EmbeddedInstance]) -> Result<Vec<ScoredRecord>, AnalysisError> {
    if let Some(first) = embedded.first() {
        for inst in embedded.iter().skip(1) {
            if inst.model_id != first.model_id {
                return Err(AnalysisError::MixedModels {
                    first: first.model_id.clone(),
                    other: inst.model_id.clone(),
                });
            }
        }
    }
    let mut records = Vec::with_capacity(embedded.len());
    for inst in embedded {
        let score = compute_sgi(&inst.q_vec, &inst.c_vec, &inst.r_vec)?;
        let degenerate = score.is_degenerate();
        records.push(ScoredRecord {
            id: inst.instance.id.clone(),
            label: inst.instance.label,
            model_id: inst.model_id.clone(),
            score,
            lengths: length_features(&inst.instance),
            degenerate,
        });
    }
    Ok(records)
}

fn non_degenerate(records: &[ScoredRecord]) -> Vec<&ScoredRecord> {
    records.iter().filter(|r| !r.degenerate).collect()
}

fn require_label(record: &ScoredRecord) -> Result<Label, AnalysisError> {
    record.label.ok_or_else(|| AnalysisError::UnlabeledRecord { id: record.id.clone() })
}

fn shared_model_id(records: &[ScoredRecord]) -> String {
    records.first().map(|r| r.model_id.clone()).unwrap_or_default()
}

/// Splits records into (valid, hallucinated) score vectors for one kind.
fn split_by_label(
    records: &[&ScoredRecord],
    kind: ScoreKind,
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let mut valid = Vec::new();
    let mut halluc = Vec::new();
    for record in records {
        match require_label(record)? {
            Label::Valid => valid.push(kind.extract(record)),
            Label::Hallucinated => halluc.push(kind.extract(record)),
        }
    }
    Ok((valid, halluc))
}

fn auc_for(records: &[&ScoredRecord], kind: ScoreKind) -> Result<f64, AnalysisError> {
    let scores: Vec<f64> = records.iter().map(|r| kind.extract(r)).collect();
    let mut labels = Vec::with_capacity(records.len());
    for record in records {
        labels.push(require_label(record)? == Label::Valid);
    }
    Ok(roc_auc(&scores, &labels, true)?)
}

/// Valid-vs-hallucinated separation on the grounding score.
pub fn separation(records: &[ScoredRecord]) -> Result<SeparationReport, AnalysisError> {
    separation_with(records, ScoreKind::Sgi)
}

/// Separation on a chosen per-record quantity ([`ScoreKind::ThetaRq`] serves
/// paired truthful-answer corpora, where the ratio's denominator does not
/// exist meaningfully).
pub fn separation_with(
    records: &[ScoredRecord],
    kind: ScoreKind,
) -> Result<SeparationReport, AnalysisError> {
    let usable = non_degenerate(records);
    let (valid, halluc) = split_by_label(&usable, kind)?;
    if valid.is_empty() || halluc.is_empty() {
        return Err(AnalysisError::Stats(StatsError::SingleClass));
    }
    Ok(SeparationReport {
        model_id: shared_model_id(records),
        score_kind: kind,
        n_valid: valid.len(),
        n_halluc: halluc.len(),
        n_degenerate_excluded: records.len() - usable.len(),
        mean_valid: mean(&valid),
        mean_halluc: mean(&halluc),
        cohens_d: cohens_d(&valid, &halluc)?,
        welch: welch_t(&valid, &halluc)?,
        auc: auc_for(&usable, kind)?,
    })
}

/// Per-tercile separation over an arbitrary stratifying value.
fn terciles_over(
    usable: &[&ScoredRecord],
    values: &[f64],
) -> Result<(Vec<TercileReport>, bool), AnalysisError> {
    let buckets = quantile_buckets(values, 3)?;
    let mut reports = Vec::with_capacity(3);
    for tercile in 0..3 {
        let members: Vec<&ScoredRecord> = usable
            .iter()
            .zip(buckets.assignments.iter())
            .filter_map(|(&r, &b)| (b == tercile).then_some(r))
            .collect();
        let (valid, halluc) = split_by_label(&members, ScoreKind::Sgi)?;
        if valid.is_empty() || halluc.is_empty() {
            return Err(AnalysisError::Stats(StatsError::SingleClass));
        }
        reports.push(TercileReport {
            range: buckets.ranges[tercile],
            n: members.len(),
            mean_valid: mean(&valid),
            mean_halluc: mean(&halluc),
            cohens_d: cohens_d(&valid, &halluc)?,
            auc: auc_for(&members, ScoreKind::Sgi)?,
        });
    }
    let straddled = buckets
        .ranges
        .windows(2)
        .any(|w| w[0].max >= w[1].min);
    Ok((reports, straddled))
}

/// Separation within terciles of the question–context angle: discriminative
/// power should grow with the angular room between question and context.
pub fn stratify_by_separation(records: &[ScoredRecord]) -> Result<StratifiedReport, AnalysisError> {
    let usable = non_degenerate(records);
    require_min_per_class(&usable, 3)?;
    let values: Vec<f64> = usable.iter().map(|r| r.score.theta_qc.radians()).collect();
    let (terciles, _) = terciles_over(&usable, &values)?;
    Ok(StratifiedReport {
        model_id: shared_model_id(records),
        terciles,
        n_degenerate_excluded: records.len() - usable.len(),
    })
}

/// Separation within terciles of one text-length feature.
pub fn subgroup_by_length(
    records: &[ScoredRecord],
    field: LengthField,
) -> Result<SubgroupReport, AnalysisError> {
    let usable = non_degenerate(records);
    require_min_per_class(&usable, 3)?;
    let values: Vec<f64> = usable.iter().map(|r| field.extract(&r.lengths)).collect();
    let (terciles, degenerate_boundaries) = terciles_over(&usable, &values)?;
    Ok(SubgroupReport {
        model_id: shared_model_id(records),
        field,
        terciles,
        degenerate_boundaries,
        n_degenerate_excluded: records.len() - usable.len(),
    })
}

fn require_min_per_class(usable: &[&ScoredRecord], min: usize) -> Result<(), AnalysisError> {
    let mut n_valid = 0usize;
    let mut n_halluc = 0usize;
    for record in usable {
        match require_label(record)? {
            Label::Valid => n_valid += 1,
            Label::Hallucinated => n_halluc += 1,
        }
    }
    let smallest = n_valid.min(n_halluc);
    if smallest < min {
        return Err(AnalysisError::Stats(StatsError::TooFewSamples { needed: min, got: smallest }));
    }
    Ok(())
}

/// Effect sizes of the numerator angle θ(r,q) and denominator angle θ(r,c)
/// separately, identifying which one drives the separation.
pub fn decompose(records: &[ScoredRecord]) -> Result<DecompositionReport, AnalysisError> {
    let usable = non_degenerate(records);
    let (valid_rq, halluc_rq) = split_by_label(&usable, ScoreKind::ThetaRq)?;
    if valid_rq.is_empty() || halluc_rq.is_empty() {
        return Err(AnalysisError::Stats(StatsError::SingleClass));
    }
    let rc = |r: &&ScoredRecord| r.score.theta_rc.radians();
    let valid_rc: Vec<f64> = usable
        .iter()
        .filter(|r| r.label == Some(Label::Valid))
        .map(rc)
        .collect();
    let halluc_rc: Vec<f64> = usable
        .iter()
        .filter(|r| r.label == Some(Label::Hallucinated))
        .map(rc)
        .collect();
    let d_theta_rq = cohens_d(&valid_rq, &halluc_rq)?;
    let d_theta_rc = cohens_d(&valid_rc, &halluc_rc)?;
    let primary_driver = if d_theta_rq.abs() >= d_theta_rc.abs() {
        PrimaryDriver::ThetaRq
    } else {
        PrimaryDriver::ThetaRc
    };
    Ok(DecompositionReport {
        model_id: shared_model_id(records),
        d_theta_rq,
        d_theta_rc,
        primary_driver,
        n_degenerate_excluded: records.len() - usable.len(),
    })
}

/// Pairwise Pearson and Spearman agreement of per-instance scores across
/// models.
///
/// Input: per-model `(instance_id, score)` sequences.  Alignment is by id;
/// only ids present under every model enter the matrices (per-model
/// degenerate exclusions make the sets differ), and that common count is
/// reported.
pub fn cross_model(
    score_sets: &BTreeMap<String, Vec<(String, f64)>>,
) -> Result<CrossModelReport, AnalysisError> {
    if score_sets.len() < 2 {
        return Err(AnalysisError::MisalignedIds {
            detail: alloc::format!("need at least 2 models, got {}", score_sets.len()),
        });
    }
    let mut per_model: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for (model, scores) in score_sets {
        let mut by_id = BTreeMap::new();
        for (id, score) in scores {
            if by_id.insert(id.as_str(), *score).is_some() {
                return Err(AnalysisError::MisalignedIds {
                    detail: alloc::format!("duplicate id {id:?} under model {model:?}"),
                });
            }
        }
        per_model.insert(model.as_str(), by_id);
    }
    let mut common: BTreeSet<&str> =
        per_model.values().next().unwrap().keys().copied().collect();
    for by_id in per_model.values() {
        common.retain(|id| by_id.contains_key(id));
    }
    if common.len() < 2 {
        return Err(AnalysisError::MisalignedIds {
            detail: alloc::format!("only {} instance ids shared by all models", common.len()),
        });
    }
    let model_ids: Vec<String> = per_model.keys().map(|&m| String::from(m)).collect();
    let aligned: Vec<Vec<f64>> = per_model
        .values()
        .map(|by_id| common.iter().map(|id| by_id[id]).collect())
        .collect();
    let k = aligned.len();
    let mut pearson_m = alloc::vec![alloc::vec![1.0; k]; k];
    let mut spearman_m = alloc::vec![alloc::vec![1.0; k]; k];
    let mut off_p = Vec::new();
    let mut off_s = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let r = pearson(&aligned[i], &aligned[j])?;
            let rho = spearman(&aligned[i], &aligned[j])?;
            pearson_m[i][j] = r;
            pearson_m[j][i] = r;
            spearman_m[i][j] = rho;
            spearman_m[j][i] = rho;
            off_p.push(r);
            off_s.push(rho);
        }
    }
    Ok(CrossModelReport {
        model_ids,
        n_common: common.len(),
        pearson: pearson_m,
        spearman: spearman_m,
        mean_offdiag_pearson: mean(&off_p),
        mean_offdiag_spearman: mean(&off_s),
    })
}

/// Calibration of the min-max probability transform plus the hallucination
/// rate by SGI decile.
///
/// Requires at least 20 labeled non-degenerate records so the ten
/// equal-frequency bins stay meaningful.
pub fn calibrate(records: &[ScoredRecord]) -> Result<CalibrationAnalysis, AnalysisError> {
    let usable = non_degenerate(records);
    if usable.len() < 20 {
        return Err(AnalysisError::Stats(StatsError::TooFewSamples {
            needed: 20,
            got: usable.len(),
        }));
    }
    let sgi: Vec<f64> = usable.iter().map(|r| r.score.sgi).collect();
    let mut halluc_labels = Vec::with_capacity(usable.len());
    for record in &usable {
        halluc_labels.push(require_label(record)? == Label::Hallucinated);
    }
    let probs = minmax_prob(&sgi)?;
    let calibration = ece(&probs, &halluc_labels, 10)?;
    let buckets = quantile_buckets(&sgi, 10)?;
    let mut deciles = Vec::with_capacity(10);
    for decile in 0..10 {
        let mut n = 0usize;
        let mut positives = 0usize;
        for (i, &b) in buckets.assignments.iter().enumerate() {
            if b == decile {
                n += 1;
                if halluc_labels[i] {
                    positives += 1;
                }
            }
        }
        deciles.push(DecileRow {
            range: buckets.ranges[decile],
            n,
            halluc_rate: positives as f64 / n as f64,
        });
    }
    Ok(CalibrationAnalysis {
        model_id: shared_model_id(records),
        calibration,
        deciles,
        n_used: usable.len(),
        n_degenerate_excluded: records.len() - usable.len(),
    })
}
