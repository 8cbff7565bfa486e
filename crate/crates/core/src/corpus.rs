//! Labeled question/context/response instances and corpus-level utilities.
//!
//! An instance is one retrieval-augmented generation episode: the user
//! question, the retrieved context the generator was shown, the generated
//! response, and (when known) whether the response is grounded or
//! hallucinated.  Utilities here are pure data plumbing: token-count length
//! features, label-stratified subsampling, and conversion of truthful /
//! untruthful answer pairs into scoreable instances.  File parsing lives in
//! the companion CLI crate; this module only defines the shapes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// Brings f64 math methods into scope under no_std; redundant (and therefore
// allowed as unused) when std is enabled.
#[allow(unused_imports)]
use num_traits::Float;

/// Ground-truth grounding label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// The response is supported by the retrieved context.
    Valid,
    /// The response contradicts or fabricates beyond the context.
    Hallucinated,
}

/// One retrieval-augmented generation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagInstance {
    /// Unique id within a dataset.
    pub id: String,
    pub question: String,
    pub context: String,
    pub response: String,
    /// `None` for unlabeled corpora; label-dependent analyses reject those.
    pub label: Option<Label>,
}

/// Corpus-level errors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    /// A label-dependent operation hit an unlabeled instance.
    #[error("instance {id:?} has no label")]
    UnlabeledInstance { id: String },
    /// Requested more samples than the corpus holds.
    #[error("requested sample of {requested} from only {available} instances")]
    SampleTooLarge { requested: usize, available: usize },
    /// Two instances share an id.
    #[error("duplicate instance id {id:?}")]
    DuplicateId { id: String },
    /// A required text field is empty after trimming.
    #[error("instance {id:?} has an empty {field}")]
    EmptyField { id: String, field: &'static str },
}

impl RagInstance {
    /// Checks the per-instance invariants: nonempty id and nonempty
    /// question/context/response after whitespace trimming.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::EmptyField { id: self.id.clone(), field: "id" });
        }
        for (field, text) in [
            ("question", &self.question),
            ("context", &self.context),
            ("response", &self.response),
        ] {
            if text.trim().is_empty() {
                return Err(CorpusError::EmptyField { id: self.id.clone(), field });
            }
        }
        Ok(())
    }
}

/// Whitespace-token counts of the three text fields, used by the length
/// subgroup analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthFeatures {
    pub q_len: usize,
    pub c_len: usize,
    pub r_len: usize,
}

/// Token counts (whitespace splitting) for one instance.
pub fn length_features(instance: &RagInstance) -> LengthFeatures {
    LengthFeatures {
        q_len: instance.question.split_whitespace().count(),
        c_len: instance.context.split_whitespace().count(),
        r_len: instance.response.split_whitespace().count(),
    }
}

/// Draws a label-stratified subsample of `n` instances.
///
/// Per-label quotas follow the corpus proportions via largest-remainder
/// rounding (each label's count is within one of exact proportionality).
/// Within each label the instances are put in canonical id order before the
/// seeded shuffle, so the draw depends only on the corpus *contents* and the
/// seed, never on input order.  The returned sample is itself shuffled.
///
/// Requires every instance labeled, unique ids, and `n <= instances.len()`.
pub fn stratified_sample(
    instances: &[RagInstance],
    n: usize,
    seed: u64,
) -> Result<Vec<RagInstance>, CorpusError> {
    if n > instances.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: instances.len() });
    }
    let mut seen = alloc::collections::BTreeSet::new();
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(CorpusError::DuplicateId { id: inst.id.clone() });
        }
    }
    let mut by_label: [Vec<&RagInstance>; 2] = [Vec::new(), Vec::new()];
    for inst in instances {
        match inst.label {
            Some(Label::Valid) => by_label[0].push(inst),
            Some(Label::Hallucinated) => by_label[1].push(inst),
            None => return Err(CorpusError::UnlabeledInstance { id: inst.id.clone() }),
        }
    }
    for group in &mut by_label {
        group.sort_by(|a, b| a.id.cmp(&b.id));
    }

    // Largest-remainder quota allocation across the two labels.
    let total = instances.len() as f64;
    let exact: Vec<f64> = by_label.iter().map(|g| n as f64 * g.len() as f64 / total).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut leftover = n - quotas.iter().sum::<usize>();
    // Ties in the fractional part resolve in label order (valid first), which
    // is deterministic.
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = exact[i] - exact[i].floor();
        let fj = exact[j] - exact[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if quotas[i] < by_label[i].len() {
            quotas[i] += 1;
            leftover -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample: Vec<RagInstance> = Vec::with_capacity(n);
    for (group, &quota) in by_label.iter_mut().zip(quotas.iter()) {
        group.shuffle(&mut rng);
        sample.extend(group.iter().take(quota).map(|&inst| inst.clone()));
    }
    sample.shuffle(&mut rng);
    Ok(sample)
}

/// One truthful-QA style record: a question with one correct and one
/// incorrect reference answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRecord {
    pub id: String,
    pub question: String,
    pub correct_answer: String,
    pub incorrect_answer: String,
}

/// Where the context field of paired-derived instances comes from.  Truthful
/// QA sets ship no retrieved passage, so the question itself stands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    QuestionAsContext,
}

/// A pair dropped during conversion, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSkip {
    pub id: String,
    pub reason: String,
}

/// Result of [`pair_to_instances`]: the converted instances plus the skipped
/// pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingOutcome {
    pub instances: Vec<RagInstance>,
    pub skipped: Vec<PairSkip>,
}

/// Expands answer pairs into labeled instances: each pair yields one
/// valid-labeled instance (the correct answer as response) and one
/// hallucinated-labeled instance (the incorrect answer), sharing the question
/// and the derived context.
///
/// Pairs with an empty question or an empty answer on either side are dropped
/// as a unit — both siblings or neither — so the output is always exactly
/// label-balanced.  Drops are returned, not silently discarded.
pub fn pair_to_instances(pairs: &[PairedRecord], source: ContextSource) -> PairingOutcome {
    let mut instances = Vec::with_capacity(pairs.len() * 2);
    let mut skipped = Vec::new();
    for pair in pairs {
        let reason = if pair.id.trim().is_empty() {
            Some("empty id")
        } else if pair.question.trim().is_empty() {
            Some("empty question")
        } else if pair.correct_answer.trim().is_empty() {
            Some("empty correct answer")
        } else if pair.incorrect_answer.trim().is_empty() {
            Some("empty incorrect answer")
        } else {
            None
        };
        if let Some(reason) = reason {
            skipped.push(PairSkip { id: pair.id.clone(), reason: reason.to_string() });
            continue;
        }
        let context = match source {
            ContextSource::QuestionAsContext => pair.question.clone(),
        };
        instances.push(RagInstance {
            id: alloc::format!("{}::valid", pair.id),
            question: pair.question.clone(),
            context: context.clone(),
            response: pair.correct_answer.clone(),
            label: Some(Label::Valid),
        });
        instances.push(RagInstance {
            id: alloc::format!("{}::halluc", pair.id),
            question: pair.question.clone(),
            context,
            response: pair.incorrect_answer.clone(),
            label: Some(Label::Hallucinated),
        });
    }
    PairingOutcome { instances, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn inst(id: &str, label: Option<Label>) -> RagInstance {
        RagInstance {
            id: id.to_string(),
            question: format!("question {id}"),
            context: format!("context {id}"),
            response: format!("response {id}"),
            label,
        }
    }

    fn corpus(n_valid: usize, n_halluc: usize) -> Vec<RagInstance> {
        let mut out = Vec::new();
        for i in 0..n_valid {
            out.push(inst(&format!("v{i:04}"), Some(Label::Valid)));
        }
        for i in 0..n_halluc {
            out.push(inst(&format!("h{i:04}"), Some(Label::Hallucinated)));
        }
        out
    }

    #[test]
    fn length_features_count_whitespace_tokens() {
        let mut instance = inst("x", None);
        instance.question = "  what  is\tthe capital ".to_string();
        instance.context = "a b c".to_string();
        instance.response = "Paris".to_string();
        let lf = length_features(&instance);
        assert_eq!((lf.q_len, lf.c_len, lf.r_len), (4, 3, 1));
    }

    #[test]
    fn validate_rejects_blank_fields() {
        let mut instance = inst("x", None);
        instance.context = "   ".to_string();
        assert_eq!(
            instance.validate(),
            Err(CorpusError::EmptyField { id: "x".to_string(), field: "context" })
        );
    }

    #[test]
    fn balanced_corpus_samples_balanced() {
        let data = corpus(50, 50);
        let sample = stratified_sample(&data, 10, 7).unwrap();
        let n_valid = sample.iter().filter(|i| i.label == Some(Label::Valid)).count();
        assert_eq!(sample.len(), 10);
        assert_eq!(n_valid, 5);
    }

    #[test]
    fn skewed_corpus_keeps_proportions_within_one() {
        let data = corpus(60, 40);
        let sample = stratified_sample(&data, 10, 3).unwrap();
        let n_valid = sample.iter().filter(|i| i.label == Some(Label::Valid)).count();
        assert_eq!(n_valid, 6);

        let data = corpus(61, 39);
        for n in [7usize, 10, 33] {
            let sample = stratified_sample(&data, n, 3).unwrap();
            let n_valid = sample.iter().filter(|i| i.label == Some(Label::Valid)).count() as f64;
            let exact = n as f64 * 0.61;
            assert!((n_valid - exact).abs() <= 1.0, "n={n}: {n_valid} vs {exact}");
        }
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let data = corpus(13, 7);
        let sample = stratified_sample(&data, 20, 99).unwrap();
        let mut got: Vec<&str> = sample.iter().map(|i| i.id.as_str()).collect();
        let mut want: Vec<&str> = data.iter().map(|i| i.id.as_str()).collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn same_seed_same_sample_different_seed_different_sample() {
        let data = corpus(100, 100);
        let a = stratified_sample(&data, 40, 8).unwrap();
        let b = stratified_sample(&data, 40, 8).unwrap();
        let c = stratified_sample(&data, 40, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_ignores_input_order() {
        let data = corpus(30, 20);
        let mut reversed = data.clone();
        reversed.reverse();
        let a = stratified_sample(&data, 25, 5).unwrap();
        let b = stratified_sample(&reversed, 25, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_rejects_unlabeled_oversize_and_duplicates() {
        let mut data = corpus(5, 5);
        assert!(matches!(
            stratified_sample(&data, 11, 0),
            Err(CorpusError::SampleTooLarge { requested: 11, available: 10 })
        ));
        data[3].label = None;
        assert!(matches!(
            stratified_sample(&data, 4, 0),
            Err(CorpusError::UnlabeledInstance { .. })
        ));
        let mut dupes = corpus(5, 5);
        dupes[4].id = dupes[0].id.clone();
        assert!(matches!(stratified_sample(&dupes, 4, 0), Err(CorpusError::DuplicateId { .. })));
    }

    #[test]
    fn pairs_expand_balanced_with_question_as_context() {
        let pairs = vec![
            PairedRecord {
                id: "p1".to_string(),
                question: "Why is the sky blue?".to_string(),
                correct_answer: "Rayleigh scattering".to_string(),
                incorrect_answer: "Ocean reflection".to_string(),
            },
            PairedRecord {
                id: "p2".to_string(),
                question: "Q2".to_string(),
                correct_answer: "A2".to_string(),
                incorrect_answer: "".to_string(),
            },
        ];
        let out = pair_to_instances(&pairs, ContextSource::QuestionAsContext);
        assert_eq!(out.instances.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].reason, "empty incorrect answer");
        let valid = &out.instances[0];
        let halluc = &out.instances[1];
        assert_eq!(valid.id, "p1::valid");
        assert_eq!(valid.label, Some(Label::Valid));
        assert_eq!(valid.context, valid.question);
        assert_eq!(halluc.id, "p1::halluc");
        assert_eq!(halluc.label, Some(Label::Hallucinated));
        assert_eq!(halluc.response, "Ocean reflection");
        let n_valid =
            out.instances.iter().filter(|i| i.label == Some(Label::Valid)).count();
        assert_eq!(n_valid * 2, out.instances.len());
    }

    #[test]
    fn label_serde_uses_lowercase_names() {
        assert_eq!(serde_json::to_string(&Label::Valid).unwrap(), "\"valid\"");
        assert_eq!(
            serde_json::from_str::<Label>("\"hallucinated\"").unwrap(),
            Label::Hallucinated
        );
    }
}
