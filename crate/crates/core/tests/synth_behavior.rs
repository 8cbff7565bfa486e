//! Distributional checks on the synthetic generator and the statistical
//! invariants the analyses promise on its output: direction sampling is
//! rotation-free, shuffled labels kill the signal, independent labels land
//! inside binomial bands, and rankings survive monotone transforms.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgi_core::analysis::{calibrate, separation, ScoredRecord};
use sgi_core::corpus::Label;
use sgi_core::synth::{generate, random_unit_vector, SynthConfig};

/// Chi-square critical value for df=15 at alpha=0.001.
const CHI2_DF15_P999: f64 = 37.70;

/// The planar angle of a uniform spherical direction is uniform on the
/// circle; bin it and chi-square against flatness.
#[test]
fn unit_vectors_have_uniform_planar_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let n = 8000usize;
    let bins = 16usize;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        let v = random_unit_vector(8, &mut rng).unwrap();
        let angle = v.as_slice()[1].atan2(v.as_slice()[0]);
        let frac = (angle + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
        let bin = ((frac * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_DF15_P999, "chi2 {chi2} counts {counts:?}");
}

/// Coordinate means of uniform directions vanish like 1/sqrt(n).
#[test]
fn unit_vectors_are_centered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let dim = 16;
    let n = 4000usize;
    let mut sums = vec![0.0f64; dim];
    for _ in 0..n {
        let v = random_unit_vector(dim, &mut rng).unwrap();
        for (s, x) in sums.iter_mut().zip(v.as_slice()) {
            *s += x;
        }
    }
    // Per-coordinate variance is 1/dim, so the mean's 5-sigma band is
    // 5 / sqrt(n * dim).
    let band = 5.0 / ((n * dim) as f64).sqrt();
    for (i, s) in sums.iter().enumerate() {
        let mean = s / n as f64;
        assert!(mean.abs() < band, "coordinate {i} mean {mean} exceeds {band}");
    }
}

fn shuffled_labels(records: &[ScoredRecord], seed: u64) -> Vec<ScoredRecord> {
    let mut labels: Vec<Option<Label>> = records.iter().map(|r| r.label).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);
    records
        .iter()
        .zip(labels)
        .map(|(r, label)| ScoredRecord { label, ..r.clone() })
        .collect()
}

/// Breaking the label–geometry link must erase the separation.
#[test]
fn shuffled_labels_show_no_separation() {
    let config = SynthConfig { n: 5000, ..SynthConfig::default() };
    let dataset = generate(&config).unwrap();
    let shuffled = shuffled_labels(&dataset.records, 1234);
    let report = separation(&shuffled).unwrap();
    assert!(report.cohens_d.abs() < 0.1, "null d {}", report.cohens_d);
    assert!(
        (0.45..=0.55).contains(&report.auc),
        "null auc {}",
        report.auc
    );
}

/// With labels independent of scores, every decile's hallucination rate is a
/// binomial draw around the base rate; check 3-sigma bands.
#[test]
fn independent_labels_stay_inside_binomial_bands() {
    let config = SynthConfig { n: 5000, ..SynthConfig::default() };
    let dataset = generate(&config).unwrap();
    let shuffled = shuffled_labels(&dataset.records, 77);
    let analysis = calibrate(&shuffled).unwrap();
    let base_rate = 0.5;
    for (i, row) in analysis.deciles.iter().enumerate() {
        let sigma = (base_rate * (1.0 - base_rate) / row.n as f64).sqrt();
        assert!(
            (row.halluc_rate - base_rate).abs() < 3.0 * sigma,
            "decile {i}: rate {} outside {} +/- 3*{}",
            row.halluc_rate,
            base_rate,
            sigma
        );
    }
}

/// AUC and the separation sign are rank statistics: any strictly increasing
/// transform of the scores must leave them unchanged.
#[test]
fn ranking_outcomes_survive_monotone_transforms() {
    let config = SynthConfig { n: 400, dim: 32, ..SynthConfig::default() };
    let dataset = generate(&config).unwrap();
    let baseline = separation(&dataset.records).unwrap();

    let transformed: Vec<ScoredRecord> = dataset
        .records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            // Strictly increasing, nonlinear.
            out.score.sgi = out.score.sgi.powi(3) + 2.0 * out.score.sgi;
            out
        })
        .collect();
    let after = separation(&transformed).unwrap();
    assert_eq!(baseline.auc, after.auc);
    assert_eq!(baseline.cohens_d > 0.0, after.cohens_d > 0.0);
}

/// The generator's one population-level promise: valid responses score
/// higher, overwhelmingly, at the default configuration.
#[test]
fn default_population_direction_is_one_sided_significant() {
    let dataset = generate(&SynthConfig::default()).unwrap();
    let report = &dataset.separation;
    assert!(report.mean_valid > report.mean_halluc);
    assert!(report.welch.p_one_sided_greater() < 0.001);
}

/// Per-instance streams make generation order-independent: instance i is the
/// same whether generated inside a batch of n or a batch of n/2.
#[test]
fn per_instance_streams_are_prefix_stable() {
    let full = generate(&SynthConfig { n: 40, dim: 8, ..SynthConfig::default() }).unwrap();
    let half = generate(&SynthConfig { n: 20, dim: 8, ..SynthConfig::default() }).unwrap();
    for (a, b) in half.instances.iter().zip(&full.instances) {
        assert_eq!(a, b);
    }
}
