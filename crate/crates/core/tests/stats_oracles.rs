//! Oracle checks: every statistical kernel is compared against an
//! independent, deliberately naive reimplementation — a quadratic pair scan
//! for AUC, textbook sums for the effect sizes and correlations, and direct
//! numerical integration of the t density for the Welch p-value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgi_core::stats::{cohens_d, ece, pearson, roc_auc, spearman, welch_t};

/// O(n^2) AUC: every (positive, negative) pair contributes 1, 1/2, or 0.
fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn mean_oracle(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn var_oracle(xs: &[f64]) -> f64 {
    let m = mean_oracle(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn cohens_d_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * var_oracle(a) + (nb - 1.0) * var_oracle(b)) / (na + nb - 2.0)).sqrt();
    (mean_oracle(a) - mean_oracle(b)) / pooled
}

fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean_oracle(xs), mean_oracle(ys));
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        dx += (x - mx) * (x - mx);
        dy += (y - my) * (y - my);
    }
    num / (dx.sqrt() * dy.sqrt())
}

/// Average ranks by sorting index pairs; ties share the mean rank.
fn ranks_oracle(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && xs[order[end + 1]] == xs[order[start]] {
            end += 1;
        }
        let shared = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = shared;
        }
        start = end + 1;
    }
    ranks
}

fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    pearson_oracle(&ranks_oracle(xs), &ranks_oracle(ys))
}

/// Adaptive Simpson quadrature to a strict local tolerance.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Two-sided Student t tail probability by integrating the *unnormalized*
/// density and normalizing against its own full integral, so the oracle
/// shares no special-function code with the implementation under test.
fn t_p_two_sided_oracle(t: f64, df: f64) -> f64 {
    let density = move |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    // Map [0, 1) onto [lo, inf) via x = lo + s/(1-s).
    let tail_transformed = move |lo: f64| {
        move |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let x = lo + s / (1.0 - s);
            density(x) / ((1.0 - s) * (1.0 - s))
        }
    };
    let half_mass = adaptive_simpson(&tail_transformed(0.0), 0.0, 1.0 - 1e-12, 1e-14);
    let tail = adaptive_simpson(&tail_transformed(t.abs()), 0.0, 1.0 - 1e-12, 1e-14);
    tail / half_mass
}

/// Welch's t statistic and degrees of freedom from the textbook formulas.
fn welch_t_df_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (var_oracle(a) / na, var_oracle(b) / nb);
    let t = (mean_oracle(a) - mean_oracle(b)) / (va + vb).sqrt();
    let df = (va + vb) * (va + vb)
        / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    (t, df)
}

/// Seeded random scores on a coarse grid (to force ties) with random labels.
fn tied_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=200usize);
        let grid = rng.random_range(2..=12u32);
        let scores: Vec<f64> =
            (0..n).map(|_| rng.random_range(0..grid) as f64 / grid as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let pos = labels.iter().filter(|&&l| l).count();
        if pos > 0 && pos < n {
            return (scores, labels);
        }
    }
}

#[test]
fn auc_equals_quadratic_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (scores, labels) = tied_case(&mut rng);
        let fast = roc_auc(&scores, &labels, true).unwrap();
        let slow = auc_oracle(&scores, &labels);
        assert_eq!(fast, slow, "case {case}: fast {fast} vs oracle {slow}");
    }
}

#[test]
fn auc_orientation_flip_mirrors_the_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (scores, labels) = tied_case(&mut rng);
    let high = roc_auc(&scores, &labels, true).unwrap();
    let low = roc_auc(&scores, &labels, false).unwrap();
    assert!((high + low - 1.0).abs() < 1e-12);
}

#[test]
fn effect_size_and_correlations_match_textbook_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let na = rng.random_range(2..=120usize);
        let nb = rng.random_range(2..=120usize);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-2.0..3.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(-3.0..2.0)).collect();
        let d = cohens_d(&a, &b).unwrap();
        assert!((d - cohens_d_oracle(&a, &b)).abs() < 1e-12, "d mismatch");

        let n = na.min(nb);
        let xs = &a[..n];
        let ys = &b[..n];
        if n >= 2 {
            let r = pearson(xs, ys).unwrap();
            assert!((r - pearson_oracle(xs, ys)).abs() < 1e-12, "pearson mismatch");
            let rho = spearman(xs, ys).unwrap();
            assert!((rho - spearman_oracle(xs, ys)).abs() < 1e-12, "spearman mismatch");
        }
    }
}

#[test]
fn welch_p_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..25 {
        let na = rng.random_range(3..=60usize);
        let nb = rng.random_range(3..=60usize);
        // Mean shifts spanning p from ~1 down to ~1e-7.
        let shift = rng.random_range(0.0..1.6);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0.0..2.0)).collect();
        let result = welch_t(&a, &b).unwrap();
        let (t_oracle, df_oracle) = welch_t_df_oracle(&a, &b);
        assert!((result.t - t_oracle).abs() < 1e-10, "t mismatch case {case}");
        assert!((result.df - df_oracle).abs() < 1e-10, "df mismatch case {case}");
        let p_oracle = t_p_two_sided_oracle(result.t, result.df);
        assert!(
            (result.p_two_sided - p_oracle).abs() < 1e-8,
            "case {case}: p {} vs quadrature {}",
            result.p_two_sided,
            p_oracle
        );
    }
}

#[test]
fn welch_p_log_agrees_with_p_in_normal_range() {
    let a: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64 * 0.7).sin() * 0.3).collect();
    let b: Vec<f64> = (0..35).map(|i| 0.8 + (i as f64 * 0.9).cos() * 0.3).collect();
    let result = welch_t(&a, &b).unwrap();
    assert!(result.p_two_sided > 0.0);
    assert!((result.p_log10 - result.p_two_sided.log10()).abs() < 1e-9);
}

#[test]
fn ece_degenerate_inputs_hit_known_values() {
    // Perfectly confident, perfectly wrong half the time.
    let probs = vec![1.0; 50];
    let labels: Vec<bool> = (0..50).map(|i| i % 2 == 0).collect();
    let report = ece(&probs, &labels, 10).unwrap();
    assert!((report.ece - 0.5).abs() < 1e-12);

    // Predictions equal to observed frequencies in every bin, using dyadic
    // probabilities (k/16) so the bin means are bit-exact and the expected
    // calibration error is exactly zero.
    let mut probs2 = Vec::new();
    let mut labels2 = Vec::new();
    for b in 0..8usize {
        for i in 0..16usize {
            probs2.push(b as f64 / 16.0);
            labels2.push(i < b);
        }
    }
    let report2 = ece(&probs2, &labels2, 8).unwrap();
    assert_eq!(report2.ece, 0.0);
}
