//! Deterministic summation kernels.
//!
//! All reductions over vector components and samples go through pairwise
//! (cascade) summation: error grows O(log n) instead of O(n), and the
//! reduction tree depends only on the slice length, so results are
//! bit-reproducible across runs and platforms for the same inputs.

/// Below this length a simple sequential loop is used; the recursion only
/// kicks in above it.  The exact split points are part of the deterministic
/// contract and must not depend on anything but slice length.
const PAIRWISE_BLOCK: usize = 64;

/// Pairwise sum of a slice.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Pairwise dot product of two equal-length slices.
///
/// Callers are responsible for checking lengths; this panics (debug) or
/// truncates (release) on mismatch like `zip` would, so every public entry
/// point validates dimensions first.
pub(crate) fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for (&x, &y) in a.iter().zip(b.iter()) {
            acc += x * y;
        }
        acc
    } else {
        let mid = a.len() / 2;
        pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
    }
}

/// Pairwise mean; `xs` must be nonempty.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    pairwise_sum(xs) / xs.len() as f64
}
