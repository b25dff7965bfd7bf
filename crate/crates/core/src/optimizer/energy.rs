use crate::scalar::{squared_distance, Scalar};

/// Robust texture energy `sum_p |x_p - z_p|^r` over full-dimension vectors.
/// `x` holds one row per anchor; `z` is the candidate matrix and
/// `assignments[p]` the row assigned to anchor `p`.
pub fn texture_energy<T: Scalar>(x: &[T], z: &[T], dim: usize, assignments: &[usize], r: f64) -> f64 {
    x.chunks_exact(dim)
        .zip(assignments)
        .map(|(xp, &a)| squared_distance(xp, &z[a * dim..(a + 1) * dim]).as_f64().sqrt().powf(r))
        .sum()
}

/// `sum_p d_p^r` for precomputed distances.
pub fn robust_energy<T: Scalar>(distances: &[T], r: f64) -> f64 {
    distances.iter().map(|d| d.as_f64().powf(r)).sum()
}

/// Quadratic energy `sum_p W_p |x_p - z_p|^2` with fixed weights.
pub fn weighted_energy<T: Scalar>(x: &[T], z: &[T], dim: usize, assignments: &[usize], weights: &[f64]) -> f64 {
    x.chunks_exact(dim)
        .zip(assignments)
        .zip(weights)
        .map(|((xp, &a), w)| w * squared_distance(xp, &z[a * dim..(a + 1) * dim]).as_f64())
        .sum()
}

/// Reweighting factor `(d^2 + epsilon)^((r - 2) / 2)`.
pub fn irls_weight(distance: f64, r: f64, epsilon: f64) -> f64 {
    (distance * distance + epsilon).powf((r - 2.0) / 2.0)
}
