//! Geometry on the probability simplex.
//!
//! Prediction vectors, ground-truth one-hot vectors, and ensemble centroids
//! all live on the (p-1)-dimensional probability simplex. This module holds
//! the distance, centroid, and correctness-similarity primitives everything
//! else is built on.

use crate::error::{Error, Result};

/// Absolute tolerance for simplex membership (entry range and total mass).
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Tolerance under which an entry counts as exactly 1 for one-hot detection.
pub const ONE_HOT_TOLERANCE: f64 = 1e-9;

/// Largest Euclidean distance between two points of any probability simplex.
pub const MAX_SIMPLEX_DISTANCE: f64 = std::f64::consts::SQRT_2;

/// A probability vector: `p >= 2` entries in `[0, 1]` summing to 1.
///
/// Validation happens once at construction; operations assume a valid vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validates and wraps a probability vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "simplex vector needs at least 2 entries, got {}",
                values.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid_argument(format!(
                    "simplex entry {i} is not finite"
                )));
            }
            if !(-SIMPLEX_TOLERANCE..=1.0 + SIMPLEX_TOLERANCE).contains(&v) {
                return Err(Error::invalid_argument(format!(
                    "simplex entry {i} = {v} outside [0, 1]"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid_argument(format!(
                "simplex entries sum to {sum}, expected 1"
            )));
        }
        Ok(SimplexVector(values))
    }

    /// The one-hot vector of dimension `p` with mass on `class`.
    pub fn one_hot(p: usize, class: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid_argument("one-hot dimension must be >= 2"));
        }
        if class >= p {
            return Err(Error::invalid_argument(format!(
                "one-hot class {class} out of range for dimension {p}"
            )));
        }
        let mut values = vec![0.0; p];
        values[class] = 1.0;
        Ok(SimplexVector(values))
    }

    /// The uniform vector `(1/p, ..., 1/p)`.
    pub fn uniform(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid_argument("dimension must be >= 2"));
        }
        Ok(SimplexVector(vec![1.0 / p as f64; p]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// True when exactly one entry is 1 (within [`ONE_HOT_TOLERANCE`]).
    pub fn is_one_hot(&self) -> bool {
        let ones = self.0.iter().filter(|&&v| (v - 1.0).abs() <= ONE_HOT_TOLERANCE).count();
        ones == 1
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest value in a slice; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A Minkowski distance order `q >= 1`; `q = 2` is the Euclidean case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiOrder(f64);

impl MinkowskiOrder {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 1.0 {
            return Err(Error::invalid_argument(format!(
                "Minkowski order must be finite and >= 1, got {q}"
            )));
        }
        Ok(MinkowskiOrder(q))
    }

    pub fn euclidean() -> Self {
        MinkowskiOrder(2.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_same_dim(a: &SimplexVector, b: &SimplexVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid_argument(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Euclidean distance between two prediction vectors.
pub fn euclidean_distance(a: &SimplexVector, b: &SimplexVector) -> Result<f64> {
    check_same_dim(a, b)?;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

/// Minkowski distance of order `q` between two prediction vectors.
pub fn minkowski_distance(a: &SimplexVector, b: &SimplexVector, q: MinkowskiOrder) -> Result<f64> {
    check_same_dim(a, b)?;
    if q.get() == 2.0 {
        return euclidean_distance(a, b);
    }
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y).abs().powf(q.get()))
        .sum();
    Ok(sum.powf(1.0 / q.get()))
}

/// Sum of the three pairwise Euclidean distances among a prediction, its
/// retrained copy, and the one-hot ground truth.
pub fn triple_distance(s: &SimplexVector, s_copy: &SimplexVector, truth: &SimplexVector) -> Result<f64> {
    triple_distance_with_order(s, s_copy, truth, MinkowskiOrder::euclidean())
}

/// [`triple_distance`] generalized to an arbitrary Minkowski order.
pub fn triple_distance_with_order(
    s: &SimplexVector,
    s_copy: &SimplexVector,
    truth: &SimplexVector,
    q: MinkowskiOrder,
) -> Result<f64> {
    if !truth.is_one_hot() {
        return Err(Error::invalid_argument("ground truth vector must be one-hot"));
    }
    Ok(minkowski_distance(s, s_copy, q)?
        + minkowski_distance(s, truth, q)?
        + minkowski_distance(s_copy, truth, q)?)
}

/// Componentwise mean of a non-empty family of simplex vectors.
pub fn centroid(vectors: &[SimplexVector]) -> Result<SimplexVector> {
    if vectors.is_empty() {
        return Err(Error::invalid_argument("centroid of an empty family"));
    }
    let p = vectors[0].dim();
    let mut acc = vec![0.0; p];
    for v in vectors {
        if v.dim() != p {
            return Err(Error::invalid_argument("centroid inputs differ in dimension"));
        }
        for (a, &x) in acc.iter_mut().zip(v.values()) {
            *a += x;
        }
    }
    let m = vectors.len() as f64;
    for a in &mut acc {
        *a /= m;
    }
    SimplexVector::new(acc)
}

/// Weighted mean `sum(w_j s_j) / sum(w_j)` of simplex vectors.
pub fn weighted_centroid(vectors: &[SimplexVector], weights: &[f64]) -> Result<SimplexVector> {
    if vectors.is_empty() {
        return Err(Error::invalid_argument("weighted centroid of an empty family"));
    }
    if vectors.len() != weights.len() {
        return Err(Error::invalid_argument(format!(
            "got {} vectors but {} weights",
            vectors.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::invalid_argument("weights must be finite and non-negative"));
    }
    if total <= 0.0 {
        return Err(Error::invalid_argument("weights must not all be zero"));
    }
    let p = vectors[0].dim();
    let mut acc = vec![0.0; p];
    for (v, &w) in vectors.iter().zip(weights) {
        if v.dim() != p {
            return Err(Error::invalid_argument("weighted centroid inputs differ in dimension"));
        }
        for (a, &x) in acc.iter_mut().zip(v.values()) {
            *a += w * x;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    SimplexVector::new(acc)
}

/// Correctness similarity `(sqrt(2) - distance(s, truth)) / sqrt(2)`.
///
/// 1 when the prediction equals the truth, 0 at the maximal simplex distance.
pub fn correctness_sim(s: &SimplexVector, truth: &SimplexVector) -> Result<f64> {
    if !truth.is_one_hot() {
        return Err(Error::invalid_argument("ground truth vector must be one-hot"));
    }
    let d = euclidean_distance(s, truth)?;
    Ok((MAX_SIMPLEX_DISTANCE - d) / MAX_SIMPLEX_DISTANCE)
}
