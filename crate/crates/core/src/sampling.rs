//! Uniform-to-categorical conversion and the [`Chooser`] abstraction.
//!
//! Every stochastic procedure in the crate draws through a `Chooser`. The
//! RNG-backed implementation samples; the enumeration oracle in
//! [`crate::verify`] implements the same trait to walk every branch with its
//! exact probability.

use rand::Rng;

/// Source of the two primitive random decisions used by the verifiers.
pub trait Chooser {
    /// Returns `true` with probability `prob` (values outside `[0, 1]` clamp).
    fn coin(&mut self, prob: f64) -> bool;

    /// Returns an index with probability proportional to `weights`.
    ///
    /// `weights` must be non-negative with positive total.
    fn pick(&mut self, weights: &[f64]) -> usize;
}

/// Adapts any [`Rng`] into a [`Chooser`].
pub struct RngChooser<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Chooser for RngChooser<'_, R> {
    fn coin(&mut self, prob: f64) -> bool {
        self.0.random::<f64>() < prob
    }

    fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        inverse_cdf(weights, self.0.random::<f64>() * total)
    }
}

/// First index whose running sum exceeds `target`, skipping zero weights.
///
/// Rounding can leave `target` at or past the final prefix sum; the last
/// positive-weight index is returned then.
pub fn inverse_cdf(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = Some(i);
        if target < acc {
            return i;
        }
    }
    last_positive.expect("inverse_cdf called with no positive weight")
}

/// Inverse-CDF sampler over a precomputed prefix-sum array.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    /// Returns `None` if no weight is positive.
    pub fn new(weights: &[f64]) -> Option<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        (acc > 0.0).then_some(Self { cumulative })
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Maps a uniform draw in `[0, 1)` to an index.
    pub fn index_for(&self, u: f64) -> usize {
        let target = u * self.total();
        let i = self.cumulative.partition_point(|&c| c <= target);
        if i < self.cumulative.len() {
            i
        } else {
            // u*total rounded up to the total; fall back to the last index with mass
            let mut j = self.cumulative.len() - 1;
            while j > 0 && self.cumulative[j] == self.cumulative[j - 1] {
                j -= 1;
            }
            j
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(rng.random::<f64>())
    }
}
