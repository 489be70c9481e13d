//! Probability-simplex primitives.
//!
//! A [`Distribution`] is a point on the simplex over a vocabulary of `V`
//! tokens. Everything downstream (draft joints, verifiers, couplings) works
//! on these dense `f64` vectors.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Residual mass at or below this value is treated as empty.
pub const EMPTY_MASS: f64 = 1e-12;

/// Token index into the vocabulary.
pub type Token = usize;

/// Non-negative probabilities over `V` tokens summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs` without rescaling.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty vocabulary"));
        }
        if let Some((i, v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!("entry {i} is {v}, expected a finite non-negative value")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self { probs })
    }

    /// Divides non-negative `weights` by their actual sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty vocabulary"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid("weights have zero total mass"));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn one_hot(vocab: usize, token: Token) -> Result<Self> {
        if token >= vocab {
            return Err(Error::invalid(format!("token {token} outside vocabulary of size {vocab}")));
        }
        let mut probs = vec![0.0; vocab];
        probs[token] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(vocab: usize) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::invalid("empty vocabulary"));
        }
        Ok(Self {
            probs: vec![1.0 / vocab as f64; vocab],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Number of tokens carrying strictly positive mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&v| v > 0.0).count()
    }

    /// Largest absolute per-entry difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<Token> for Distribution {
    type Output = f64;

    fn index(&self, token: Token) -> &f64 {
        &self.probs[token]
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Vec<f64> {
        d.probs
    }
}

/// Unnormalized log-scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Vec<f64>);

impl Logits {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty logits"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("logits must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `softmax(logits / temperature)`, shifted by the maximum before exponentiating.
pub fn softmax_with_temperature(logits: &Logits, temperature: f64) -> Result<Distribution> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    let max = logits.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .0
        .iter()
        .map(|&v| ((v - max) / temperature).exp())
        .collect();
    Distribution::normalized(exps)
}

fn check_same_vocab(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "vocabulary size mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Overlap mass `sum_x min(p(x), q(x))`, the single-draft acceptance rate.
pub fn overlap(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same_vocab(p, q)?;
    Ok(overlap_unchecked(p.probs(), q.probs()))
}

pub(crate) fn overlap_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a.min(*b)).sum()
}

/// Normalized residual `norm(max(p - q, 0))` together with `overlap(p, q)`.
///
/// Returns [`Error::EmptyResidual`] when the leftover mass is at most
/// [`EMPTY_MASS`]; callers must not sample from it in that case.
pub fn residual(p: &Distribution, q: &Distribution) -> Result<(Distribution, f64)> {
    check_same_vocab(p, q)?;
    let alpha = overlap_unchecked(p.probs(), q.probs());
    let raw = residual_weights(p.probs(), q.probs());
    let mass: f64 = raw.iter().sum();
    if mass <= EMPTY_MASS {
        return Err(Error::EmptyResidual);
    }
    Ok((
        Distribution {
            probs: raw.into_iter().map(|w| w / mass).collect(),
        },
        alpha,
    ))
}

/// Unnormalized `max(p - q, 0)`.
pub(crate) fn residual_weights(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| (a - b).max(0.0)).collect()
}

/// Most probable token; ties go to the lowest index.
pub fn top_token(q: &Distribution) -> Token {
    argmax(q.probs())
}

pub(crate) fn argmax(values: &[f64]) -> Token {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_constant_logits_is_uniform() {
        let out = softmax_with_temperature(&Logits::new(vec![3.5; 3]).unwrap(), 1.0).unwrap();
        for &v in out.probs() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        let out = softmax_with_temperature(&Logits::new(vec![2f64.ln(), 0.0]).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn softmax_low_temperature() {
        let out = softmax_with_temperature(&Logits::new(vec![1.0, 0.0]).unwrap(), 0.25).unwrap();
        let e4 = 4f64.exp();
        assert_abs_diff_eq!(out[0], e4 / (e4 + 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(out[0], 0.98201, epsilon = 1e-5);
        assert_abs_diff_eq!(out[1], 0.01799, epsilon = 1e-5);
    }

    #[test]
    fn softmax_rejects_bad_arguments() {
        let l = Logits::new(vec![0.0, 1.0]).unwrap();
        assert!(softmax_with_temperature(&l, 0.0).is_err());
        assert!(softmax_with_temperature(&l, -1.0).is_err());
        assert!(Logits::new(vec![f64::NAN]).is_err());
        assert!(Logits::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn overlap_examples() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        assert_abs_diff_eq!(overlap(&p, &q).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(overlap(&p, &p).unwrap(), 1.0);
        assert_eq!(overlap(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 0.0);
        assert!(overlap(&p, &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn residual_examples() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        let (r, alpha) = residual(&p, &q).unwrap();
        assert_abs_diff_eq!(alpha, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0], 0.0);
        assert_abs_diff_eq!(r[1], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 0.25, epsilon = 1e-12);

        assert!(matches!(residual(&p, &p), Err(Error::EmptyResidual)));

        let (r, alpha) = residual(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(r.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn top_token_examples() {
        assert_eq!(top_token(&d(&[0.5, 0.3, 0.2])), 0);
        assert_eq!(top_token(&d(&[0.5, 0.5])), 0);
        assert_eq!(top_token(&d(&[0.2, 0.3, 0.5])), 2);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::normalized(vec![0.0, 0.0]).is_err());
        let n = Distribution::normalized(vec![2.0, 6.0]).unwrap();
        assert_eq!(n.probs(), &[0.25, 0.75]);
        assert_eq!(Distribution::one_hot(3, 1).unwrap().probs(), &[0.0, 1.0, 0.0]);
        assert!(Distribution::one_hot(3, 3).is_err());
    }

    #[test]
    fn serde_goes_through_validation() {
        let ok: Distribution = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(ok[1], 0.75);
        assert!(serde_json::from_str::<Distribution>("[0.25, 0.5]").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn simplex(len: usize) -> impl Strategy<Value = Distribution> {
            proptest::collection::vec(0.0f64..1.0, len)
                .prop_filter("non-zero mass", |w| w.iter().sum::<f64>() > 1e-6)
                .prop_map(|w| Distribution::normalized(w).unwrap())
        }

        fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
            (1usize..20).prop_flat_map(|n| (simplex(n), simplex(n)))
        }

        proptest! {
            #[test]
            fn residual_mass_identity((p, q) in pair()) {
                let alpha = overlap(&p, &q).unwrap();
                let mass: f64 = residual_weights(p.probs(), q.probs()).iter().sum();
                prop_assert!((mass - (1.0 - alpha)).abs() <= 1e-12);
            }

            #[test]
            fn overlap_is_symmetric((p, q) in pair()) {
                prop_assert_eq!(overlap(&p, &q).unwrap(), overlap(&q, &p).unwrap());
            }

            #[test]
            fn softmax_output_is_on_simplex(
                logits in proptest::collection::vec(-50.0f64..50.0, 1..40),
                log_t in -3.0f64..3.0,
            ) {
                let t = 10f64.powf(log_t);
                let out = softmax_with_temperature(&Logits::new(logits).unwrap(), t).unwrap();
                prop_assert!(Distribution::new(out.into_vec()).is_ok());
            }

            #[test]
            fn softmax_concentrates_at_low_temperature(
                rest in proptest::collection::vec(-20.0f64..0.0, 1..20),
                gap in 1.0f64..5.0,
                pos in 0usize..20,
            ) {
                let mut logits: Vec<f64> = rest.iter().map(|v| v - gap).collect();
                let pos = pos % (logits.len() + 1);
                logits.insert(pos, 0.0);
                let out = softmax_with_temperature(&Logits::new(logits).unwrap(), 1e-3).unwrap();
                prop_assert!(out[pos] >= 1.0 - 1e-9);
            }
        }
    }
}
