//! Full couplings `pi(x1, x2, y)` rebuilt from acceptance plans.

use serde::Serialize;

use super::SimplifiedPlan;
use crate::error::{Error, Result};
use crate::simplex::{Token, EMPTY_MASS};

/// Largest vocabulary for which a `V^3` coupling tensor is materialized.
pub const MAX_FULL_VOCAB: usize = 16;

/// Dense coupling between a pair joint and a target, row-major `[x1][x2][y]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullCoupling {
    vocab: usize,
    pi: Vec<f64>,
}

impl FullCoupling {
    /// Wraps a raw tensor; entries must be finite and non-negative.
    pub fn new(vocab: usize, pi: Vec<f64>) -> Result<Self> {
        if vocab > MAX_FULL_VOCAB {
            return Err(Error::ResourceLimit(format!(
                "full couplings are limited to V <= {MAX_FULL_VOCAB}"
            )));
        }
        if pi.len() != vocab * vocab * vocab {
            return Err(Error::invalid("coupling tensor has the wrong size"));
        }
        if pi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("coupling entries must be finite and non-negative"));
        }
        Ok(Self { vocab, pi })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn get(&self, x1: Token, x2: Token, y: Token) -> f64 {
        self.pi[(x1 * self.vocab + x2) * self.vocab + y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    /// `sum_y pi(x1, x2, y)`, row-major `V × V`.
    pub fn pair_marginal(&self) -> Vec<f64> {
        self.pi.chunks(self.vocab).map(|c| c.iter().sum()).collect()
    }

    /// `sum_{x1, x2} pi(x1, x2, y)`.
    pub fn target_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vocab];
        for c in self.pi.chunks(self.vocab) {
            for (o, v) in m.iter_mut().zip(c) {
                *o += v;
            }
        }
        m
    }

    /// Largest deviation of either marginal from `(joint, p)`.
    pub fn marginal_error(&self, joint: &[f64], p: &[f64]) -> f64 {
        let pairs = self
            .pair_marginal()
            .iter()
            .zip(joint)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let target = self
            .target_marginal()
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pairs.max(target)
    }
}

/// Rebuilds a full coupling from a plan.
///
/// Accepted mass goes on `y = x1` and `y = x2`; the rest of each pair's mass is
/// spread over tokens outside the pair in proportion to the unaccepted target
/// mass `r(y) = p(y) - alpha(y)`. The marginals are exact for optimal plans;
/// a sub-optimal plan can leave target mass that no pair is allowed to carry.
pub fn reconstruct_full_coupling(plan: &SimplifiedPlan) -> Result<FullCoupling> {
    let v = plan.vocab();
    if v > MAX_FULL_VOCAB {
        return Err(Error::ResourceLimit(format!(
            "full couplings are limited to V <= {MAX_FULL_VOCAB}, got {v}"
        )));
    }
    let r = plan.residual_weights();
    let r_total: f64 = r.iter().sum();
    let mut pi = vec![0.0; v * v * v];
    for e in plan.entries() {
        let base = (e.x1 * v + e.x2) * v;
        pi[base + e.x1] += e.accept1;
        pi[base + e.x2] += e.accept2;
        if r_total <= EMPTY_MASS {
            continue;
        }
        let leftover = (e.mass - e.accept1 - e.accept2).max(0.0);
        for (y, ry) in r.iter().enumerate() {
            if y != e.x1 && y != e.x2 {
                pi[base + y] += ry / r_total * leftover;
            }
        }
    }
    FullCoupling::new(v, pi)
}

/// Probability that the target token is not one of the two drafts.
pub fn membership_cost(coupling: &FullCoupling) -> f64 {
    let v = coupling.vocab;
    let mut cost = 0.0;
    for x1 in 0..v {
        for x2 in 0..v {
            for y in (0..v).filter(|&y| y != x1 && y != x2) {
                cost += coupling.get(x1, x2, y);
            }
        }
    }
    cost
}
