//! Executable verifier for an arbitrary two-draft acceptance plan.

use std::collections::HashMap;

use rand::Rng;

use super::SimplifiedPlan;
use crate::error::{Error, Result};
use crate::sampling::{Chooser, RngChooser};
use crate::simplex::{Distribution, Token, EMPTY_MASS};
use crate::verify::{Verdict, VerifyOutcome, MIN_DRAFT_PROB};

/// Verifies pairs against a fixed plan.
///
/// Given pair `(x1, x2)`, slot 1 is accepted with probability
/// `accept1 / Q(x1, x2)` and slot 2 with `accept2 / Q(x1, x2)`. Otherwise the
/// output is drawn from the normalized unaccepted target mass `r`. This
/// reproduces `p` for any valid plan. For an optimal plan `r` is zero on
/// both tokens of every pair that can be rejected, so the draw coincides
/// with the conditional of the reconstructed coupling.
#[derive(Debug, Clone)]
pub struct OtmVerifier {
    plan: SimplifiedPlan,
    index: HashMap<(Token, Token), usize>,
    residual: Vec<f64>,
}

impl OtmVerifier {
    pub fn new(plan: SimplifiedPlan) -> Self {
        let index = plan
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.x1, e.x2), i))
            .collect();
        let residual = plan.residual_weights();
        Self {
            plan,
            index,
            residual,
        }
    }

    pub fn plan(&self) -> &SimplifiedPlan {
        &self.plan
    }

    /// `(P[accept slot 1], P[accept slot 2])` given `pair`.
    pub fn acceptance(&self, pair: (Token, Token)) -> Result<(f64, f64)> {
        let e = self
            .index
            .get(&pair)
            .map(|&i| &self.plan.entries()[i])
            .filter(|e| e.mass >= MIN_DRAFT_PROB)
            .ok_or_else(|| {
                Error::invalid(format!("pair ({}, {}) has zero draft probability", pair.0, pair.1))
            })?;
        Ok(((e.accept1 / e.mass).clamp(0.0, 1.0), (e.accept2 / e.mass).clamp(0.0, 1.0)))
    }

    /// Distribution sampled after a rejection: `norm(r)`, or `p` if nothing is left.
    pub fn residual(&self) -> Distribution {
        let w = if self.residual.iter().sum::<f64>() > EMPTY_MASS {
            self.residual.clone()
        } else {
            self.plan.target().to_vec()
        };
        Distribution::normalized(w).expect("target distribution has positive mass")
    }

    pub fn verdict(&self, pair: (Token, Token), chooser: &mut impl Chooser) -> Result<Verdict> {
        let (a1, a2) = self.acceptance(pair)?;
        let rest = (1.0 - a1 - a2).max(0.0);
        match chooser.pick(&[a1, a2, rest]) {
            0 => Ok(Verdict::Accepted {
                token: pair.0,
                position: 1,
            }),
            1 => Ok(Verdict::Accepted {
                token: pair.1,
                position: 2,
            }),
            _ => Ok(Verdict::Rejected {
                residual: self.residual(),
            }),
        }
    }

    pub fn verify<R: Rng + ?Sized>(&self, pair: (Token, Token), rng: &mut R) -> Result<VerifyOutcome> {
        let mut ch = RngChooser(rng);
        Ok(self.verdict(pair, &mut ch)?.finish(&mut ch))
    }
}

/// One-shot form of [`OtmVerifier::verify`].
pub fn otm_accept_rule<R: Rng + ?Sized>(
    plan: &SimplifiedPlan,
    pair: (Token, Token),
    rng: &mut R,
) -> Result<VerifyOutcome> {
    OtmVerifier::new(plan.clone()).verify(pair, rng)
}
