//! Token-level verification for one tree node.
//!
//! Each verifier is written once against [`Chooser`], so the same code runs
//! with a seeded RNG and under the exhaustive enumerator in [`oracle`].

mod analytic;
mod montecarlo;
pub mod oracle;
mod spechub;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::draftjoint::draw_drafts;
use crate::error::{Error, Result};
use crate::sampling::{Chooser, RngChooser};
use crate::simplex::{Distribution, Token, EMPTY_MASS};

pub use analytic::{analytic_rates_rrs, analytic_rates_spechub, spechub_hub_acceptance};
pub use montecarlo::{mc_rates, McRates};
pub use oracle::{exact_output_dist, exact_rates};
pub use spechub::SpecHubVerifier;

/// Draft probabilities below this are treated as unsampleable.
pub const MIN_DRAFT_PROB: f64 = 1e-300;

/// Multi-draft verification schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain speculative sampling with one draft.
    Single,
    /// Recursive rejection sampling, drafts drawn independently.
    Rrs,
    /// Recursive rejection sampling, drafts drawn without replacement.
    Rrsw,
    /// Hub-sparse two-draft sampling and verification.
    SpecHub,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Single => "single",
            Method::Rrs => "rrs",
            Method::Rrsw => "rrsw",
            Method::SpecHub => "spechub",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Method::Single),
            "rrs" => Ok(Method::Rrs),
            "rrsw" => Ok(Method::Rrsw),
            "spechub" => Ok(Method::SpecHub),
            other => Err(Error::Usage(format!("unknown verification method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

/// Result of one verification: an accepted draft, or the residual plus its bonus sample.
#[derive(Debug, Clone, PartialEq)]
pub enum VerifyOutcome {
    Accepted {
        token: Token,
        /// 1-based draft slot.
        position: usize,
    },
    Rejected {
        residual: Distribution,
        bonus: Token,
    },
}

impl VerifyOutcome {
    /// The emitted token.
    pub fn token(&self) -> Token {
        match self {
            VerifyOutcome::Accepted { token, .. } => *token,
            VerifyOutcome::Rejected { bonus, .. } => *bonus,
        }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            VerifyOutcome::Accepted { position, .. } => Some(*position),
            VerifyOutcome::Rejected { .. } => None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, VerifyOutcome::Accepted { .. })
    }
}

/// Verification result before the bonus token is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accepted { token: Token, position: usize },
    Rejected { residual: Distribution },
}

impl Verdict {
    pub(crate) fn finish(self, chooser: &mut impl Chooser) -> VerifyOutcome {
        match self {
            Verdict::Accepted { token, position } => VerifyOutcome::Accepted { token, position },
            Verdict::Rejected { residual } => {
                let bonus = chooser.pick(residual.probs());
                VerifyOutcome::Rejected { residual, bonus }
            }
        }
    }
}

/// Per-slot acceptance probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub per_position: Vec<f64>,
    pub total: f64,
}

impl RateVector {
    pub fn new(per_position: Vec<f64>) -> Self {
        let total = per_position.iter().sum();
        Self { per_position, total }
    }

    /// Acceptance probability of slot `i` (0-based) given that every earlier slot was rejected.
    pub fn conditional(&self, i: usize) -> f64 {
        let before: f64 = self.per_position[..i].iter().sum();
        let left = 1.0 - before;
        if left <= EMPTY_MASS {
            0.0
        } else {
            self.per_position[i] / left
        }
    }

    pub fn conditionals(&self) -> Vec<f64> {
        (0..self.per_position.len()).map(|i| self.conditional(i)).collect()
    }
}

/// Normalizes `raw` if it carries mass, else keeps the previous stage.
pub(crate) fn next_stage(raw: Vec<f64>, previous: &[f64]) -> Vec<f64> {
    let mass: f64 = raw.iter().sum();
    if mass > EMPTY_MASS {
        raw.into_iter().map(|v| v / mass).collect()
    } else {
        previous.to_vec()
    }
}

pub(crate) fn check_vocab(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "vocabulary size mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn check_token(q: &Distribution, x: Token) -> Result<()> {
    if x >= q.len() {
        return Err(Error::invalid(format!("token {x} outside vocabulary of size {}", q.len())));
    }
    Ok(())
}

pub(crate) fn single_verdict(
    p: &Distribution,
    q: &Distribution,
    x: Token,
    chooser: &mut impl Chooser,
) -> Result<Verdict> {
    rrs_verdict(p, q, &[x], false, chooser)
}

pub(crate) fn rrs_verdict(
    p: &Distribution,
    q: &Distribution,
    drafts: &[Token],
    without_replacement: bool,
    chooser: &mut impl Chooser,
) -> Result<Verdict> {
    check_vocab(p, q)?;
    let mut target = p.probs().to_vec();
    let mut draft = q.probs().to_vec();
    for (i, &x) in drafts.iter().enumerate() {
        check_token(q, x)?;
        if draft[x] < MIN_DRAFT_PROB {
            return Err(Error::invalid(format!(
                "draft {} (token {x}) has zero probability under the current draft distribution",
                i + 1
            )));
        }
        if chooser.coin(target[x] / draft[x]) {
            return Ok(Verdict::Accepted {
                token: x,
                position: i + 1,
            });
        }
        // residual uses this stage's draft distribution, before the rejected token is removed
        let raw: Vec<f64> = target
            .iter()
            .zip(&draft)
            .map(|(t, d)| (t - d).max(0.0))
            .collect();
        target = next_stage(raw, &target);
        if without_replacement && i + 1 < drafts.len() {
            draft[x] = 0.0;
            let mass: f64 = draft.iter().sum();
            if mass <= 0.0 {
                return Err(Error::invalid("more drafts than tokens in the draft support"));
            }
            draft.iter_mut().for_each(|d| *d /= mass);
        }
    }
    Ok(Verdict::Rejected {
        residual: Distribution::normalized(target)?,
    })
}

/// Speculative sampling of a single draft `x ~ q`.
pub fn single_draft_verify<R: Rng + ?Sized>(
    p: &Distribution,
    q: &Distribution,
    x: Token,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let mut ch = RngChooser(rng);
    Ok(single_verdict(p, q, x, &mut ch)?.finish(&mut ch))
}

/// Recursive rejection sampling over `drafts`, with or without replacement.
pub fn rrs_verify<R: Rng + ?Sized>(
    p: &Distribution,
    q: &Distribution,
    drafts: &[Token],
    without_replacement: bool,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let mut ch = RngChooser(rng);
    Ok(rrs_verdict(p, q, drafts, without_replacement, &mut ch)?.finish(&mut ch))
}

/// Verifies a pair drawn from [`crate::draftjoint::hub_joint`].
pub fn spechub_verify<R: Rng + ?Sized>(
    p: &Distribution,
    q: &Distribution,
    pair: (Token, Token),
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let verifier = SpecHubVerifier::new(p, q)?;
    let mut ch = RngChooser(rng);
    Ok(verifier.verdict(pair, &mut ch)?.finish(&mut ch))
}

/// Samples a hub pair and verifies it; falls back to single-draft sampling for degenerate `q`.
pub fn spechub_step<R: Rng + ?Sized>(
    p: &Distribution,
    q: &Distribution,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let mut ch = RngChooser(rng);
    Ok(step_verdict(Method::SpecHub, p, q, 2, &mut ch)?.finish(&mut ch))
}

/// Draws the drafts for `method` and verifies them.
pub(crate) fn step_verdict(
    method: Method,
    p: &Distribution,
    q: &Distribution,
    k: usize,
    chooser: &mut impl Chooser,
) -> Result<Verdict> {
    check_vocab(p, q)?;
    match method {
        Method::Single => {
            let x = chooser.pick(q.probs());
            single_verdict(p, q, x, chooser)
        }
        Method::Rrs | Method::Rrsw => {
            let wor = method == Method::Rrsw;
            let drafts = draw_drafts(q, k, wor, chooser)?;
            rrs_verdict(p, q, &drafts, wor, chooser)
        }
        Method::SpecHub => match SpecHubVerifier::new(p, q) {
            Ok(v) => {
                let pair = v.sampler().choose(chooser);
                v.verdict(pair, chooser)
            }
            Err(Error::Degenerate(_)) => {
                let x = chooser.pick(q.probs());
                single_verdict(p, q, x, chooser)
            }
            Err(e) => Err(e),
        },
    }
}

/// One full sampling-and-verification step of `method` with `k` drafts.
pub fn verify_step<R: Rng + ?Sized>(
    method: Method,
    p: &Distribution,
    q: &Distribution,
    k: usize,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let mut ch = RngChooser(rng);
    Ok(step_verdict(method, p, q, k, &mut ch)?.finish(&mut ch))
}
