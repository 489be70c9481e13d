//! Joint draft distributions over ordered pairs `(x1, x2)`.
//!
//! Three designs are provided: independent sampling `q ⊗ q`, sampling without
//! replacement, and the hub-sparse design in which every pair contains the
//! draft's top token. The hub-sparse form stores one column and one row, so
//! building and sampling it is `O(V)`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::{Categorical, Chooser, RngChooser};
use crate::simplex::{top_token, Distribution, Token, EMPTY_MASS, SUM_TOLERANCE};

/// A draft distribution holding at least this much mass on one token is degenerate.
pub const DEGENERATE_MASS: f64 = 1.0 - 1e-12;

/// Joint distribution `Q(x1, x2)` of an ordered draft pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairJoint {
    /// Row-major `V × V` matrix.
    Dense { vocab: usize, probs: Vec<f64> },
    /// All mass in row and column `hub`: `col[x] = Q(x, hub)`, `row[x] = Q(hub, x)`.
    /// Both vectors have length `V` with a zero at `hub`.
    Hub {
        hub: Token,
        col: Vec<f64>,
        row: Vec<f64>,
    },
}

impl PairJoint {
    /// Validates a dense row-major matrix.
    pub fn dense(vocab: usize, probs: Vec<f64>) -> Result<Self> {
        if vocab == 0 || probs.len() != vocab * vocab {
            return Err(Error::invalid(format!(
                "dense joint needs {} entries, got {}",
                vocab * vocab,
                probs.len()
            )));
        }
        if probs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("joint entries must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("joint mass is {total}, expected 1")));
        }
        Ok(PairJoint::Dense { vocab, probs })
    }

    pub fn vocab(&self) -> usize {
        match self {
            PairJoint::Dense { vocab, .. } => *vocab,
            PairJoint::Hub { col, .. } => col.len(),
        }
    }

    pub fn hub(&self) -> Option<Token> {
        match self {
            PairJoint::Hub { hub, .. } => Some(*hub),
            PairJoint::Dense { .. } => None,
        }
    }

    pub fn get(&self, x1: Token, x2: Token) -> f64 {
        match self {
            PairJoint::Dense { vocab, probs } => probs[x1 * vocab + x2],
            PairJoint::Hub { hub, col, row } => {
                if x2 == *hub && x1 != *hub {
                    col[x1]
                } else if x1 == *hub && x2 != *hub {
                    row[x2]
                } else {
                    0.0
                }
            }
        }
    }

    /// Positive-mass entries `(x1, x2, Q(x1, x2))` in a fixed order.
    pub fn support(&self) -> Vec<(Token, Token, f64)> {
        match self {
            PairJoint::Dense { vocab, probs } => probs
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0.0)
                .map(|(i, &m)| (i / vocab, i % vocab, m))
                .collect(),
            PairJoint::Hub { hub, col, row } => {
                let below = col
                    .iter()
                    .enumerate()
                    .filter(|(x, &m)| *x != *hub && m > 0.0)
                    .map(|(x, &m)| (x, *hub, m));
                let right = row
                    .iter()
                    .enumerate()
                    .filter(|(x, &m)| *x != *hub && m > 0.0)
                    .map(|(x, &m)| (*hub, x, m));
                below.chain(right).collect()
            }
        }
    }

    /// `sum_{x2} Q(x1, x2)` for every `x1`.
    pub fn first_marginal(&self) -> Vec<f64> {
        match self {
            PairJoint::Dense { vocab, probs } => {
                probs.chunks(*vocab).map(|r| r.iter().sum()).collect()
            }
            PairJoint::Hub { hub, col, row } => {
                let mut m = col.clone();
                m[*hub] = row.iter().sum();
                m
            }
        }
    }

    /// `sum_{x1} Q(x1, x2)` for every `x2`.
    pub fn second_marginal(&self) -> Vec<f64> {
        match self {
            PairJoint::Dense { vocab, probs } => {
                let mut m = vec![0.0; *vocab];
                for (i, &v) in probs.iter().enumerate() {
                    m[i % vocab] += v;
                }
                m
            }
            PairJoint::Hub { hub, col, row } => {
                let mut m = row.clone();
                m[*hub] = col.iter().sum();
                m
            }
        }
    }

    /// Probability that token `y` appears in a sampled pair.
    pub fn inclusion(&self) -> Vec<f64> {
        let v = self.vocab();
        let mut inc = vec![0.0; v];
        for (x1, x2, m) in self.support() {
            inc[x1] += m;
            if x2 != x1 {
                inc[x2] += m;
            }
        }
        inc
    }

    pub fn total(&self) -> f64 {
        match self {
            PairJoint::Dense { probs, .. } => probs.iter().sum(),
            PairJoint::Hub { col, row, .. } => col.iter().sum::<f64>() + row.iter().sum::<f64>(),
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            PairJoint::Dense { probs, .. } => probs.clone(),
            PairJoint::Hub { .. } => {
                let v = self.vocab();
                let mut out = vec![0.0; v * v];
                for (x1, x2, m) in self.support() {
                    out[x1 * v + x2] = m;
                }
                out
            }
        }
    }

    /// Precomputes an inverse-CDF sampler.
    pub fn sampler(&self) -> PairSampler {
        let (weights, layout) = match self {
            PairJoint::Dense { vocab, probs } => (probs.clone(), Layout::Dense(*vocab)),
            PairJoint::Hub { hub, col, row } => {
                let mut w = col.clone();
                w.extend_from_slice(row);
                (w, Layout::Hub(*hub, col.len()))
            }
        };
        PairSampler {
            table: Categorical::new(&weights).expect("joint has positive mass"),
            weights,
            layout,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Layout {
    Dense(usize),
    Hub(Token, usize),
}

/// Cached sampler for a [`PairJoint`].
#[derive(Debug, Clone)]
pub struct PairSampler {
    table: Categorical,
    weights: Vec<f64>,
    layout: Layout,
}

impl PairSampler {
    fn decode(&self, i: usize) -> (Token, Token) {
        match self.layout {
            Layout::Dense(v) => (i / v, i % v),
            Layout::Hub(hub, v) if i < v => (i, hub),
            Layout::Hub(hub, v) => (hub, i - v),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Token, Token) {
        self.decode(self.table.sample(rng))
    }

    pub(crate) fn choose(&self, chooser: &mut impl Chooser) -> (Token, Token) {
        self.decode(chooser.pick(&self.weights))
    }
}

/// `Q(x1, x2) = q(x1) q(x2)`.
pub fn independent_joint(q: &Distribution) -> PairJoint {
    let v = q.len();
    let mut probs = Vec::with_capacity(v * v);
    for &a in q.probs() {
        probs.extend(q.probs().iter().map(|&b| a * b));
    }
    PairJoint::Dense { vocab: v, probs }
}

fn check_not_degenerate(q: &Distribution) -> Result<Token> {
    let a = top_token(q);
    if q[a] >= DEGENERATE_MASS {
        return Err(Error::Degenerate(format!(
            "token {a} holds {} of the draft mass",
            q[a]
        )));
    }
    Ok(a)
}

/// Mass outside `token`, summed directly so it stays accurate when `q(token)` is near one.
fn mass_without(q: &Distribution, token: Token) -> f64 {
    q.probs()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != token)
        .map(|(_, v)| v)
        .sum()
}

/// Sequential sampling without replacement: `Q(x1, x2) = q(x1) q(x2) / (1 - q(x1))`, zero diagonal.
pub fn wor_joint(q: &Distribution) -> Result<PairJoint> {
    check_not_degenerate(q)?;
    if q.support_size() < 2 {
        return Err(Error::Degenerate("need at least two tokens with positive mass".into()));
    }
    let v = q.len();
    let mut probs = vec![0.0; v * v];
    for x1 in 0..v {
        if q[x1] <= 0.0 {
            continue;
        }
        let rest = mass_without(q, x1);
        for x2 in 0..v {
            if x2 != x1 {
                probs[x1 * v + x2] = q[x1] * q[x2] / rest;
            }
        }
    }
    Ok(PairJoint::Dense { vocab: v, probs })
}

/// Hub-sparse joint: `Q(x, a) = q(x)` and `Q(a, x) = q(a) q(x) / (1 - q(a))` for `x != a`.
pub fn hub_joint(q: &Distribution) -> Result<PairJoint> {
    let hub = check_not_degenerate(q)?;
    let rest = mass_without(q, hub);
    let scale = q[hub] / rest;
    let mut col = q.probs().to_vec();
    col[hub] = 0.0;
    let row: Vec<f64> = col.iter().map(|&c| c * scale).collect();
    Ok(PairJoint::Hub { hub, col, row })
}

/// Draws one ordered pair from `joint`.
pub fn sample_pair<R: Rng + ?Sized>(joint: &PairJoint, rng: &mut R) -> (Token, Token) {
    joint.sampler().sample(rng)
}

/// Draws `k` draft tokens from `q`, independently or sequentially without replacement.
pub fn sample_drafts_rrs<R: Rng + ?Sized>(
    q: &Distribution,
    k: usize,
    without_replacement: bool,
    rng: &mut R,
) -> Result<Vec<Token>> {
    draw_drafts(q, k, without_replacement, &mut RngChooser(rng))
}

pub(crate) fn draw_drafts(
    q: &Distribution,
    k: usize,
    without_replacement: bool,
    chooser: &mut impl Chooser,
) -> Result<Vec<Token>> {
    if without_replacement && q.support_size() < k {
        return Err(Error::Degenerate(format!(
            "cannot draw {k} distinct tokens from a support of {}",
            q.support_size()
        )));
    }
    let mut weights = q.probs().to_vec();
    let mut drafts = Vec::with_capacity(k);
    for _ in 0..k {
        let x = chooser.pick(&weights);
        if without_replacement {
            weights[x] = 0.0;
            if weights.iter().sum::<f64>() <= EMPTY_MASS && drafts.len() + 1 < k {
                return Err(Error::Degenerate("draft support exhausted".into()));
            }
        }
        drafts.push(x);
    }
    Ok(drafts)
}
