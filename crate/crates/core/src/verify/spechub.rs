use crate::draftjoint::{hub_joint, PairJoint, PairSampler};
use crate::error::{Error, Result};
use crate::sampling::Chooser;
use crate::simplex::{Distribution, Token, EMPTY_MASS};

use super::{check_vocab, Verdict, MIN_DRAFT_PROB};

/// Precomputed SpecHub transport stages for one `(p, q)`.
///
/// Non-hub tokens are accepted first: from pairs `(x, a)` up to `min(p, q)`,
/// then from pairs `(a, x)` out of the leftover target mass. The hub `a`
/// absorbs what remains of both the row and the column, row first.
#[derive(Debug, Clone)]
pub struct SpecHubVerifier {
    p: Distribution,
    joint: PairJoint,
    hub: Token,
    /// `Q(a, x)`.
    row: Vec<f64>,
    /// `p'(x) = max(p(x) - q(x), 0)` off the hub.
    after_col: Vec<f64>,
    /// Leftover column mass `sum_x max(q(x) - p(x), 0)`, x != a.
    col_left: f64,
    /// Leftover row mass `sum_x max(Q(a, x) - p'(x), 0)`, x != a.
    row_left: f64,
    /// Final residual weights `p''`.
    residual: Vec<f64>,
}

impl SpecHubVerifier {
    /// Fails with [`Error::Degenerate`] when `q` is concentrated on its top token.
    pub fn new(p: &Distribution, q: &Distribution) -> Result<Self> {
        check_vocab(p, q)?;
        let joint = hub_joint(q)?;
        let PairJoint::Hub { hub, ref row, .. } = joint else {
            unreachable!("hub_joint returns the hub-sparse form")
        };
        let row = row.clone();
        let v = p.len();
        let mut after_col = vec![0.0; v];
        let mut residual = vec![0.0; v];
        let mut col_left = 0.0;
        let mut row_left = 0.0;
        for x in (0..v).filter(|&x| x != hub) {
            after_col[x] = (p[x] - q[x]).max(0.0);
            col_left += (q[x] - p[x]).max(0.0);
            row_left += (row[x] - after_col[x]).max(0.0);
            residual[x] = (after_col[x] - row[x]).max(0.0);
        }
        let hub_after_row = (p[hub] - row_left).max(0.0);
        residual[hub] = (hub_after_row - col_left).max(0.0);
        Ok(Self {
            p: p.clone(),
            joint,
            hub,
            row,
            after_col,
            col_left,
            row_left,
            residual,
        })
    }

    pub fn hub(&self) -> Token {
        self.hub
    }

    pub fn joint(&self) -> &PairJoint {
        &self.joint
    }

    pub fn sampler(&self) -> PairSampler {
        self.joint.sampler()
    }

    /// Target mass of the hub still unclaimed after the row stage.
    fn hub_after_row(&self) -> f64 {
        (self.p[self.hub] - self.row_left).max(0.0)
    }

    /// Probability of accepting the non-hub token of `pair`, and of then accepting the hub.
    pub fn acceptance(&self, pair: (Token, Token)) -> Result<(f64, f64)> {
        let (x1, x2) = pair;
        let a = self.hub;
        let v = self.p.len();
        if x1 >= v || x2 >= v {
            return Err(Error::invalid("pair token outside vocabulary"));
        }
        let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).min(1.0) } else { 0.0 };
        if x2 == a && x1 != a {
            let mass = self.joint.get(x1, a);
            if mass < MIN_DRAFT_PROB {
                return Err(Error::invalid(format!("pair ({x1}, {a}) has zero draft probability")));
            }
            Ok((ratio(self.p[x1], mass), ratio(self.hub_after_row(), self.col_left)))
        } else if x1 == a && x2 != a {
            let mass = self.row[x2];
            if mass < MIN_DRAFT_PROB {
                return Err(Error::invalid(format!("pair ({a}, {x2}) has zero draft probability")));
            }
            Ok((ratio(self.after_col[x2], mass), ratio(self.p[a], self.row_left)))
        } else {
            Err(Error::invalid(format!(
                "pair ({x1}, {x2}) does not contain the hub token {a} exactly once"
            )))
        }
    }

    pub(crate) fn verdict(&self, pair: (Token, Token), chooser: &mut impl Chooser) -> Result<Verdict> {
        let (accept_other, accept_hub) = self.acceptance(pair)?;
        let (x1, x2) = pair;
        let (other, other_pos, hub_pos) = if x2 == self.hub { (x1, 1, 2) } else { (x2, 2, 1) };
        if chooser.coin(accept_other) {
            return Ok(Verdict::Accepted {
                token: other,
                position: other_pos,
            });
        }
        if chooser.coin(accept_hub) {
            return Ok(Verdict::Accepted {
                token: self.hub,
                position: hub_pos,
            });
        }
        Ok(Verdict::Rejected {
            residual: self.residual_distribution(),
        })
    }

    /// `norm(p'')`, or `p` itself if nothing is left over.
    pub fn residual_distribution(&self) -> Distribution {
        let mass: f64 = self.residual.iter().sum();
        if mass > EMPTY_MASS {
            Distribution::normalized(self.residual.clone()).expect("positive residual mass")
        } else {
            self.p.clone()
        }
    }

    /// Closed-form acceptance mass `[slot 1, slot 2]`, split into non-hub and hub parts.
    pub(crate) fn slot_masses(&self) -> SlotMasses {
        let a = self.hub;
        let mut first = 0.0;
        let mut second = 0.0;
        for x in (0..self.p.len()).filter(|&x| x != a) {
            let col = self.joint.get(x, a);
            let direct = self.p[x].min(col);
            first += direct;
            second += self.after_col[x].min(self.row[x]);
        }
        let hub_first = self.p[a].min(self.row_left);
        let hub_second = self.hub_after_row().min(self.col_left);
        SlotMasses {
            first,
            second,
            hub_first,
            hub_second,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotMasses {
    pub first: f64,
    pub second: f64,
    pub hub_first: f64,
    pub hub_second: f64,
}
