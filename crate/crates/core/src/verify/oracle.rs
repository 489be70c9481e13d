//! Exhaustive enumeration of a verifier's random decisions.
//!
//! [`Enumerator`] implements [`Chooser`] by replaying a script of earlier
//! decisions and extending it depth-first, so running a procedure
//! repeatedly visits every branch exactly once together with its
//! probability. No sampling is involved; the results are exact up to
//! floating-point rounding.

use crate::error::{Error, Result};
use crate::sampling::Chooser;
use crate::simplex::{Distribution, Token};

use super::{check_vocab, step_verdict, Method, RateVector, Verdict};

/// Largest vocabulary accepted by the exact oracles.
pub const MAX_ORACLE_VOCAB: usize = 16;
/// Largest number of recursive-rejection drafts accepted by the exact oracles.
pub const MAX_ORACLE_DRAFTS: usize = 3;
const MAX_PATHS: usize = 5_000_000;

#[derive(Debug)]
struct Decision {
    /// `(returned value, probability)` of every branch with positive probability.
    options: Vec<(usize, f64)>,
    taken: usize,
}

/// Depth-first branch enumerator.
#[derive(Debug, Default)]
pub struct Enumerator {
    script: Vec<Decision>,
    cursor: usize,
    prob: f64,
    /// Values picked at each decision of the current path, in order.
    trail: Vec<usize>,
}

impl Enumerator {
    fn decide(&mut self, options: Vec<(usize, f64)>) -> usize {
        if self.cursor == self.script.len() {
            self.script.push(Decision { options, taken: 0 });
        }
        let d = &self.script[self.cursor];
        let (value, prob) = d.options[d.taken];
        self.cursor += 1;
        self.prob *= prob;
        self.trail.push(value);
        value
    }

    /// Moves to the next unexplored path; `false` once every path has been visited.
    fn advance(&mut self) -> bool {
        self.script.truncate(self.cursor);
        while let Some(last) = self.script.last_mut() {
            if last.taken + 1 < last.options.len() {
                last.taken += 1;
                return true;
            }
            self.script.pop();
        }
        false
    }

    /// Runs `procedure` once per path and hands each result to `visit` with its probability.
    pub fn for_each_path<T>(
        mut procedure: impl FnMut(&mut Enumerator) -> T,
        mut visit: impl FnMut(f64, &[usize], T) -> Result<()>,
    ) -> Result<usize> {
        let mut e = Enumerator::default();
        let mut paths = 0;
        loop {
            e.cursor = 0;
            e.prob = 1.0;
            e.trail.clear();
            let out = procedure(&mut e);
            paths += 1;
            if paths > MAX_PATHS {
                return Err(Error::ResourceLimit(format!("more than {MAX_PATHS} branches")));
            }
            let trail = std::mem::take(&mut e.trail);
            visit(e.prob, &trail, out)?;
            e.trail = trail;
            if !e.advance() {
                return Ok(paths);
            }
        }
    }
}

impl Chooser for Enumerator {
    fn coin(&mut self, prob: f64) -> bool {
        let prob = prob.clamp(0.0, 1.0);
        let options: Vec<(usize, f64)> = [(1, prob), (0, 1.0 - prob)]
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .collect();
        self.decide(options) == 1
    }

    fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let options = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i, w / total))
            .collect();
        self.decide(options)
    }
}

fn check_oracle_size(method: Method, p: &Distribution, q: &Distribution, k: usize) -> Result<()> {
    check_vocab(p, q)?;
    if p.len() > MAX_ORACLE_VOCAB {
        return Err(Error::ResourceLimit(format!(
            "exact enumeration supports V <= {MAX_ORACLE_VOCAB}, got {}",
            p.len()
        )));
    }
    match method {
        Method::Single if k != 1 => Err(Error::invalid("single-draft verification uses k = 1")),
        Method::SpecHub if k != 2 => Err(Error::invalid("SpecHub uses k = 2")),
        Method::Rrs | Method::Rrsw if k == 0 || k > MAX_ORACLE_DRAFTS => Err(Error::ResourceLimit(
            format!("exact enumeration supports 1 <= k <= {MAX_ORACLE_DRAFTS}, got {k}"),
        )),
        _ => Ok(()),
    }
}

/// Visits every `(probability, verdict)` of one draft-and-verify step of `method`.
pub(crate) fn for_each_outcome(
    method: Method,
    p: &Distribution,
    q: &Distribution,
    k: usize,
    mut visit: impl FnMut(f64, &Verdict) -> Result<()>,
) -> Result<()> {
    check_oracle_size(method, p, q, k)?;
    Enumerator::for_each_path(
        |e| step_verdict(method, p, q, k, e),
        |prob, _, verdict| visit(prob, &verdict?),
    )?;
    Ok(())
}

/// Exact output distribution of one step of `method`, including the bonus token on rejection.
pub fn exact_output_dist(
    method: Method,
    p: &Distribution,
    q: &Distribution,
    k: usize,
) -> Result<Distribution> {
    let mut out = vec![0.0; p.len()];
    for_each_outcome(method, p, q, k, |prob, verdict| {
        match verdict {
            Verdict::Accepted { token, .. } => out[*token] += prob,
            Verdict::Rejected { residual } => {
                for (o, r) in out.iter_mut().zip(residual.probs()) {
                    *o += prob * r;
                }
            }
        }
        Ok(())
    })?;
    Distribution::new(out).map_err(|e| Error::Internal(format!("oracle output is not a distribution: {e}")))
}

/// Exact per-slot acceptance probabilities of `method`.
pub fn exact_rates(method: Method, p: &Distribution, q: &Distribution, k: usize) -> Result<RateVector> {
    let slots = if method == Method::Single { 1 } else { k };
    let mut rates = vec![0.0; slots];
    for_each_outcome(method, p, q, k, |prob, verdict| {
        if let Verdict::Accepted { position, .. } = verdict {
            rates[position - 1] += prob;
        }
        Ok(())
    })?;
    Ok(RateVector::new(rates))
}

/// Exact coupling `pi(x1, x2, y)` induced by a two-draft method, row-major `V × V × V`.
///
/// The pair is read back from the recorded draft picks, so this only
/// supports methods whose first decisions are the draft draws.
pub fn exact_pair_coupling(method: Method, p: &Distribution, q: &Distribution) -> Result<Vec<f64>> {
    check_oracle_size(method, p, q, 2)?;
    if !matches!(method, Method::Rrs | Method::Rrsw | Method::SpecHub) {
        return Err(Error::invalid("pair couplings need a two-draft method"));
    }
    let v = p.len();
    let hub_joint = if method == Method::SpecHub {
        Some(crate::draftjoint::hub_joint(q)?)
    } else {
        None
    };
    let pair_of = |trail: &[usize]| -> (Token, Token) {
        match &hub_joint {
            // the hub sampler enumerates col entries then row entries
            Some(j) => {
                let hub = j.hub().expect("hub joint");
                let i = trail[0];
                if i < v {
                    (i, hub)
                } else {
                    (hub, i - v)
                }
            }
            None => (trail[0], trail[1]),
        }
    };
    let mut pi = vec![0.0; v * v * v];
    Enumerator::for_each_path(
        |e| step_verdict(method, p, q, 2, e),
        |prob, trail, verdict| {
            let (x1, x2) = pair_of(trail);
            let base = (x1 * v + x2) * v;
            match verdict? {
                Verdict::Accepted { token, .. } => pi[base + token] += prob,
                Verdict::Rejected { residual } => {
                    for (y, r) in residual.probs().iter().enumerate() {
                        pi[base + y] += prob * r;
                    }
                }
            }
            Ok(())
        },
    )?;
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn enumerator_visits_every_branch_once() {
        let mut seen = Vec::new();
        let n = Enumerator::for_each_path(
            |e| {
                let a = e.pick(&[0.5, 0.0, 0.5]);
                let b = e.coin(0.25);
                (a, b)
            },
            |prob, _, out| {
                seen.push((out, prob));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(n, 4);
        let total: f64 = seen.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        assert!(seen.contains(&((2, true), 0.125)));
    }

    #[test]
    fn identical_distributions_reproduce_p() {
        let p = d(&[0.2, 0.5, 0.3]);
        for (m, k) in [(Method::Single, 1), (Method::Rrs, 3), (Method::Rrsw, 2), (Method::SpecHub, 2)] {
            let out = exact_output_dist(m, &p, &p, k).unwrap();
            assert!(out.max_abs_diff(&p) <= 1e-12, "{m}");
        }
    }

    #[test]
    fn spechub_worked_instance_output_is_p() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        let out = exact_output_dist(Method::SpecHub, &p, &q, 2).unwrap();
        assert!(out.max_abs_diff(&p) <= 1e-12);
        let rates = exact_rates(Method::SpecHub, &p, &q, 2).unwrap();
        assert_abs_diff_eq!(rates.total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rrsw_three_drafts_eight_tokens() {
        let p = d(&[0.05, 0.2, 0.1, 0.15, 0.05, 0.25, 0.12, 0.08]);
        let q = d(&[0.3, 0.05, 0.2, 0.05, 0.1, 0.1, 0.1, 0.1]);
        let out = exact_output_dist(Method::Rrsw, &p, &q, 3).unwrap();
        assert!(out.max_abs_diff(&p) <= 1e-9);
    }

    #[test]
    fn size_limits() {
        let p = Distribution::uniform(17).unwrap();
        assert!(matches!(exact_output_dist(Method::Rrs, &p, &p, 2), Err(Error::ResourceLimit(_))));
        let p = d(&[0.5, 0.5]);
        assert!(matches!(exact_output_dist(Method::Rrs, &p, &p, 4), Err(Error::ResourceLimit(_))));
        assert!(exact_output_dist(Method::SpecHub, &p, &p, 3).is_err());
    }

    #[test]
    fn pair_coupling_has_both_marginals() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        for m in [Method::Rrs, Method::Rrsw, Method::SpecHub] {
            let pi = exact_pair_coupling(m, &p, &q).unwrap();
            let joint = match m {
                Method::Rrs => crate::draftjoint::independent_joint(&q),
                Method::Rrsw => crate::draftjoint::wor_joint(&q).unwrap(),
                _ => crate::draftjoint::hub_joint(&q).unwrap(),
            };
            let mut target = [0.0; 3];
            for x1 in 0..3 {
                for x2 in 0..3 {
                    let row = &pi[(x1 * 3 + x2) * 3..(x1 * 3 + x2 + 1) * 3];
                    assert_abs_diff_eq!(row.iter().sum::<f64>(), joint.get(x1, x2), epsilon = 1e-12);
                    for y in 0..3 {
                        target[y] += row[y];
                    }
                }
            }
            for y in 0..3 {
                assert_abs_diff_eq!(target[y], p[y], epsilon = 1e-12);
            }
        }
    }
}
