use rand::Rng;
use serde::Serialize;

use crate::draftjoint::draw_drafts;
use crate::error::{Error, Result};
use crate::sampling::RngChooser;
use crate::simplex::Distribution;

use super::{check_vocab, rrs_verdict, step_verdict, Method, RateVector, SpecHubVerifier, Verdict};

/// Empirical acceptance frequencies with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRates {
    pub rates: RateVector,
    pub stderr: Vec<f64>,
    pub total_stderr: f64,
    pub trials: usize,
}

fn binomial_se(freq: f64, n: usize) -> f64 {
    (freq * (1.0 - freq) / n as f64).sqrt()
}

/// Runs `trials` independent draft-and-verify steps and tallies the accepted slot.
pub fn mc_rates<R: Rng + ?Sized>(
    method: Method,
    p: &Distribution,
    q: &Distribution,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> Result<McRates> {
    check_vocab(p, q)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let slots = match method {
        Method::Single => 1,
        Method::SpecHub => 2,
        Method::Rrs | Method::Rrsw => k,
    };
    if slots == 0 {
        return Err(Error::invalid("at least one draft is required"));
    }
    let mut counts = vec![0usize; slots];
    let mut ch = RngChooser(rng);
    // SpecHub's stages depend only on (p, q); build them once
    let spechub = match method {
        Method::SpecHub => SpecHubVerifier::new(p, q).ok(),
        _ => None,
    };
    let sampler = spechub.as_ref().map(|v| v.sampler());
    for _ in 0..trials {
        let verdict = match (&spechub, &sampler) {
            (Some(v), Some(s)) => {
                let pair = s.choose(&mut ch);
                v.verdict(pair, &mut ch)?
            }
            _ if matches!(method, Method::Rrs | Method::Rrsw) => {
                let wor = method == Method::Rrsw;
                let drafts = draw_drafts(q, slots, wor, &mut ch)?;
                rrs_verdict(p, q, &drafts, wor, &mut ch)?
            }
            _ => step_verdict(method, p, q, slots, &mut ch)?,
        };
        if let Verdict::Accepted { position, .. } = verdict {
            counts[position - 1] += 1;
        }
    }
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    let stderr = freqs.iter().map(|&f| binomial_se(f, trials)).collect();
    let rates = RateVector::new(freqs);
    let total_stderr = binomial_se(rates.total.min(1.0), trials);
    Ok(McRates {
        rates,
        stderr,
        total_stderr,
        trials,
    })
}
