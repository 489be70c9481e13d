//! Synthetic `(p, q)` pairs and the acceptance-rate experiments run on them.
//!
//! A toy pair mixes two random logit vectors: `p = softmax(u_p / T)` and
//! `q = softmax((λ u_p + (1 - λ) u_q) / T)`, so `λ` dials how closely the
//! draft tracks the target. Pair `i` is drawn from its own ChaCha stream, which
//! makes it independent of how many pairs an experiment asks for.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{build_flow, max_flow};
use crate::draftjoint::{independent_joint, wor_joint};
use crate::error::{Error, Result};
use crate::simplex::{overlap, softmax_with_temperature, top_token, Distribution, Logits};
use crate::verify::{analytic_rates_rrs, analytic_rates_spechub, mc_rates, Method};

/// Offset that separates Monte-Carlo streams from generator streams.
const MC_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Distribution of the raw logit entries `u_p`, `u_q`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitNoise {
    /// `Unif(0, 1)` entries.
    #[default]
    Uniform,
    /// Standard normal entries.
    Gaussian,
}

impl std::str::FromStr for LogitNoise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(LogitNoise::Uniform),
            "gaussian" => Ok(LogitNoise::Gaussian),
            other => Err(Error::Usage(format!("unknown logit noise `{other}` (uniform, gaussian)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub temperature: f64,
    pub lambda: f64,
    pub vocab: usize,
    pub n_pairs: usize,
    pub mc_trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise: LogitNoise,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            lambda: 0.7,
            vocab: 50,
            n_pairs: 100,
            mc_trials: 1000,
            seed: 0,
            noise: LogitNoise::Uniform,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.vocab < 2 {
            return Err(Error::invalid("vocabulary needs at least two tokens"));
        }
        if self.n_pairs == 0 || self.mc_trials == 0 {
            return Err(Error::invalid("n_pairs and mc_trials must be at least 1"));
        }
        Ok(())
    }
}

fn draw_logits(rng: &mut ChaCha8Rng, vocab: usize, noise: LogitNoise) -> Vec<f64> {
    (0..vocab)
        .map(|_| match noise {
            LogitNoise::Uniform => rng.random::<f64>(),
            LogitNoise::Gaussian => rng.sample(StandardNormal),
        })
        .collect()
}

/// Deterministic pair `index` for `cfg`.
pub fn gen_toy_pair(cfg: &ToyConfig, index: u64) -> Result<(Distribution, Distribution)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let up = draw_logits(&mut rng, cfg.vocab, cfg.noise);
    let uq = draw_logits(&mut rng, cfg.vocab, cfg.noise);
    let mixed: Vec<f64> = if cfg.lambda == 1.0 {
        up.clone()
    } else {
        up.iter()
            .zip(&uq)
            .map(|(a, b)| cfg.lambda * a + (1.0 - cfg.lambda) * b)
            .collect()
    };
    let p = softmax_with_temperature(&Logits::new(up)?, cfg.temperature)?;
    let q = softmax_with_temperature(&Logits::new(mixed)?, cfg.temperature)?;
    Ok((p, q))
}

/// Methods compared in the toy experiment, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyMethod {
    Rrs,
    Rrsw,
    Otm,
    Otmw,
    SpecHub,
}

impl ToyMethod {
    pub const ALL: [ToyMethod; 5] = [
        ToyMethod::Rrs,
        ToyMethod::Rrsw,
        ToyMethod::Otm,
        ToyMethod::Otmw,
        ToyMethod::SpecHub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToyMethod::Rrs => "rrs",
            ToyMethod::Rrsw => "rrsw",
            ToyMethod::Otm => "otm",
            ToyMethod::Otmw => "otmw",
            ToyMethod::SpecHub => "spechub",
        }
    }
}

impl std::str::FromStr for ToyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Usage(format!("unknown method `{s}` (rrs, rrsw, otm, otmw, spechub)")))
    }
}

impl std::fmt::Display for ToyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

/// Per-pair results of the toy experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyInstance {
    pub index: u64,
    pub p: Distribution,
    pub q: Distribution,
    /// Total two-draft acceptance, indexed like [`ToyMethod::ALL`].
    pub totals: [f64; 5],
    /// Monte-Carlo standard error of the RRSw entry.
    pub rrsw_stderr: f64,
    /// RRS `[slot 1, slot 2]`.
    pub rrs_slots: [f64; 2],
    /// SpecHub `[slot 1, slot 2]`.
    pub spechub_slots: [f64; 2],
    /// SpecHub fell back to single-draft sampling (degenerate `q`).
    pub spechub_fallback: bool,
}

impl ToyInstance {
    pub fn total(&self, method: ToyMethod) -> f64 {
        self.totals[ToyMethod::ALL.iter().position(|m| *m == method).expect("listed method")]
    }
}

fn mc_rng(cfg: &ToyConfig, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ MC_SEED_SALT);
    rng.set_stream(index);
    rng
}

fn evaluate_pair(cfg: &ToyConfig, index: u64) -> Result<ToyInstance> {
    let (p, q) = gen_toy_pair(cfg, index)?;
    let rrs = analytic_rates_rrs(&p, &q, 2)?;
    let rrsw = mc_rates(Method::Rrsw, &p, &q, 2, cfg.mc_trials, &mut mc_rng(cfg, index))?;
    let otm = max_flow(&build_flow(&independent_joint(&q), &p)?).value;
    let otmw = max_flow(&build_flow(&wor_joint(&q)?, &p)?).value;
    let (spechub_slots, spechub_fallback) = match analytic_rates_spechub(&p, &q) {
        Ok(r) => ([r.per_position[0], r.per_position[1]], false),
        Err(Error::Degenerate(_)) => ([overlap(&p, &q)?, 0.0], true),
        Err(e) => return Err(e),
    };
    Ok(ToyInstance {
        index,
        totals: [
            rrs.total,
            rrsw.rates.total,
            otm,
            otmw,
            spechub_slots[0] + spechub_slots[1],
        ],
        rrsw_stderr: rrsw.total_stderr,
        rrs_slots: [rrs.per_position[0], rrs.per_position[1]],
        spechub_slots,
        spechub_fallback,
        p,
        q,
    })
}

/// Evaluates every method on pairs `0..n_pairs`, in index order.
pub fn toy_instances(cfg: &ToyConfig) -> Result<Vec<ToyInstance>> {
    cfg.validate()?;
    (0..cfg.n_pairs as u64)
        .into_par_iter()
        .map(|i| evaluate_pair(cfg, i))
        .collect()
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        c += if f64::abs(sum) >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + c
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One method's summary over all pairs of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyRow {
    pub method: ToyMethod,
    pub mean: f64,
    pub stderr: f64,
    /// Pairs on which SpecHub used the single-draft fallback (zero for other methods).
    pub fallbacks: usize,
    pub config: ToyConfig,
}

/// Summarizes [`toy_instances`] into one row per method.
pub fn toy_experiment(cfg: &ToyConfig) -> Result<Vec<ToyRow>> {
    let instances = toy_instances(cfg)?;
    Ok(summarize(cfg, &instances))
}

pub fn summarize(cfg: &ToyConfig, instances: &[ToyInstance]) -> Vec<ToyRow> {
    let fallbacks = instances.iter().filter(|i| i.spechub_fallback).count();
    ToyMethod::ALL
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let values: Vec<f64> = instances.iter().map(|i| i.totals[m]).collect();
            let (mean, stderr) = mean_and_stderr(&values);
            ToyRow {
                method,
                mean,
                stderr,
                fallbacks: if method == ToyMethod::SpecHub { fallbacks } else { 0 },
                config: cfg.clone(),
            }
        })
        .collect()
}

/// Mean per-position acceptance over the pairs of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub k_max: usize,
    /// Analytic RRS rate at positions `1..=k_max`.
    pub rrs: Vec<f64>,
    pub rrs_stderr: Vec<f64>,
    /// Monte-Carlo RRSw rate at positions `1..=k_max`.
    pub rrsw: Vec<f64>,
    pub rrsw_stderr: Vec<f64>,
    /// SpecHub's two positions.
    pub spechub: Vec<f64>,
    pub spechub_stderr: Vec<f64>,
    pub config: ToyConfig,
}

fn column_stats(rows: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    (0..width)
        .map(|j| mean_and_stderr(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .unzip()
}

/// Per-position acceptance decay for RRS, RRSw and SpecHub.
pub fn decay_experiment(cfg: &ToyConfig, k_max: usize) -> Result<DecayTable> {
    cfg.validate()?;
    if k_max == 0 || k_max > cfg.vocab {
        return Err(Error::invalid(format!("k_max must lie in 1..={}, got {k_max}", cfg.vocab)));
    }
    let per_pair: Vec<[Vec<f64>; 3]> = (0..cfg.n_pairs as u64)
        .into_par_iter()
        .map(|i| -> Result<[Vec<f64>; 3]> {
            let (p, q) = gen_toy_pair(cfg, i)?;
            let rrs = analytic_rates_rrs(&p, &q, k_max)?.per_position;
            let rrsw = mc_rates(Method::Rrsw, &p, &q, k_max, cfg.mc_trials, &mut mc_rng(cfg, i))?
                .rates
                .per_position;
            let spechub = match analytic_rates_spechub(&p, &q) {
                Ok(r) => r.per_position,
                Err(Error::Degenerate(_)) => vec![overlap(&p, &q)?, 0.0],
                Err(e) => return Err(e),
            };
            Ok([rrs, rrsw, spechub])
        })
        .collect::<Result<_>>()?;
    let pick = |j: usize| per_pair.iter().map(|r| r[j].clone()).collect::<Vec<_>>();
    let (rrs, rrs_stderr) = column_stats(&pick(0), k_max);
    let (rrsw, rrsw_stderr) = column_stats(&pick(1), k_max);
    let (spechub, spechub_stderr) = column_stats(&pick(2), 2);
    Ok(DecayTable {
        k_max,
        rrs,
        rrs_stderr,
        rrsw,
        rrsw_stderr,
        spechub,
        spechub_stderr,
        config: cfg.clone(),
    })
}

/// `q(a) / (1 - q(a))` for the draft's top token `a`.
pub fn hub_odds(q: &Distribution) -> f64 {
    let a = top_token(q);
    let rest: f64 = q.probs().iter().enumerate().filter(|(i, _)| *i != a).map(|(_, v)| v).sum();
    q[a] / rest
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(t: f64, lambda: f64) -> ToyConfig {
        ToyConfig {
            temperature: t,
            lambda,
            n_pairs: 20,
            mc_trials: 200,
            seed: 11,
            ..ToyConfig::default()
        }
    }

    #[test]
    fn lambda_one_copies_target() {
        for i in 0..5 {
            let (p, q) = gen_toy_pair(&cfg(0.3, 1.0), i).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn lambda_zero_draft_ignores_target_logits() {
        // q must equal softmax of the second logit draw on the pair's stream
        let (p1, q1) = gen_toy_pair(&cfg(1.0, 0.0), 3).unwrap();
        let mut c = cfg(1.0, 0.0);
        c.seed = 12;
        let (p2, _) = gen_toy_pair(&c, 3).unwrap();
        assert_ne!(p1, p2);
        let uq = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            rng.set_stream(3);
            let _ = draw_logits(&mut rng, 50, LogitNoise::Uniform);
            draw_logits(&mut rng, 50, LogitNoise::Uniform)
        };
        let expect = softmax_with_temperature(&Logits::new(uq).unwrap(), 1.0).unwrap();
        assert!(q1.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn pairs_are_deterministic_and_independent_of_count() {
        let a = gen_toy_pair(&cfg(0.1, 0.7), 7).unwrap();
        let mut c = cfg(0.1, 0.7);
        c.n_pairs = 1000;
        assert_eq!(a, gen_toy_pair(&c, 7).unwrap());
        assert_ne!(a, gen_toy_pair(&c, 8).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = cfg(0.1, 0.7);
        c.lambda = 1.5;
        assert!(gen_toy_pair(&c, 0).is_err());
        c = cfg(0.0, 0.5);
        assert!(toy_experiment(&c).is_err());
        c = cfg(0.1, 0.5);
        c.vocab = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn identical_distributions_accept_everything() {
        let rows = toy_experiment(&cfg(0.5, 1.0)).unwrap();
        assert_eq!(rows.len(), 5);
        for r in rows {
            assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let c = cfg(0.25, 0.5);
        assert_eq!(toy_experiment(&c).unwrap(), toy_experiment(&c).unwrap());
    }

    #[test]
    fn optimal_values_dominate_their_methods() {
        for inst in toy_instances(&cfg(0.25, 0.5)).unwrap() {
            assert!(inst.total(ToyMethod::Otm) + 1e-9 >= inst.total(ToyMethod::Rrs));
            assert!(inst.total(ToyMethod::Otmw) >= inst.total(ToyMethod::Rrsw) - 4.0 * inst.rrsw_stderr);
            assert!((0.0..=1.0 + 1e-12).contains(&inst.total(ToyMethod::SpecHub)));
        }
    }

    #[test]
    fn decay_first_position_is_overlap() {
        let c = cfg(1.0, 0.5);
        let table = decay_experiment(&c, 4).unwrap();
        let overlaps: Vec<f64> = (0..c.n_pairs as u64)
            .map(|i| {
                let (p, q) = gen_toy_pair(&c, i).unwrap();
                overlap(&p, &q).unwrap()
            })
            .collect();
        assert_abs_diff_eq!(table.rrs[0], mean_and_stderr(&overlaps).0, epsilon = 1e-12);
        assert!(table.rrs.iter().all(|r| *r > 0.0));
        assert!(table.rrs.windows(2).skip(1).all(|w| w[1] <= w[0] + 1e-12));
        assert!(decay_experiment(&c, 51).is_err());
    }

    #[test]
    fn compensated_mean() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(m, 2.0);
        assert_abs_diff_eq!(se, (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }
}
