use crate::error::Result;
use crate::simplex::{overlap_unchecked, Distribution};

use super::{check_vocab, next_stage, RateVector, SpecHubVerifier};

/// Closed-form per-slot acceptance of recursive rejection sampling with independent drafts.
///
/// Slot `i` accepts with probability `prod_{j<i}(1 - a_j) * a_i`, where `a_i`
/// is the overlap between the `i`-th running residual and `q`.
pub fn analytic_rates_rrs(p: &Distribution, q: &Distribution, k: usize) -> Result<RateVector> {
    check_vocab(p, q)?;
    let q = q.probs();
    let mut target = p.probs().to_vec();
    let mut reach = 1.0;
    let mut rates = Vec::with_capacity(k);
    for _ in 0..k {
        let alpha = overlap_unchecked(&target, q);
        rates.push(reach * alpha);
        reach *= 1.0 - alpha;
        let raw: Vec<f64> = target.iter().zip(q).map(|(t, d)| (t - d).max(0.0)).collect();
        let mass: f64 = raw.iter().sum();
        if mass <= crate::simplex::EMPTY_MASS {
            reach = 0.0;
        }
        target = next_stage(raw, &target);
    }
    Ok(RateVector::new(rates))
}

/// Closed-form per-slot acceptance of SpecHub (`k = 2`).
pub fn analytic_rates_spechub(p: &Distribution, q: &Distribution) -> Result<RateVector> {
    let m = SpecHubVerifier::new(p, q)?.slot_masses();
    Ok(RateVector::new(vec![m.first + m.hub_first, m.second + m.hub_second]))
}

/// Total probability that SpecHub emits its hub token through either slot.
pub fn spechub_hub_acceptance(p: &Distribution, q: &Distribution) -> Result<f64> {
    let m = SpecHubVerifier::new(p, q)?.slot_masses();
    Ok(m.hub_first + m.hub_second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rrs_identical_distributions() {
        let q = d(&[0.5, 0.3, 0.2]);
        let r = analytic_rates_rrs(&q, &q, 4).unwrap();
        assert_eq!(r.per_position, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rrs_worked_instance() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        let r = analytic_rates_rrs(&p, &q, 2).unwrap();
        assert_abs_diff_eq!(r.per_position[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_position[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.total, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn rrs_second_slot_matches_closed_form() {
        // sum_x min(p - min(p, q), (1 - alpha) q)
        let p = d(&[0.05, 0.25, 0.1, 0.4, 0.2]);
        let q = d(&[0.3, 0.1, 0.3, 0.1, 0.2]);
        let alpha: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| a.min(*b)).sum();
        let expected: f64 = p
            .probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - a.min(*b)).min((1.0 - alpha) * b))
            .sum();
        let r = analytic_rates_rrs(&p, &q, 2).unwrap();
        assert_abs_diff_eq!(r.per_position[1], expected, epsilon = 1e-14);
    }

    #[test]
    fn spechub_identical_distributions() {
        let q = d(&[0.5, 0.3, 0.2]);
        let r = analytic_rates_spechub(&q, &q).unwrap();
        assert_abs_diff_eq!(r.total, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.per_position[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn spechub_worked_instance() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.3, 0.2]);
        let v = SpecHubVerifier::new(&p, &q).unwrap();
        let m = v.slot_masses();
        // non-hub second-slot acceptance: 0.3 for token 1, 0.1 for token 2
        assert_abs_diff_eq!(m.second, 0.4, epsilon = 1e-14);
        let r = analytic_rates_spechub(&p, &q).unwrap();
        assert_abs_diff_eq!(r.total, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spechub_hub_acceptance(&p, &q).unwrap(), 0.1, epsilon = 1e-14);
    }

    mod props {
        use super::*;
        use crate::verify::{exact_rates, Method};
        use proptest::prelude::*;

        fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
            (2usize..7).prop_flat_map(|v| {
                let w = proptest::collection::vec(0.0f64..1.0, v);
                (w.clone(), w).prop_filter_map("empty weights", |(a, b)| {
                    Some((Distribution::normalized(a).ok()?, Distribution::normalized(b).ok()?))
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn rrs_closed_form_matches_enumeration((p, q) in pair(), k in 1usize..4) {
                let closed = analytic_rates_rrs(&p, &q, k).unwrap();
                let exact = exact_rates(Method::Rrs, &p, &q, k).unwrap();
                for (a, b) in closed.per_position.iter().zip(&exact.per_position) {
                    prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                }
            }

            #[test]
            fn spechub_closed_form_matches_enumeration((p, q) in pair()) {
                prop_assume!(q.probs().iter().filter(|x| **x > 0.0).count() >= 2);
                let closed = analytic_rates_spechub(&p, &q).unwrap();
                let exact = exact_rates(Method::SpecHub, &p, &q, 2).unwrap();
                for (a, b) in closed.per_position.iter().zip(&exact.per_position) {
                    prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                }
            }
        }
    }
}
