//! Exhaustive enumeration of every random branch of a verifier: the output distribution matches
//! the target for all methods.

use spechub::verify::{exact_output_dist, exact_rates, Method};
use spechub::Distribution;

fn main() -> spechub::Result<()> {
    let p = Distribution::new(vec![0.05, 0.35, 0.25, 0.2, 0.15])?;
    let q = Distribution::new(vec![0.4, 0.1, 0.3, 0.15, 0.05])?;
    for (method, k) in [(Method::Single, 1), (Method::Rrs, 3), (Method::Rrsw, 3), (Method::SpecHub, 2)] {
        let out = exact_output_dist(method, &p, &q, k)?;
        let rates = exact_rates(method, &p, &q, k)?;
        println!(
            "{:>8} k={k}: max |output - p| = {:.2e}, acceptance {:.4}",
            method.name(),
            out.max_abs_diff(&p),
            rates.total
        );
    }
    Ok(())
}
