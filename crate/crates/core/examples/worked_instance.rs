//! Acceptance rates of single-draft, RRS, RRSw and SpecHub on a small hand-picked pair.

use spechub::verify::{analytic_rates_rrs, analytic_rates_spechub, exact_rates, Method};
use spechub::Distribution;

fn main() -> spechub::Result<()> {
    let p = Distribution::new(vec![0.1, 0.6, 0.3])?;
    let q = Distribution::new(vec![0.5, 0.3, 0.2])?;

    let single = exact_rates(Method::Single, &p, &q, 1)?;
    let rrs = analytic_rates_rrs(&p, &q, 2)?;
    let rrsw = exact_rates(Method::Rrsw, &p, &q, 2)?;
    let hub = analytic_rates_spechub(&p, &q)?;

    for (name, rates) in [("single", single), ("rrs", rrs), ("rrsw", rrsw), ("spechub", hub)] {
        println!(
            "{name:>8}  slots {:?}  total {:.4}",
            rates.per_position.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
            rates.total
        );
    }
    Ok(())
}
