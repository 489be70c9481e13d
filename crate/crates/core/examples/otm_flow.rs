//! Optimal acceptance for a fixed pair distribution, found by max flow, next to what each
//! verifier actually achieves.

use spechub::coupling::{max_flow_value_unsplit, optimal_plan, plan_cost, spechub_plan, build_flow};
use spechub::draftjoint::{hub_joint, independent_joint, wor_joint};
use spechub::Distribution;

fn main() -> spechub::Result<()> {
    let p = Distribution::new(vec![0.1, 0.6, 0.3])?;
    let q = Distribution::new(vec![0.5, 0.3, 0.2])?;

    for (name, joint) in [
        ("independent", independent_joint(&q)),
        ("without-replacement", wor_joint(&q)?),
        ("hub", hub_joint(&q)?),
    ] {
        let (plan, flow) = optimal_plan(&joint, &p)?;
        let unsplit = max_flow_value_unsplit(&build_flow(&joint, &p)?);
        println!(
            "{name:>20}: optimal acceptance {:.6} (unsplit network {:.6}), cost {:.6}",
            flow.value,
            unsplit,
            plan_cost(&plan)
        );
        for e in plan.entries().iter().filter(|e| e.accept1 + e.accept2 > 0.0) {
            println!(
                "{:>24} ({}, {}) mass {:.4} accept first {:.4} second {:.4}",
                "", e.x1, e.x2, e.mass, e.accept1, e.accept2
            );
        }
    }

    let hub = spechub_plan(&p, &q)?;
    println!("SpecHub's own plan reaches {:.6}", hub.acceptance());
    Ok(())
}
