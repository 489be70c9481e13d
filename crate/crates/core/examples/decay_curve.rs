//! How fast the acceptance of each extra draft position falls off.

use spechub::synthlab::{decay_experiment, ToyConfig};

fn main() -> spechub::Result<()> {
    let cfg = ToyConfig { temperature: 0.5, n_pairs: 50, mc_trials: 500, seed: 11, ..ToyConfig::default() };
    let table = decay_experiment(&cfg, 6)?;
    println!("{:>8} {:>8} {:>8} {:>8}", "position", "rrs", "rrsw", "spechub");
    for i in 0..table.k_max {
        let hub = table.spechub.get(i).map(|v| format!("{v:.4}")).unwrap_or_default();
        println!("{:>8} {:>8.4} {:>8.4} {:>8}", i + 1, table.rrs[i], table.rrsw[i], hub);
    }
    Ok(())
}
