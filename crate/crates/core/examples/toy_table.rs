//! Mean two-draft acceptance of every method on synthetic pairs, over a small temperature sweep.
//!
//! Pass `gaussian` as the first argument to draw Gaussian rather than uniform logits.

use spechub::synthlab::{toy_experiment, LogitNoise, ToyConfig};

fn main() -> spechub::Result<()> {
    let noise: LogitNoise = match std::env::args().nth(1) {
        Some(arg) => arg.parse()?,
        None => LogitNoise::Uniform,
    };
    println!("{:>5} {:>6} {:>8} {:>8} {:>8}", "T", "lambda", "method", "mean", "stderr");
    for temperature in [0.1, 0.25, 0.5] {
        for lambda in [0.5, 0.7] {
            let cfg = ToyConfig {
                temperature,
                lambda,
                n_pairs: 50,
                mc_trials: 500,
                seed: 7,
                noise,
                ..ToyConfig::default()
            };
            for row in toy_experiment(&cfg)? {
                println!(
                    "{temperature:>5} {lambda:>6} {:>8} {:>8.4} {:>8.4}",
                    row.method, row.mean, row.stderr
                );
            }
        }
    }
    Ok(())
}
