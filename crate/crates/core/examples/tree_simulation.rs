//! Tokens per step on a binary draft tree for RRS, RRSw and SpecHub, driven by the synthetic
//! per-node process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spechub::synthlab::LogitNoise;
use spechub::treesim::{make_full_tree, run_sim, DistProcess, SyntheticProcess};
use spechub::verify::Method;

fn main() -> spechub::Result<()> {
    let tree = make_full_tree(2, 4)?;
    let process = DistProcess::Synthetic(SyntheticProcess {
        temperature: 0.5,
        lambda: 0.7,
        vocab: 50,
        seed: 3,
        noise: LogitNoise::Uniform,
    });
    println!("{tree}, draft depth {}", tree.draft_depth());
    for method in [Method::Rrs, Method::Rrsw, Method::SpecHub] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = run_sim(&tree, &process, method, 5000, &mut rng)?;
        println!(
            "{:>8}: {:.4} +- {:.4} tokens/step, root slots {:?}",
            method.name(),
            report.mean_tokens_per_step,
            report.std_error,
            report.per_position_rates.per_position
        );
    }
    Ok(())
}
