//! Records synthetic node distributions as an NDJSON trace, reads it back and replays it through
//! the tree simulator. The replay reproduces the synthetic run exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spechub::cli::trace::{read_trace, write_record};
use spechub::synthlab::LogitNoise;
use spechub::treesim::{make_full_tree, run_sim, DistProcess, SyntheticProcess, TraceRecord};
use spechub::verify::Method;

fn main() -> spechub::Result<()> {
    let tree = make_full_tree(2, 3)?;
    let steps = 200;
    let synth = SyntheticProcess { temperature: 0.5, lambda: 0.7, vocab: 20, seed: 5, noise: LogitNoise::Uniform };

    let mut buf = Vec::new();
    for step in 0..steps as u64 {
        for depth in 0..tree.draft_depth() as u64 {
            let (p, q) = synth.pair(step, depth)?;
            write_record(&mut buf, &TraceRecord { step, depth, p, q })?;
        }
    }
    println!("trace: {} bytes", buf.len());

    let trace = read_trace(buf.as_slice())?.into_trace()?;
    let replay = DistProcess::Trace(trace);
    let live = DistProcess::Synthetic(synth);
    for process in [&live, &replay] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = run_sim(&tree, process, Method::SpecHub, steps, &mut rng)?;
        println!("{process}: {:.4} tokens/step", report.mean_tokens_per_step);
    }
    Ok(())
}
