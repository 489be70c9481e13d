//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spechub::Distribution;

/// Softmax of Gaussian logits with a random scale, so instances range from flat to peaked.
pub fn peaked(rng: &mut ChaCha8Rng, v: usize) -> Distribution {
    let scale: f64 = rng.random_range(0.2..4.0);
    let logits: Vec<f64> = (0..v)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            scale * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Distribution::normalized(logits.iter().map(|l| (l - m).exp()).collect()).unwrap()
}

/// Normalized uniform weights with some entries zeroed (at least two stay positive).
pub fn sparse(rng: &mut ChaCha8Rng, v: usize) -> Distribution {
    loop {
        let w: Vec<f64> = (0..v)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() })
            .collect();
        if w.iter().filter(|x| **x > 0.0).count() >= 2 {
            return Distribution::normalized(w).unwrap();
        }
    }
}

/// Either kind, chosen at random.
pub fn any_dist(rng: &mut ChaCha8Rng, v: usize) -> Distribution {
    if rng.random::<bool>() {
        peaked(rng, v)
    } else {
        sparse(rng, v)
    }
}
