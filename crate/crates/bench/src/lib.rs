//! Deterministic inputs shared by the benchmarks.

use synesthete_core::melody::procedural_generate;
use synesthete_core::nn::Activation;
use synesthete_core::{DenseNet, Prng, Tensor2, TokenGrid};

/// Procedural melodies with a fixed seed.
pub fn melodies(bars: usize, count: usize) -> Vec<TokenGrid> {
    procedural_generate(17, bars, count).expect("valid bar count")
}

/// A dense net shaped like the melody encoder: one tanh hidden layer.
pub fn encoder_net(input: usize, hidden: usize, output: usize) -> DenseNet<f32> {
    let mut rng = Prng::new(17);
    DenseNet::xavier(&[input, hidden, output], &[Activation::Tanh, Activation::Identity], &mut rng)
        .expect("consistent widths")
}

/// Standard normal batch.
pub fn gaussian_batch(rows: usize, cols: usize) -> Tensor2<f32> {
    let mut rng = Prng::new(18);
    Tensor2::from_fn(rows, cols, |_, _| rng.gaussian() as f32)
}

/// Standard normal vector.
pub fn gaussian_vec(dim: usize, seed: u64) -> Vec<f32> {
    Prng::new(seed).gaussian_vec(dim).into_iter().map(|v| v as f32).collect()
}
