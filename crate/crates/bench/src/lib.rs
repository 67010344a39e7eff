//! Fixtures shared by the benchmarks.

use anglerank::{AngleModel, Ranking, SamplerOptions, StandardizedRanking};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n` rankings of `t` items drawn around the identity ranking.
pub fn synthetic(t: usize, kappa: f64, n: usize, seed: u64) -> Vec<StandardizedRanking> {
    let theta = Ranking::identity(t).expect("t >= 2").standardize().as_slice().to_vec();
    let model = AngleModel::new(kappa, theta).expect("valid model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model
        .sample(n, &SamplerOptions::default(), &mut rng)
        .iter()
        .map(Ranking::standardize)
        .collect()
}
