//! Shared fixtures for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subspace_bayes::{generate_data, make_close_basis, uniform_stiefel, DataSet, ScenarioConfig};

/// The reference two-subspace scenario (M=8, R=2, kappa=40, SNR 0 dB) at a
/// given snapshot count.
pub fn reference_dataset(t: usize, seed: u64) -> DataSet {
    let config = ScenarioConfig {
        t,
        seed,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h1 = uniform_stiefel(config.m, config.r, &mut rng).unwrap();
    let angles: Vec<f64> = config
        .true_angles_deg
        .iter()
        .map(|a| a.to_radians())
        .collect();
    let h2 = make_close_basis(&h1, &angles, &mut rng).unwrap();
    generate_data(&config, &[h1, h2], &mut rng).unwrap()
}
