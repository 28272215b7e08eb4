use crate::error::{HviError, Result};
use crate::model::{make_true_params, Dataset};
use crate::rng::{normal_vec, stream};

const DATA_STREAM: u64 = 0x4441_5441;

/// Draws `z ~ N(0, I_d)` once, then `N` rows `x_i ~ N(z + Δ, Σ)` with the
/// ground-truth parameters of [`make_true_params`]. Returns the data and `z`.
pub fn generate_dataset_with_latent(d: usize, n: usize, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if d == 0 || n == 0 {
        return Err(HviError::Config(format!("need d >= 1 and N >= 1, got d={d}, N={n}")));
    }
    let truth = make_true_params(d);
    let mut rng = stream(seed, &[DATA_STREAM, d as u64]);
    let z = normal_vec(&mut rng, d);
    let sd: Vec<f64> = truth.sigma_sq.iter().map(|v| v.sqrt()).collect();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let e = normal_vec(&mut rng, d);
        values.extend((0..d).map(|j| z[j] + truth.delta[j] + sd[j] * e[j]));
    }
    Ok((Dataset::from_flat(values, d)?, z))
}

pub fn generate_dataset(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    Ok(generate_dataset_with_latent(d, n, seed)?.0)
}
