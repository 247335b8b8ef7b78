//! Seeded masks and synthetic ring data.
//!
//! All generators use ChaCha8 seeded from the caller's seed; masks and data
//! read separate streams, so one seed can drive both without correlation.
//! The solver's initializer uses stream 0 of the same seed.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tensor_ring::{DenseTensor, ObservationMask, Shape, TRChain};

use crate::error::{HarnessError, Result};

const DATA_STREAM: u64 = 1;
const MASK_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Number of observed entries: `ratio * total` rounded half up.
pub fn observed_count(total: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(HarnessError::InvalidArgument(format!(
            "observation ratio must be in (0, 1], got {ratio}"
        )));
    }
    Ok(((ratio * total as f64 + 0.5).floor() as usize).min(total))
}

/// Exactly `round(ratio * N)` distinct entries, uniform without replacement.
pub fn sample_mask(shape: &Shape, ratio: f64, seed: u64) -> Result<ObservationMask> {
    let count = observed_count(shape.len(), ratio)?;
    let indices = if count == shape.len() {
        (0..count).collect()
    } else {
        sample(&mut stream(seed, MASK_STREAM), shape.len(), count).into_vec()
    };
    Ok(ObservationMask::from_indices(shape.clone(), indices)?)
}

/// A uniform-rank chain with independent standard-normal core entries.
pub fn random_chain(dims: &[usize], rank: usize, seed: u64) -> Result<TRChain> {
    random_chain_ranks(dims, &vec![rank; dims.len() + 1], seed)
}

pub fn random_chain_ranks(dims: &[usize], ranks: &[usize], seed: u64) -> Result<TRChain> {
    let mut rng = stream(seed, DATA_STREAM);
    Ok(TRChain::from_fn(dims, ranks, |_| StandardNormal.sample(&mut rng))?)
}

/// The full tensor of a random chain, and the chain.
pub fn synthetic_tr(dims: &[usize], rank: usize, seed: u64) -> Result<(DenseTensor, TRChain)> {
    let chain = random_chain(dims, rank, seed)?;
    Ok((chain.full()?, chain))
}
