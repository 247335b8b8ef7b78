//! Ring initialization from a sequential truncated SVD.
//!
//! The zero-filled data is split into a tensor train by successive SVDs; each
//! train core is then placed in the leading block of a full-size ring core and
//! the rest of the core is filled with small Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::truncated_svd;
use crate::model::{check_rank_vector, TRChain, TRCore};
use crate::tensor::{DenseTensor, Shape};

pub const DEFAULT_SIGMA: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraConfig {
    pub rank: usize,
    /// Standard deviation of the padding noise.
    pub sigma: f64,
    pub seed: u64,
}

impl TraConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for TraConfig {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Uniform-rank initializer: `n` cores, each `R x I_k x R`.
pub fn tra_init(x: &DenseTensor, cfg: &TraConfig) -> Result<TRChain> {
    if cfg.rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let ranks = vec![cfg.rank; x.order() + 1];
    tra_init_ranks(x, &ranks, cfg.sigma, cfg.seed)
}

/// Initializer for an arbitrary bond vector `[R_0 .. R_n]`, so a tensor train
/// (`R_0 = R_n = 1`) is covered too.
///
/// Truncation ranks are `T_0 = 1`, `T_k = min(R_k, T_{k-1} I_k, prod_{t>k} I_t)`
/// and `T_n = 1`. Core `k` holds the SVD factor in its `[0..T_{k-1}, :, 0..T_k]`
/// block; every other entry is `sigma * z` with `z` standard normal, drawn
/// core by core in linear order from a ChaCha8 stream seeded with `seed`.
pub fn tra_init_ranks(x: &DenseTensor, ranks: &[usize], sigma: f64, seed: u64) -> Result<TRChain> {
    let n = x.order();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "initialization needs order >= 2, got {n}"
        )));
    }
    let dims = x.dims().to_vec();
    check_rank_vector(&dims, ranks)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("initialization input"));
    }

    let mut blocks: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(n);
    let mut carry = x.data().to_vec();
    let mut t_prev = 1usize;
    let mut rest = x.len();
    for k in 0..n - 1 {
        let rows = t_prev * dims[k];
        rest /= dims[k];
        let cols = rest;
        let t = ranks[k + 1].min(rows).min(cols);
        let m = DenseTensor::matrix(rows, cols, carry)?;
        let svd = truncated_svd(&m, t)?;
        blocks.push((t_prev, t, svd.u.into_data()));
        // S V^T as a t x cols matrix; read as (t * I_{k+1}) x (cols / I_{k+1}).
        let mut next = vec![0.0; t * cols];
        let v = svd.v.data();
        for c in 0..cols {
            for (r, &s) in svd.s.iter().enumerate() {
                next[r + c * t] = s * v[c + r * cols];
            }
        }
        carry = next;
        t_prev = t;
    }
    blocks.push((t_prev, 1, carry));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cores = Vec::with_capacity(n);
    for (k, (tl, tr, block)) in blocks.into_iter().enumerate() {
        let (rl, d, rr) = (ranks[k], dims[k], ranks[k + 1]);
        let shape = Shape::new(vec![rl, d, rr])?;
        let mut data = vec![0.0; shape.len()];
        for b in 0..rr {
            for i in 0..d {
                for a in 0..rl {
                    let at = a + i * rl + b * rl * d;
                    if a < tl && b < tr {
                        data[at] = block[a + i * tl + b * tl * d];
                    } else {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        data[at] = sigma * z;
                    }
                }
            }
        }
        cores.push(TRCore::new(DenseTensor::new(shape, data)?)?);
    }
    TRChain::new(cores)
}
