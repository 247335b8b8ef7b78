//! Factorizing modes to raise the order of a tensor.
//!
//! Splitting mode `d = f_1 f_2 .. f_k` into consecutive sub-modes (first
//! factor fastest) is a pure reshape under the first-index-fastest layout, so
//! planning only has to choose the factors.

use tensor_ring::{DenseTensor, Shape};

use crate::error::{HarnessError, Result};

fn prime_factors(mut d: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= d {
        while d % p == 0 {
            out.push(p);
            d /= p;
        }
        p += 1;
    }
    if d > 1 {
        out.push(d);
    }
    out
}

/// All ways to write `d` as exactly `k` factors >= 2, non-decreasing.
fn factorizations(d: usize, k: usize, min: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        if d >= min {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
        }
        return;
    }
    let mut f = min;
    while f.pow(k as u32) <= d {
        if d % f == 0 {
            prefix.push(f);
            factorizations(d / f, k - 1, f, prefix, out);
            prefix.pop();
        }
        f += 1;
    }
}

/// The most balanced split of `d` into `k` factors: the one whose factors,
/// sorted from largest, are lexicographically smallest. Returned ascending.
pub fn balanced_factors(d: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(HarnessError::InvalidArgument("zero factors requested".into()));
    }
    if k == 1 {
        return Ok(vec![d]);
    }
    let mut all = Vec::new();
    factorizations(d, k, 2, &mut Vec::new(), &mut all);
    all.into_iter()
        .min_by(|a, b| a.iter().rev().cmp(b.iter().rev()))
        .ok_or_else(|| {
            HarnessError::InvalidArgument(format!("{d} cannot be split into {k} factors"))
        })
}

/// Factorized dims of total order `target_order`.
///
/// Extra factors go one at a time to the dim with the largest mean factor
/// `d^(1/k)` among those that can still be split (ties to the earlier dim);
/// each dim is then split by [`balanced_factors`]. For example
/// `600 x 600 x 3` at order 7 gives `6 x 10 x 10 x 6 x 10 x 10 x 3`.
pub fn reshape_plan(dims: &[usize], target_order: usize) -> Result<Vec<usize>> {
    let n = dims.len();
    if n == 0 || dims.contains(&0) {
        return Err(HarnessError::InvalidArgument(format!("invalid dims {dims:?}")));
    }
    if target_order < n {
        return Err(HarnessError::InvalidArgument(format!(
            "cannot lower order {n} to {target_order} by factorizing"
        )));
    }
    let omega: Vec<usize> = dims.iter().map(|&d| prime_factors(d).len().max(1)).collect();
    let capacity: usize = omega.iter().sum();
    if target_order > capacity {
        return Err(HarnessError::InvalidArgument(format!(
            "{dims:?} has at most {capacity} nontrivial factors, {target_order} requested"
        )));
    }
    let mut k = vec![1usize; n];
    for _ in n..target_order {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if k[i] >= omega[i] {
                continue;
            }
            let mean = (dims[i] as f64).powf(1.0 / k[i] as f64);
            if best.is_none_or(|(_, b)| mean > b) {
                best = Some((i, mean));
            }
        }
        let (i, _) = best.expect("capacity was checked");
        k[i] += 1;
    }
    let mut out = Vec::with_capacity(target_order);
    for (&d, &ki) in dims.iter().zip(&k) {
        out.extend(balanced_factors(d, ki)?);
    }
    Ok(out)
}

/// Reinterprets `x` with dims `new_dims`; only the product has to match.
pub fn apply_reshape(x: &DenseTensor, new_dims: &[usize]) -> Result<DenseTensor> {
    let shape = Shape::new(new_dims.to_vec())?;
    if shape.len() != x.len() {
        return Err(HarnessError::InvalidArgument(format!(
            "reshape {new_dims:?} has {} entries, data has {}",
            shape.len(),
            x.len()
        )));
    }
    Ok(x.reshape(shape)?)
}
