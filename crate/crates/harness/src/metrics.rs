use tensor_ring::{DenseTensor, ObservationMask};

use crate::error::{HarnessError, Result};

/// `||xhat - x||_F / ||x||_F`.
pub fn recovery_error(xhat: &DenseTensor, x: &DenseTensor) -> Result<f64> {
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(HarnessError::InvalidArgument(
            "recovery error against an all-zero ground truth".into(),
        ));
    }
    Ok(xhat.sub(x)?.frobenius_norm() / norm)
}

/// Recovery error restricted to the entries outside `observed`. `None` when
/// every entry was observed or the held-out truth is zero.
pub fn generalization_error(
    xhat: &DenseTensor,
    x: &DenseTensor,
    observed: &ObservationMask,
) -> Result<Option<f64>> {
    let held_out = observed.complement();
    if held_out.is_empty() {
        return Ok(None);
    }
    let norm = held_out.masked_norm(x)?;
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(held_out.masked_distance(xhat, x)? / norm))
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
