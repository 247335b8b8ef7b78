//! Column-major dense product shared by every contraction in the crate.
//!
//! Connect products, slice products and traces all go through
//! [`matmul_acc`], so each output entry is accumulated over the inner index
//! in ascending order starting from zero. That makes a materialized subchain
//! slice and the directly multiplied slice chain bit-identical.

/// `out += a * b` with `a` m x k and `b` k x n, all column-major.
pub(crate) fn matmul_acc(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for j in 0..n {
        let out_col = &mut out[j * m..(j + 1) * m];
        for p in 0..k {
            let scale = b[p + j * k];
            let a_col = &a[p * m..(p + 1) * m];
            for (o, &x) in out_col.iter_mut().zip(a_col) {
                *o += x * scale;
            }
        }
    }
}

pub(crate) fn matmul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul_acc(a, m, k, b, n, &mut out);
    out
}

/// Trace of a square column-major matrix, diagonal summed in order.
pub(crate) fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i + i * n]).sum()
}
