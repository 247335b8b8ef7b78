//! Dense n-order tensors with a single fixed linearization.
//!
//! Entry `(i_1, .., i_n)` (0-based) lives at linear offset
//! `i_1 + i_2*I_1 + i_3*I_1*I_2 + ...`, i.e. the first index runs fastest.
//! Every unfolding in this crate is an index map over that one layout, and an
//! order-2 tensor is a column-major matrix.

use crate::error::{Error, Result};

/// Free-function form of [`DenseTensor::permute_cyclic`].
pub fn tensor_permute(t: &DenseTensor, mode: usize) -> Result<DenseTensor> {
    t.permute_cyclic(mode)
}

/// Dimensions `I_1 x .. x I_n` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    len: usize,
}

impl Shape {
    /// Every dimension must be at least 1 and the element count must fit in `usize`.
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::Shape("tensor order must be at least 1".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("dimension {pos} is zero")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Shape(format!("element count of {dims:?} overflows")))?;
        Ok(Self { dims, len })
    }

    pub fn matrix(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![rows, cols])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear offset of a multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::IndexOutOfRange(format!(
                "index has {} components, tensor has order {}",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in idx.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::IndexOutOfRange(format!(
                    "index {i} on mode {k} with dimension {d}"
                )));
            }
            offset += i * stride;
            stride *= d;
        }
        Ok(offset)
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, mut linear: usize) -> Result<Vec<usize>> {
        if linear >= self.len {
            return Err(Error::IndexOutOfRange(format!(
                "linear index {linear} for {} entries",
                self.len
            )));
        }
        Ok(self
            .dims
            .iter()
            .map(|&d| {
                let i = linear % d;
                linear /= d;
                i
            })
            .collect())
    }
}

/// A dense real tensor stored first-index-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "data has {} entries, shape {:?} needs {}",
                data.len(),
                shape.dims(),
                shape.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_dims(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::new(dims)?, data)
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        Self { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.len()];
        Self { shape, data }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in linear order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut idx = vec![0usize; shape.order()];
        let mut data = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            data.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(shape.dims()) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Self { shape, data }
    }

    /// Column-major matrix from its entries.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::matrix(rows, cols)?, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let shape = Shape::matrix(n, n)?;
        Ok(Self::from_fn(shape, |i| if i[0] == i[1] { 1.0 } else { 0.0 }))
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.shape.linear_index(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let at = self.shape.linear_index(idx)?;
        self.data[at] = value;
        Ok(())
    }

    /// Rows of an order-2 tensor. Panics on other orders.
    pub fn rows(&self) -> usize {
        assert_eq!(self.order(), 2, "rows() on an order-{} tensor", self.order());
        self.shape.dims()[0]
    }

    /// Columns of an order-2 tensor. Panics on other orders.
    pub fn cols(&self) -> usize {
        assert_eq!(self.order(), 2, "cols() on an order-{} tensor", self.order());
        self.shape.dims()[1]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `vec(X)`: the entries in canonical linear order.
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(&self, new_shape: Shape) -> Result<Self> {
        self.clone().into_reshape(new_shape)
    }

    pub fn into_reshape(self, new_shape: Shape) -> Result<Self> {
        if new_shape.len() != self.shape.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} entries) to {:?} ({} entries)",
                self.shape.dims(),
                self.shape.len(),
                new_shape.dims(),
                new_shape.len()
            )));
        }
        Ok(Self {
            shape: new_shape,
            data: self.data,
        })
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::IndexOutOfRange(format!(
                "mode {mode} for an order-{} tensor",
                self.order()
            )));
        }
        Ok(())
    }

    /// Mode-`mode` unfolding: rows indexed by that mode, columns by the
    /// remaining modes in their original order with the earliest one fastest.
    pub fn mode_unfold(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let dims = self.dims();
        let before: usize = dims[..mode].iter().product();
        let width = dims[mode];
        let after: usize = dims[mode + 1..].iter().product();
        let mut out = vec![0.0; self.len()];
        for r in 0..after {
            for m in 0..width {
                let src = (m + r * width) * before;
                for l in 0..before {
                    out[m + (l + r * before) * width] = self.data[src + l];
                }
            }
        }
        Self::matrix(width, before * after, out)
    }

    /// Canonical matricization splitting after the first `split` modes
    /// (`1 <= split <= n-1`). Under the fixed layout this moves no data.
    pub fn canonical_matricize(&self, split: usize) -> Result<Self> {
        if split == 0 || split >= self.order() {
            return Err(Error::IndexOutOfRange(format!(
                "split {split} for an order-{} tensor",
                self.order()
            )));
        }
        let rows: usize = self.dims()[..split].iter().product();
        let cols: usize = self.dims()[split..].iter().product();
        self.reshape(Shape::matrix(rows, cols)?)
    }

    /// Cyclic mode permutation bringing mode `mode` to the front:
    /// the result has dims `I_mode, .., I_n, I_1, .., I_{mode-1}` and
    /// `out(j_mode, .., j_n, j_1, ..) = self(j_1, .., j_n)`. Mode 0 is the identity.
    pub fn permute_cyclic(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if mode == 0 {
            return Ok(self.clone());
        }
        let dims = self.dims();
        let lead: usize = dims[..mode].iter().product();
        let tail: usize = dims[mode..].iter().product();
        // The layout is a lead x tail matrix; the permutation is its transpose.
        let mut out = vec![0.0; self.len()];
        for t in 0..tail {
            for l in 0..lead {
                out[t + l * tail] = self.data[l + t * lead];
            }
        }
        let mut new_dims = dims[mode..].to_vec();
        new_dims.extend_from_slice(&dims[..mode]);
        Self::from_dims(new_dims, out)
    }

    /// Entry-wise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "hadamard of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "difference of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Matrix transpose of an order-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        if self.order() != 2 {
            return Err(Error::Shape(format!(
                "transpose of an order-{} tensor",
                self.order()
            )));
        }
        // For a matrix the cyclic permutation by one mode is the transpose.
        self.permute_cyclic(1)
    }

    /// Matrix product of two order-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.order() != 2 || other.order() != 2 || self.cols() != other.rows() {
            return Err(Error::Shape(format!(
                "matmul of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        let mut out = vec![0.0; m * n];
        crate::kernel::matmul_acc(&self.data, m, k, &other.data, n, &mut out);
        Self::matrix(m, n, out)
    }
}

/// The observed set `Omega`, stored as strictly increasing linear offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    shape: Shape,
    observed: Vec<usize>,
}

impl ObservationMask {
    /// Builds a mask from linear offsets in any order. Duplicates are merged.
    pub fn from_indices(shape: Shape, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= shape.len() {
                return Err(Error::IndexOutOfRange(format!(
                    "observed offset {last} for {} entries",
                    shape.len()
                )));
            }
        }
        Ok(Self {
            shape,
            observed: indices,
        })
    }

    /// Every entry observed.
    pub fn full(shape: Shape) -> Self {
        let observed = (0..shape.len()).collect();
        Self { shape, observed }
    }

    /// Reads a 0/1 tensor; any other value is rejected.
    pub fn from_binary(p: &DenseTensor) -> Result<Self> {
        let mut observed = Vec::new();
        for (i, &v) in p.data().iter().enumerate() {
            if v == 1.0 {
                observed.push(i);
            } else if v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "mask entry {i} is {v}, expected 0 or 1"
                )));
            }
        }
        Ok(Self {
            shape: p.shape().clone(),
            observed,
        })
    }

    /// The binary tensor `P_Omega`.
    pub fn to_binary(&self) -> DenseTensor {
        let mut p = DenseTensor::zeros(self.shape.clone());
        for &i in &self.observed {
            p.data_mut()[i] = 1.0;
        }
        p
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn indices(&self) -> &[usize] {
        &self.observed
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// Fraction of entries observed.
    pub fn ratio(&self) -> f64 {
        self.observed.len() as f64 / self.shape.len() as f64
    }

    pub fn contains(&self, linear: usize) -> bool {
        self.observed.binary_search(&linear).is_ok()
    }

    /// The unobserved entries.
    pub fn complement(&self) -> Self {
        let mut observed = Vec::with_capacity(self.shape.len() - self.observed.len());
        let mut next = self.observed.iter().peekable();
        for i in 0..self.shape.len() {
            if next.peek() == Some(&&i) {
                next.next();
            } else {
                observed.push(i);
            }
        }
        Self {
            shape: self.shape.clone(),
            observed,
        }
    }

    /// `P_Omega o X`: observed entries kept, everything else zero. Unlike a
    /// Hadamard product this also clears NaN placeholders in missing entries.
    pub fn zero_fill(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(x)?;
        let mut out = DenseTensor::zeros(self.shape.clone());
        for &i in &self.observed {
            out.data_mut()[i] = x.data()[i];
        }
        Ok(out)
    }

    /// `||P_Omega o (a - b)||_F`.
    pub fn masked_distance(&self, a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
        self.check_shape(a)?;
        self.check_shape(b)?;
        Ok(self
            .observed
            .iter()
            .map(|&i| {
                let d = a.data()[i] - b.data()[i];
                d * d
            })
            .sum::<f64>()
            .sqrt())
    }

    /// `||P_Omega o x||_F`.
    pub fn masked_norm(&self, x: &DenseTensor) -> Result<f64> {
        self.check_shape(x)?;
        Ok(self
            .observed
            .iter()
            .map(|&i| x.data()[i] * x.data()[i])
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn check_shape(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != &self.shape {
            return Err(Error::Shape(format!(
                "mask shape {:?} does not match tensor shape {:?}",
                self.shape.dims(),
                x.dims()
            )));
        }
        Ok(())
    }
}
