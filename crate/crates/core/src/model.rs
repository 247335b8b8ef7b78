//! Tensor ring chains of order-3 cores.
//!
//! A core `U_k` has shape `R_{k-1} x I_k x R_k` (left bond, physical, right
//! bond). Entry `(i_1, .., i_n)` of the represented tensor is
//! `tr(U_1(:, i_1, :) U_2(:, i_2, :) .. U_n(:, i_n, :))`, which requires the
//! ring closure `R_0 = R_n`. A tensor train is the special case `R_0 = R_n = 1`.

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::tensor::{DenseTensor, Shape};

/// One order-3 core of a ring.
#[derive(Debug, Clone, PartialEq)]
pub struct TRCore {
    tensor: DenseTensor,
}

impl TRCore {
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        if tensor.order() != 3 {
            return Err(Error::Shape(format!(
                "a core must have order 3, got {:?}",
                tensor.dims()
            )));
        }
        Ok(Self { tensor })
    }

    pub fn from_parts(left: usize, dim: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(DenseTensor::from_dims(vec![left, dim, right], data)?)
    }

    pub fn zeros(left: usize, dim: usize, right: usize) -> Result<Self> {
        Self::new(DenseTensor::zeros(Shape::new(vec![left, dim, right])?))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.tensor
    }

    pub fn data(&self) -> &[f64] {
        self.tensor.data()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        self.tensor.data_mut()
    }

    pub fn left_rank(&self) -> usize {
        self.tensor.dims()[0]
    }

    /// Physical dimension.
    pub fn dim(&self) -> usize {
        self.tensor.dims()[1]
    }

    pub fn right_rank(&self) -> usize {
        self.tensor.dims()[2]
    }

    /// `U(:, i, :)` copied out as a column-major `left x right` buffer.
    pub(crate) fn slice_buf(&self, i: usize) -> Vec<f64> {
        let (l, d, r) = (self.left_rank(), self.dim(), self.right_rank());
        let data = self.data();
        let mut out = Vec::with_capacity(l * r);
        for b in 0..r {
            let start = i * l + b * l * d;
            out.extend_from_slice(&data[start..start + l]);
        }
        out
    }

    pub(crate) fn set_slice(&mut self, i: usize, values: &[f64]) {
        let (l, d, r) = (self.left_rank(), self.dim(), self.right_rank());
        debug_assert_eq!(values.len(), l * r);
        let data = self.data_mut();
        for b in 0..r {
            let start = i * l + b * l * d;
            data[start..start + l].copy_from_slice(&values[b * l..(b + 1) * l]);
        }
    }

    /// The lateral slice `U(:, i, :)` as a `left x right` matrix.
    pub fn slice(&self, i: usize) -> Result<DenseTensor> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange(format!(
                "slice {i} of a core with physical dimension {}",
                self.dim()
            )));
        }
        DenseTensor::matrix(self.left_rank(), self.right_rank(), self.slice_buf(i))
    }

    /// Left unfolding `(left * dim) x right`; the transpose of the mode-3 unfolding.
    pub fn left_unfold(&self) -> DenseTensor {
        let rows = self.left_rank() * self.dim();
        self.tensor
            .reshape(Shape::matrix(rows, self.right_rank()).expect("core dims are nonzero"))
            .expect("same element count")
    }

    /// Right unfolding `left x (dim * right)`; the mode-1 unfolding.
    pub fn right_unfold(&self) -> DenseTensor {
        let cols = self.dim() * self.right_rank();
        self.tensor
            .reshape(Shape::matrix(self.left_rank(), cols).expect("core dims are nonzero"))
            .expect("same element count")
    }

    /// Tensor connect product: `reshape(L(self) * R(next))`, a core of shape
    /// `left(self) x (dim(self) * dim(next)) x right(next)` whose merged
    /// physical index is `i_self + i_next * dim(self)`.
    pub fn connect(&self, next: &TRCore) -> Result<TRCore> {
        if self.right_rank() != next.left_rank() {
            return Err(Error::Shape(format!(
                "bond mismatch in connect product: {} vs {}",
                self.right_rank(),
                next.left_rank()
            )));
        }
        let rows = self.left_rank() * self.dim();
        let inner = self.right_rank();
        let cols = next.dim() * next.right_rank();
        let data = kernel::matmul(self.data(), rows, inner, next.data(), cols);
        TRCore::from_parts(
            self.left_rank(),
            self.dim() * next.dim(),
            next.right_rank(),
            data,
        )
    }

    /// The trace-over-bond reshape `f`: entry `p` of the result is
    /// `tr(U(:, p, :))`. Needs `left == right`.
    pub fn trace_reshape(&self, dims: &[usize]) -> Result<DenseTensor> {
        if self.left_rank() != self.right_rank() {
            return Err(Error::Shape(format!(
                "trace over a {}x{} bond",
                self.left_rank(),
                self.right_rank()
            )));
        }
        let shape = Shape::new(dims.to_vec())?;
        if shape.len() != self.dim() {
            return Err(Error::Shape(format!(
                "{dims:?} does not match physical dimension {}",
                self.dim()
            )));
        }
        let r = self.left_rank();
        let p = self.dim();
        let data = self.data();
        let values = (0..p)
            .map(|i| (0..r).map(|a| data[a + i * r + a * r * p]).sum())
            .collect();
        DenseTensor::new(shape, values)
    }
}

/// Tensor connect product of two cores; see [`TRCore::connect`].
pub fn connect_product(a: &TRCore, b: &TRCore) -> Result<TRCore> {
    a.connect(b)
}

/// An ordered ring of cores `U_1 .. U_n` with bond ranks `[R_0 .. R_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TRChain {
    cores: Vec<TRCore>,
    ranks: Vec<usize>,
}

impl TRChain {
    /// Validates adjacency (`right(U_k) == left(U_{k+1})`) and closure (`R_0 == R_n`).
    pub fn new(cores: Vec<TRCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("a chain needs at least one core".into()));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].right_rank() != pair[1].left_rank() {
                return Err(Error::Shape(format!(
                    "core {k} has right bond {} but core {} has left bond {}",
                    pair[0].right_rank(),
                    k + 1,
                    pair[1].left_rank()
                )));
            }
        }
        let first = cores[0].left_rank();
        let last = cores[cores.len() - 1].right_rank();
        if first != last {
            return Err(Error::Shape(format!(
                "ring not closed: R_0 = {first}, R_n = {last}"
            )));
        }
        let mut ranks = Vec::with_capacity(cores.len() + 1);
        ranks.push(first);
        ranks.extend(cores.iter().map(TRCore::right_rank));
        Ok(Self { cores, ranks })
    }

    /// Builds a chain with bond ranks `[R_0 .. R_n]`, filling core `k` entry by
    /// entry (in linear order) from `fill(k)`.
    pub fn from_fn(
        dims: &[usize],
        ranks: &[usize],
        mut fill: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        check_rank_vector(dims, ranks)?;
        let cores = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let len = ranks[k] * d * ranks[k + 1];
                let data = (0..len).map(|_| fill(k)).collect();
                TRCore::from_parts(ranks[k], d, ranks[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    /// Uniform-rank convenience: every bond is `rank`.
    pub fn uniform(dims: &[usize], rank: usize, fill: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::from_fn(dims, &vec![rank; dims.len() + 1], fill)
    }

    pub fn cores(&self) -> &[TRCore] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<TRCore> {
        self.cores
    }

    pub fn core(&self, k: usize) -> &TRCore {
        &self.cores[k]
    }

    /// `[R_0, R_1, .., R_n]` with `R_0 == R_n`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(TRCore::dim).collect()
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.dims())
    }

    /// The common bond if all ranks are equal.
    pub fn uniform_rank(&self) -> Option<usize> {
        let r = self.ranks[0];
        self.ranks.iter().all(|&x| x == r).then_some(r)
    }

    /// Replaces core `k`; its bonds must match the one it replaces.
    pub fn with_core(&self, k: usize, core: TRCore) -> Result<Self> {
        let old = &self.cores[k];
        if old.tensor.dims() != core.tensor.dims() {
            return Err(Error::Shape(format!(
                "replacement core {:?} does not match {:?}",
                core.tensor.dims(),
                old.tensor.dims()
            )));
        }
        let mut out = self.clone();
        out.cores[k] = core;
        Ok(out)
    }

    pub(crate) fn replace_core(&mut self, k: usize, core: TRCore) {
        debug_assert_eq!(self.cores[k].tensor.dims(), core.tensor.dims());
        self.cores[k] = core;
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.order() {
            return Err(Error::IndexOutOfRange(format!(
                "mode {k} for a chain of {} cores",
                self.order()
            )));
        }
        Ok(())
    }

    /// Modes of the subchain for `k` in product order: `k+1, .., n-1, 0, .., k-1`.
    pub(crate) fn subchain_modes(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.order();
        (1..n).map(move |s| (k + s) % n)
    }

    /// `B^(k) = U_{k+1} .. U_n U_1 .. U_{k-1}`, of shape
    /// `R_k x (prod_{j != k} I_j) x R_{k-1}`, with the merged index running
    /// over modes `k+1, .., n, 1, .., k-1`, earliest fastest.
    pub fn subchain(&self, k: usize) -> Result<TRCore> {
        self.check_mode(k)?;
        if self.order() < 2 {
            return Err(Error::InvalidArgument(
                "a subchain needs at least two cores".into(),
            ));
        }
        let mut modes = self.subchain_modes(k);
        let first = modes.next().expect("order >= 2");
        let mut acc = self.cores[first].clone();
        for m in modes {
            acc = acc.connect(&self.cores[m])?;
        }
        Ok(acc)
    }

    /// `B^(k)(:, j, :)` computed directly as a product of per-core slices,
    /// bit-identical to slicing [`TRChain::subchain`].
    pub fn subchain_slice(&self, k: usize, j: usize) -> Result<DenseTensor> {
        self.check_mode(k)?;
        if self.order() < 2 {
            return Err(Error::InvalidArgument(
                "a subchain needs at least two cores".into(),
            ));
        }
        let width: usize = self.subchain_modes(k).map(|m| self.cores[m].dim()).product();
        if j >= width {
            return Err(Error::IndexOutOfRange(format!(
                "subchain column {j} of {width}"
            )));
        }
        let (r_out, r_in) = (self.ranks[k + 1], self.ranks[k]);
        DenseTensor::matrix(r_out, r_in, self.subchain_slice_buf(k, j))
    }

    pub(crate) fn subchain_slice_buf(&self, k: usize, mut j: usize) -> Vec<f64> {
        let mut modes = self.subchain_modes(k);
        let first = modes.next().expect("order >= 2");
        let d = self.cores[first].dim();
        let mut acc = self.cores[first].slice_buf(j % d);
        j /= d;
        let rows = self.cores[first].left_rank();
        let mut inner = self.cores[first].right_rank();
        for m in modes {
            let core = &self.cores[m];
            let d = core.dim();
            let slice = core.slice_buf(j % d);
            j /= d;
            acc = kernel::matmul(&acc, rows, inner, &slice, core.right_rank());
            inner = core.right_rank();
        }
        debug_assert_eq!(acc.len(), rows * inner);
        acc
    }

    /// One entry by the trace of the ordered slice product.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order() {
            return Err(Error::IndexOutOfRange(format!(
                "index of length {} for a chain of {} cores",
                idx.len(),
                self.order()
            )));
        }
        for (k, (&i, core)) in idx.iter().zip(&self.cores).enumerate() {
            if i >= core.dim() {
                return Err(Error::IndexOutOfRange(format!(
                    "index {i} on mode {k} with dimension {}",
                    core.dim()
                )));
            }
        }
        let mut acc = self.cores[0].slice_buf(idx[0]);
        let rows = self.ranks[0];
        let mut inner = self.ranks[1];
        for (core, &i) in self.cores.iter().zip(idx).skip(1) {
            acc = kernel::matmul(&acc, rows, inner, &core.slice_buf(i), core.right_rank());
            inner = core.right_rank();
        }
        Ok(kernel::trace(&acc, rows))
    }

    /// Connect product of every core, `U_1 U_2 .. U_n`.
    pub fn connect_all(&self) -> Result<TRCore> {
        let mut acc = self.cores[0].clone();
        for core in &self.cores[1..] {
            acc = acc.connect(core)?;
        }
        Ok(acc)
    }

    /// The full tensor `f(U_1 .. U_n)`.
    ///
    /// The chain is split in two halves whose connect products are contracted
    /// over both bonds at once, so peak memory is `R^2 (P_left + P_right)`
    /// rather than `R^2 * prod(I)`.
    pub fn full(&self) -> Result<DenseTensor> {
        let shape = self.shape()?;
        let n = self.order();
        if n == 1 {
            return self.cores[0].trace_reshape(shape.dims());
        }
        let split = self.balanced_split();
        let mut left = self.cores[0].clone();
        for core in &self.cores[1..split] {
            left = left.connect(core)?;
        }
        let mut right = self.cores[split].clone();
        for core in &self.cores[split + 1..] {
            right = right.connect(core)?;
        }
        // left(a, p, c) right(c, q, a) summed over (a, c).
        let r0 = self.ranks[0];
        let rm = self.ranks[split];
        let (pl, pr) = (left.dim(), right.dim());
        let mut out = vec![0.0; pl * pr];
        let l = left.data();
        let r = right.data();
        let mut lhs = vec![0.0; pl];
        for a in 0..r0 {
            for c in 0..rm {
                for (p, v) in lhs.iter_mut().enumerate() {
                    *v = l[a + p * r0 + c * r0 * pl];
                }
                for q in 0..pr {
                    let w = r[c + q * rm + a * rm * pr];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &x) in out[q * pl..(q + 1) * pl].iter_mut().zip(&lhs) {
                        *o += x * w;
                    }
                }
            }
        }
        DenseTensor::new(shape, out)
    }

    /// First index of the right half, chosen so both halves have similar
    /// physical size.
    fn balanced_split(&self) -> usize {
        let dims = self.dims();
        let total: f64 = dims.iter().map(|&d| (d as f64).ln()).sum();
        let mut acc = 0.0;
        for (k, &d) in dims.iter().enumerate().take(dims.len() - 1) {
            acc += (d as f64).ln();
            if acc >= total / 2.0 {
                return k + 1;
            }
        }
        dims.len() - 1
    }

    /// The chain rotated to `U_i, .., U_n, U_1, .., U_{i-1}`, which represents
    /// the cyclically permuted tensor.
    pub fn cyclic_shift(&self, i: usize) -> Result<Self> {
        self.check_mode(i)?;
        let n = self.order();
        let cores = (0..n).map(|s| self.cores[(i + s) % n].clone()).collect();
        Self::new(cores)
    }

    /// Left-to-right QR sweep leaving cores `1..n-1` with orthonormal left
    /// unfoldings; each triangular factor is absorbed into the next core.
    /// Interior bonds shrink to `min(R_{k-1} I_k, R_k)` where needed.
    pub fn left_orthogonalize(&self) -> Result<Self> {
        let n = self.order();
        let mut cores = self.cores.clone();
        for k in 0..n.saturating_sub(1) {
            let core = &cores[k];
            let (left, dim) = (core.left_rank(), core.dim());
            let (q, r) = linalg::thin_qr(&core.left_unfold())?;
            let bond = q.cols();
            cores[k] = TRCore::new(q.into_reshape(Shape::new(vec![left, dim, bond])?)?)?;
            let next = &cores[k + 1];
            let (ndim, nright) = (next.dim(), next.right_rank());
            let merged = r.matmul(&next.right_unfold())?;
            cores[k + 1] = TRCore::new(merged.into_reshape(Shape::new(vec![bond, ndim, nright])?)?)?;
        }
        Self::new(cores)
    }

    /// Parameter count. Raw: `sum R_{k-1} I_k R_k`. With `orthonormal`, the
    /// count after left-orthogonalization, where each of the `n-1` interior
    /// bonds carries an `R x R` gauge that need not be stored:
    /// `R^2 (sum I_k - n + 1)`. Only defined for uniform ranks.
    pub fn storage_params(&self, orthonormal: bool) -> Result<usize> {
        if !orthonormal {
            return Ok(self
                .cores
                .iter()
                .map(|c| c.left_rank() * c.dim() * c.right_rank())
                .sum());
        }
        let r = self.uniform_rank().ok_or_else(|| {
            Error::Unsupported(format!(
                "orthonormal storage count needs uniform ranks, got {:?}",
                self.ranks
            ))
        })?;
        let total: usize = self.dims().iter().sum();
        Ok(r * r * (total + 1 - self.order()))
    }
}

pub fn left_unfold(c: &TRCore) -> DenseTensor {
    c.left_unfold()
}

pub fn right_unfold(c: &TRCore) -> DenseTensor {
    c.right_unfold()
}

pub fn subchain(chain: &TRChain, k: usize) -> Result<TRCore> {
    chain.subchain(k)
}

pub fn subchain_slice(chain: &TRChain, k: usize, j: usize) -> Result<DenseTensor> {
    chain.subchain_slice(k, j)
}

pub fn tr_entry(chain: &TRChain, idx: &[usize]) -> Result<f64> {
    chain.entry(idx)
}

pub fn tr_full(chain: &TRChain) -> Result<DenseTensor> {
    chain.full()
}

pub fn cyclic_shift(chain: &TRChain, i: usize) -> Result<TRChain> {
    chain.cyclic_shift(i)
}

pub fn left_orthogonalize(chain: &TRChain) -> Result<TRChain> {
    chain.left_orthogonalize()
}

pub fn storage_params(chain: &TRChain, orthonormal: bool) -> Result<usize> {
    chain.storage_params(orthonormal)
}

/// Checks a bond-rank vector `[R_0 .. R_n]` against mode dims.
pub fn check_rank_vector(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("a chain needs at least one mode".into()));
    }
    if ranks.len() != dims.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} modes need {} ranks, got {}",
            dims.len(),
            dims.len() + 1,
            ranks.len()
        )));
    }
    if ranks.iter().any(|&r| r == 0) {
        return Err(Error::InvalidArgument(format!("ranks must be >= 1, got {ranks:?}")));
    }
    if ranks[0] != ranks[dims.len()] {
        return Err(Error::InvalidArgument(format!(
            "ring closure needs R_0 == R_n, got {ranks:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_chain(dims: &[usize], ranks: &[usize], seed: u64) -> TRChain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TRChain::from_fn(dims, ranks, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_core(l: usize, d: usize, r: usize, seed: u64) -> TRCore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..l * d * r).map(|_| rng.random_range(-1.0..1.0)).collect();
        TRCore::from_parts(l, d, r, data).unwrap()
    }

    fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn left_unfold_examples() {
        let c = TRCore::from_parts(1, 2, 1, vec![3.0, 5.0]).unwrap();
        let l = c.left_unfold();
        assert_eq!(l.dims(), &[2, 1]);
        assert_eq!(l.data(), &[3.0, 5.0]);

        let c = random_core(2, 1, 2, 1);
        assert_eq!(c.left_unfold(), c.slice(0).unwrap());

        let c = random_core(2, 3, 2, 2);
        let l = c.left_unfold();
        assert_eq!(l.dims(), &[6, 2]);
        for a in 0..2 {
            for i in 0..3 {
                for b in 0..2 {
                    let v = c.tensor().get(&[a, i, b]).unwrap();
                    assert_eq!(l.get(&[a + i * 2, b]).unwrap(), v);
                }
            }
        }
        // Transpose of the mode-3 unfolding.
        let m3 = c.tensor().mode_unfold(2).unwrap();
        assert_eq!(m3.transpose().unwrap(), l);
    }

    #[test]
    fn right_unfold_examples() {
        let c = TRCore::from_parts(1, 2, 1, vec![3.0, 5.0]).unwrap();
        let r = c.right_unfold();
        assert_eq!(r.dims(), &[1, 2]);
        assert_eq!(r.data(), &[3.0, 5.0]);

        let c = random_core(2, 1, 2, 3);
        assert_eq!(c.right_unfold(), c.slice(0).unwrap());

        let c = random_core(2, 3, 2, 4);
        let r = c.right_unfold();
        assert_eq!(r.dims(), &[2, 6]);
        for a in 0..2 {
            for i in 0..3 {
                for b in 0..2 {
                    let v = c.tensor().get(&[a, i, b]).unwrap();
                    assert_eq!(r.get(&[a, i + b * 3]).unwrap(), v);
                }
            }
        }
        assert_eq!(c.tensor().mode_unfold(0).unwrap(), r);
    }

    #[test]
    fn connect_scalar_bonds() {
        let u = TRCore::from_parts(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let v = TRCore::from_parts(1, 2, 1, vec![3.0, 4.0]).unwrap();
        let uv = connect_product(&u, &v).unwrap();
        assert_eq!(uv.tensor().dims(), &[1, 4, 1]);
        assert_eq!(uv.data(), &[3.0, 6.0, 4.0, 8.0]);
    }

    #[test]
    fn connect_bond_mismatch() {
        let u = random_core(2, 2, 3, 1);
        let v = random_core(2, 2, 2, 2);
        assert!(u.connect(&v).is_err());
    }

    #[test]
    fn connect_is_associative() {
        let u = random_core(2, 3, 2, 5);
        let v = random_core(2, 2, 2, 6);
        let w = random_core(2, 4, 2, 7);
        let left = u.connect(&v).unwrap().connect(&w).unwrap();
        let right = u.connect(&v.connect(&w).unwrap()).unwrap();
        assert!(rel(left.tensor(), right.tensor()) < 1e-12);
    }

    #[test]
    fn connect_matrix_case_is_vectorized_matmul() {
        // 1 x I x R times R x J x 1: vec(A B) with A = I x R, B = R x J.
        let (i, r, j) = (4, 3, 5);
        let a = random_core(1, i, r, 8);
        let b = random_core(r, j, 1, 9);
        let prod = a.connect(&b).unwrap();
        let am = DenseTensor::matrix(i, r, a.data().to_vec()).unwrap();
        let bm = DenseTensor::matrix(r, j, b.data().to_vec()).unwrap();
        for row in 0..i {
            for col in 0..j {
                let direct: f64 = (0..r)
                    .map(|k| am.get(&[row, k]).unwrap() * bm.get(&[k, col]).unwrap())
                    .sum();
                let got = prod.data()[row + col * i];
                assert!((got - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn subchain_two_cores_is_other_core() {
        let chain = random_chain(&[3, 4], &[2, 3, 2], 10);
        assert_eq!(&chain.subchain(0).unwrap(), chain.core(1));
        assert_eq!(&chain.subchain(1).unwrap(), chain.core(0));
    }

    #[test]
    fn subchain_three_cores_slice_by_slice() {
        let chain = random_chain(&[2, 3, 4], &[2, 3, 2, 2], 11);
        let b = chain.subchain(1).unwrap();
        let direct = chain.core(2).connect(chain.core(0)).unwrap();
        assert_eq!(b, direct);
        assert_eq!(b.tensor().dims(), &[2, 8, 3]);
        for i2 in 0..4 {
            for i0 in 0..2 {
                let s = chain
                    .core(2)
                    .slice(i2)
                    .unwrap()
                    .matmul(&chain.core(0).slice(i0).unwrap())
                    .unwrap();
                assert_eq!(b.slice(i2 + i0 * 4).unwrap(), s);
            }
        }
    }

    #[test]
    fn subchain_of_ones() {
        let chain = TRChain::uniform(&[2, 3, 2], 1, |_| 1.0).unwrap();
        let b = chain.subchain(0).unwrap();
        assert_eq!(b.tensor().dims(), &[1, 6, 1]);
        assert!(b.data().iter().all(|&v| v == 1.0));
        assert!(chain.subchain(3).is_err());
        let single = TRChain::uniform(&[3], 2, |_| 1.0).unwrap();
        assert!(single.subchain(0).is_err());
    }

    #[test]
    fn subchain_slice_matches_materialized() {
        let chain = random_chain(&[3, 3, 3, 3], &[2, 2, 2, 2, 2], 12);
        for k in 0..4 {
            let b = chain.subchain(k).unwrap();
            for j in 0..27 {
                // bit-equal, not merely close
                assert_eq!(chain.subchain_slice(k, j).unwrap(), b.slice(j).unwrap());
            }
            assert!(chain.subchain_slice(k, 27).is_err());
        }
    }

    #[test]
    fn subchain_slice_bond_one_and_first_column() {
        let chain = random_chain(&[2, 3, 4], &[1, 1, 1, 1], 13);
        let s = chain.subchain_slice(0, 5).unwrap();
        // j = 5 over modes (1, 2): i_1 = 2, i_2 = 1
        let expected = chain.core(1).data()[2] * chain.core(2).data()[1];
        assert_eq!(s.data(), &[expected]);

        let chain = random_chain(&[2, 3, 4], &[2, 3, 2, 2], 14);
        let s = chain.subchain_slice(0, 0).unwrap();
        let direct = chain
            .core(1)
            .slice(0)
            .unwrap()
            .matmul(&chain.core(2).slice(0).unwrap())
            .unwrap();
        assert_eq!(s, direct);
    }

    #[test]
    fn entry_of_all_ones_ring() {
        let chain = TRChain::uniform(&[3, 2], 2, |_| 1.0).unwrap();
        assert_eq!(chain.entry(&[1, 1]).unwrap(), 4.0);
        assert!(chain.entry(&[3, 0]).is_err());
        assert!(chain.entry(&[0]).is_err());
    }

    #[test]
    fn entry_of_rank_one_chain() {
        let chain = random_chain(&[2, 3, 2], &[1, 1, 1, 1], 15);
        let idx = [1, 2, 0];
        let expected = chain.core(0).data()[1] * chain.core(1).data()[2] * chain.core(2).data()[0];
        assert_eq!(chain.entry(&idx).unwrap(), expected);
    }

    /// Explicit multi-sum over every bond index.
    fn multisum_entry(chain: &TRChain, idx: &[usize]) -> f64 {
        let n = chain.order();
        let ranks = chain.ranks();
        let total: usize = ranks[1..].iter().product();
        let mut sum = 0.0;
        let mut r = vec![0usize; n];
        for _ in 0..total {
            let mut term = 1.0;
            for k in 0..n {
                let left = if k == 0 { r[n - 1] } else { r[k - 1] };
                term *= chain.core(k).tensor().get(&[left, idx[k], r[k]]).unwrap();
            }
            sum += term;
            for (slot, &bound) in r.iter_mut().zip(&ranks[1..]) {
                *slot += 1;
                if *slot < bound {
                    break;
                }
                *slot = 0;
            }
        }
        sum
    }

    #[test]
    fn trace_form_matches_multisum() {
        let chain = random_chain(&[3, 3, 3, 3], &[3, 3, 3, 3, 3], 16);
        let shape = chain.shape().unwrap();
        let a = DenseTensor::from_fn(shape.clone(), |i| chain.entry(i).unwrap());
        let b = DenseTensor::from_fn(shape, |i| multisum_entry(&chain, i));
        assert!(rel(&a, &b) < 1e-12);
    }

    #[test]
    fn full_of_single_core_is_slice_traces() {
        let chain = random_chain(&[4], &[2, 2], 17);
        let full = chain.full().unwrap();
        for i in 0..4 {
            let s = chain.core(0).slice(i).unwrap();
            let tr = s.get(&[0, 0]).unwrap() + s.get(&[1, 1]).unwrap();
            assert!((full.data()[i] - tr).abs() < 1e-15);
        }
    }

    #[test]
    fn full_matches_entries_and_connect_all() {
        for (dims, ranks, seed) in [
            (vec![2, 3, 4], vec![2, 3, 1, 2], 18),
            (vec![3, 2, 2, 3, 2], vec![2, 2, 3, 2, 2, 2], 19),
            (vec![5, 4], vec![3, 2, 3], 20),
        ] {
            let chain = random_chain(&dims, &ranks, seed);
            let full = chain.full().unwrap();
            let entries = DenseTensor::from_fn(chain.shape().unwrap(), |i| chain.entry(i).unwrap());
            assert!(rel(&full, &entries) < 1e-12);
            let literal = chain.connect_all().unwrap().trace_reshape(&dims).unwrap();
            assert!(rel(&full, &literal) < 1e-12);
        }
    }

    #[test]
    fn full_reproduces_rank_one_outer_product() {
        let a = [1.0, 2.0];
        let b = [3.0, -1.0, 0.5];
        let c = [2.0, 4.0];
        let cores = vec![
            TRCore::from_parts(1, 2, 1, a.to_vec()).unwrap(),
            TRCore::from_parts(1, 3, 1, b.to_vec()).unwrap(),
            TRCore::from_parts(1, 2, 1, c.to_vec()).unwrap(),
        ];
        let chain = TRChain::new(cores).unwrap();
        let expected = DenseTensor::from_fn(chain.shape().unwrap(), |i| a[i[0]] * b[i[1]] * c[i[2]]);
        assert_eq!(chain.full().unwrap(), expected);
    }

    #[test]
    fn tensor_train_embedding() {
        let chain = random_chain(&[3, 2, 4], &[1, 2, 3, 1], 21);
        let full = chain.full().unwrap();
        let direct = DenseTensor::from_fn(chain.shape().unwrap(), |i| {
            let m = chain
                .core(0)
                .slice(i[0])
                .unwrap()
                .matmul(&chain.core(1).slice(i[1]).unwrap())
                .unwrap()
                .matmul(&chain.core(2).slice(i[2]).unwrap())
                .unwrap();
            m.data()[0]
        });
        assert!(rel(&full, &direct) < 1e-14);
    }

    #[test]
    fn cyclic_shift_identity_and_cycle() {
        let chain = random_chain(&[2, 3, 4], &[2, 3, 1, 2], 22);
        assert_eq!(chain.cyclic_shift(0).unwrap(), chain);
        let mut c = chain.clone();
        for _ in 0..3 {
            c = c.cyclic_shift(1).unwrap();
        }
        assert_eq!(c, chain);
        let s = chain.cyclic_shift(2).unwrap();
        assert_eq!(s.ranks(), &[1, 2, 3, 1]);
        assert!(chain.cyclic_shift(3).is_err());
    }

    #[test]
    fn cyclic_shift_permutes_the_tensor() {
        let chain = random_chain(&[2, 3, 4, 2], &[2, 3, 2, 1, 2], 23);
        let full = chain.full().unwrap();
        for i in 0..4 {
            let shifted = chain.cyclic_shift(i).unwrap().full().unwrap();
            let permuted = full.permute_cyclic(i).unwrap();
            assert_eq!(shifted.dims(), permuted.dims());
            assert!(rel(&shifted, &permuted) < 1e-12);
        }
    }

    #[test]
    fn left_orthogonalize_preserves_and_orthonormalizes() {
        let chain = random_chain(&[3, 4, 2, 3], &[3, 3, 3, 3, 3], 24);
        let ortho = chain.left_orthogonalize().unwrap();
        assert!(rel(&ortho.full().unwrap(), &chain.full().unwrap()) < 1e-10);
        for k in 0..3 {
            let l = ortho.core(k).left_unfold();
            let gram = l.transpose().unwrap().matmul(&l).unwrap();
            let eye = DenseTensor::identity(gram.rows()).unwrap();
            let dev = gram.sub(&eye).unwrap().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(dev < 1e-12);
        }
        // Already orthonormal: applying it again keeps the reconstruction.
        let again = ortho.left_orthogonalize().unwrap();
        assert!(rel(&again.full().unwrap(), &chain.full().unwrap()) < 1e-10);
    }

    #[test]
    fn left_orthogonalize_shrinks_oversized_bonds() {
        // R_0 * I_1 = 2 < R_1 = 3.
        let chain = random_chain(&[2, 4, 3], &[1, 3, 3, 1], 25);
        let ortho = chain.left_orthogonalize().unwrap();
        assert_eq!(ortho.ranks()[1], 2);
        assert!(rel(&ortho.full().unwrap(), &chain.full().unwrap()) < 1e-10);
    }

    #[test]
    fn storage_counts() {
        let chain = TRChain::uniform(&[20, 20, 20, 20], 8, |_| 0.0).unwrap();
        assert_eq!(chain.storage_params(false).unwrap(), 5120);
        assert_eq!(chain.storage_params(true).unwrap(), 4928);
        let single = TRChain::uniform(&[7], 3, |_| 0.0).unwrap();
        assert_eq!(single.storage_params(false).unwrap(), 63);
        assert_eq!(single.storage_params(true).unwrap(), 63);
        let mixed = TRChain::from_fn(&[3, 3], &[1, 2, 1], |_| 0.0).unwrap();
        assert!(matches!(mixed.storage_params(true), Err(Error::Unsupported(_))));
    }

    #[test]
    fn chain_validation() {
        let a = random_core(2, 3, 3, 1);
        let b = random_core(2, 3, 2, 2);
        assert!(TRChain::new(vec![a.clone(), b]).is_err());
        let c = random_core(3, 3, 3, 3);
        assert!(TRChain::new(vec![a, c]).is_err());
        assert!(TRChain::new(vec![]).is_err());
        assert!(check_rank_vector(&[2, 2], &[1, 2]).is_err());
        assert!(check_rank_vector(&[2, 2], &[1, 0, 1]).is_err());
        assert!(check_rank_vector(&[2, 2], &[1, 2, 2]).is_err());
    }
}
