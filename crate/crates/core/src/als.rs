//! Completion by alternating least squares over the ring cores.
//!
//! With every core but `U_k` fixed, the observed entries with mode-`k` index
//! `i` depend only on the slice `Z = U_k(:, i, :)` through
//! `x = tr(Z B_j) = vec(B_j^T)^T vec(Z)`, where `B_j` is column `j` of the
//! subchain `B^(k)`. Each slice is therefore an independent linear least
//! squares problem over its own observations.
//!
//! Observation `l = a + i * L + c * L * I_k` (`L` the product of the dims
//! before `k`) maps to subchain column `j = c + a * prod_{m > k} I_m`; no
//! permuted copy of the data is ever built.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg::lstsq_raw;
use crate::model::{check_rank_vector, TRChain, TRCore};
use crate::tensor::{DenseTensor, ObservationMask};
use crate::tra::{tra_init_ranks, TraConfig};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAXITER: usize = 300;
pub const DEFAULT_SUBCHAIN_BUDGET: usize = 50_000_000;

/// How `B^(k)` slices are produced during a core update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubchainStrategy {
    /// Build the whole subchain once per core update.
    Materialize,
    /// Multiply the slice chain separately for every observation.
    PerEntry,
    /// Materialize when the subchain has at most this many elements.
    Auto(usize),
}

impl Default for SubchainStrategy {
    fn default() -> Self {
        Self::Auto(DEFAULT_SUBCHAIN_BUDGET)
    }
}

impl SubchainStrategy {
    fn materialize(self, elements: usize) -> bool {
        match self {
            Self::Materialize => true,
            Self::PerEntry => false,
            Self::Auto(budget) => elements <= budget,
        }
    }
}

/// Bond ranks: one value for every bond, or the explicit `[R_0 .. R_n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ranks {
    Uniform(usize),
    Vector(Vec<usize>),
}

impl Ranks {
    pub fn resolve(&self, order: usize) -> Vec<usize> {
        match self {
            Self::Uniform(r) => vec![*r; order + 1],
            Self::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub ranks: Ranks,
    /// Stop once the relative change of the last core is at most this.
    pub tol: f64,
    pub maxiter: usize,
    /// Initializer noise and seed; its `rank` is ignored in favour of `ranks`.
    pub tra: TraConfig,
    pub ridge: f64,
    pub subchain_strategy: SubchainStrategy,
    /// Solve the slices of a core on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self::with_ranks(Ranks::Uniform(rank))
    }

    pub fn with_ranks(ranks: Ranks) -> Self {
        let tra_rank = match &ranks {
            Ranks::Uniform(r) => *r,
            Ranks::Vector(v) => v.iter().copied().max().unwrap_or(1),
        };
        Self {
            ranks,
            tol: DEFAULT_TOL,
            maxiter: DEFAULT_MAXITER,
            tra: TraConfig::new(tra_rank),
            ridge: 0.0,
            subchain_strategy: SubchainStrategy::default(),
            parallel: true,
        }
    }

    /// Tensor-train ranks `[1, R_1, .., R_{n-1}, 1]`.
    pub fn tensor_train(inner: &[usize]) -> Self {
        let mut v = Vec::with_capacity(inner.len() + 2);
        v.push(1);
        v.extend_from_slice(inner);
        v.push(1);
        Self::with_ranks(Ranks::Vector(v))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tra.seed = seed;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.tra.sigma = sigma;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.maxiter == 0 {
            return Err(Error::InvalidArgument("maxiter must be >= 1".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub sweeps_run: usize,
    /// `||U_n^new - U_n^old||_F / ||U_n^old||_F` after each sweep.
    pub un_delta_history: Vec<f64>,
    /// Observed-entry residual after each core update (`n` per sweep).
    pub observed_residual_history: Vec<f64>,
    /// Observed-entry residual of the initial chain.
    pub initial_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
    pub param_count: usize,
    /// Least-squares work per sweep, counted as `m p^2` per slice system.
    pub ls_flops_history: Vec<u64>,
}

/// Output of [`complete`].
#[derive(Debug, Clone)]
pub struct Completion {
    pub estimate: DenseTensor,
    pub chain: TRChain,
    pub report: SolverReport,
}

/// Observations of one mode, bucketed by the mode index:
/// `rows[i]` holds `(subchain column, value)` pairs.
#[derive(Debug, Clone)]
struct ModeRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl ModeRows {
    fn new(dims: &[usize], k: usize, mask: &ObservationMask, x: &DenseTensor) -> Self {
        let before: usize = dims[..k].iter().product();
        let after: usize = dims[k + 1..].iter().product();
        let dk = dims[k];
        let mut rows = vec![Vec::new(); dk];
        for &l in mask.indices() {
            let a = l % before;
            let i = (l / before) % dk;
            let c = l / (before * dk);
            rows[i].push((c + a * after, x.data()[l]));
        }
        Self { rows }
    }
}

/// The `B^(k)` slices for one core update.
enum Slices<'a> {
    Materialized { core: TRCore },
    PerEntry { chain: &'a TRChain },
}

impl<'a> Slices<'a> {
    fn new(chain: &'a TRChain, k: usize, strategy: SubchainStrategy) -> Result<Self> {
        let width: usize = chain.subchain_modes(k).map(|m| chain.core(m).dim()).product();
        let elements = chain.ranks()[k] * chain.ranks()[k + 1] * width;
        if strategy.materialize(elements) {
            Ok(Self::Materialized { core: chain.subchain(k)? })
        } else {
            Ok(Self::PerEntry { chain })
        }
    }

    /// Writes `vec(B_j^T)` into design row `row` of a column-major `m x p` matrix.
    fn fill_row(&self, k: usize, j: usize, out: &mut [f64], m: usize, row: usize, rl: usize, rr: usize) {
        match self {
            Self::Materialized { core } => {
                let w = core.dim();
                let d = core.data();
                for a in 0..rl {
                    for b in 0..rr {
                        out[row + (a + b * rl) * m] = d[b + j * rr + a * rr * w];
                    }
                }
            }
            Self::PerEntry { chain } => {
                let s = chain.subchain_slice_buf(k, j);
                for a in 0..rl {
                    for b in 0..rr {
                        out[row + (a + b * rl) * m] = s[b + a * rr];
                    }
                }
            }
        }
    }
}

fn assemble(slices: &Slices<'_>, k: usize, obs: &[(usize, f64)], rl: usize, rr: usize) -> (Vec<f64>, Vec<f64>) {
    let m = obs.len();
    let p = rl * rr;
    let mut a = vec![0.0; m * p];
    let mut b = Vec::with_capacity(m);
    for (row, &(j, y)) in obs.iter().enumerate() {
        slices.fill_row(k, j, &mut a, m, row, rl, rr);
        b.push(y);
    }
    (a, b)
}

fn check_problem(chain: &TRChain, k: usize, mask: &ObservationMask, x: &DenseTensor) -> Result<()> {
    mask.check_shape(x)?;
    if chain.dims() != x.dims() {
        return Err(Error::Shape(format!(
            "chain dims {:?} do not match data {:?}",
            chain.dims(),
            x.dims()
        )));
    }
    if k >= chain.order() {
        return Err(Error::IndexOutOfRange(format!(
            "mode {k} for a chain of {} cores",
            chain.order()
        )));
    }
    if chain.order() < 2 {
        return Err(Error::InvalidArgument("completion needs order >= 2".into()));
    }
    Ok(())
}

/// Design matrix (`|Omega_i| x R_{k-1} R_k`) and right-hand side of the slice
/// problem for row `i` of mode `k`. Column `a + b R_{k-1}` of the design
/// multiplies `Z(a, b)`.
pub fn build_rows(
    chain: &TRChain,
    k: usize,
    mask: &ObservationMask,
    x: &DenseTensor,
    i: usize,
) -> Result<(DenseTensor, Vec<f64>)> {
    check_problem(chain, k, mask, x)?;
    let dims = chain.dims();
    if i >= dims[k] {
        return Err(Error::IndexOutOfRange(format!(
            "row {i} of mode {k} with dimension {}",
            dims[k]
        )));
    }
    let rows = ModeRows::new(&dims, k, mask, x);
    let slices = Slices::PerEntry { chain };
    let (rl, rr) = (chain.ranks()[k], chain.ranks()[k + 1]);
    let obs = &rows.rows[i];
    let (a, b) = assemble(&slices, k, obs, rl, rr);
    let design = DenseTensor::from_dims(vec![obs.len(), rl * rr], a)?;
    Ok((design, b))
}

struct UpdateStats {
    residual_sq: f64,
    flops: u64,
}

fn update_in_place(chain: &mut TRChain, k: usize, rows: &ModeRows, cfg: &SolverConfig) -> Result<UpdateStats> {
    let (rl, rr) = (chain.ranks()[k], chain.ranks()[k + 1]);
    let p = rl * rr;
    let solve = |slices: &Slices<'_>, obs: &Vec<(usize, f64)>| -> Result<Option<(Vec<f64>, f64)>> {
        if obs.is_empty() {
            return Ok(None);
        }
        let (a, b) = assemble(slices, k, obs, rl, rr);
        let m = obs.len();
        let z = lstsq_raw(&a, m, p, &b, cfg.ridge)?;
        let fit = kernel::matmul(&a, m, p, &z, 1);
        let res: f64 = fit.iter().zip(&b).map(|(f, y)| (f - y) * (f - y)).sum();
        Ok(Some((z, res)))
    };
    let solved: Vec<Result<Option<(Vec<f64>, f64)>>> = {
        let slices = Slices::new(chain, k, cfg.subchain_strategy)?;
        if cfg.parallel {
            rows.rows.par_iter().map(|obs| solve(&slices, obs)).collect()
        } else {
            rows.rows.iter().map(|obs| solve(&slices, obs)).collect()
        }
    };
    let mut core = chain.core(k).clone();
    let mut stats = UpdateStats {
        residual_sq: 0.0,
        flops: 0,
    };
    for (i, (result, obs)) in solved.into_iter().zip(&rows.rows).enumerate() {
        if let Some((z, res)) = result? {
            core.set_slice(i, &z);
            stats.residual_sq += res;
            stats.flops += (obs.len() * p * p) as u64;
        }
    }
    if !core.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("core {k} became non-finite")));
    }
    chain.replace_core(k, core);
    Ok(stats)
}

/// One exact least-squares update of core `k`; slices without observations
/// keep their current values.
pub fn update_core(
    chain: &TRChain,
    k: usize,
    mask: &ObservationMask,
    x: &DenseTensor,
    cfg: &SolverConfig,
) -> Result<TRChain> {
    check_problem(chain, k, mask, x)?;
    let rows = ModeRows::new(&chain.dims(), k, mask, x);
    let mut out = chain.clone();
    update_in_place(&mut out, k, &rows, cfg)?;
    Ok(out)
}

/// `||P_Omega o (f(chain) - x)||_F`, evaluated entry by entry.
pub fn observed_residual(chain: &TRChain, mask: &ObservationMask, x: &DenseTensor) -> Result<f64> {
    mask.check_shape(x)?;
    let shape = mask.shape();
    let mut sum = 0.0;
    for &l in mask.indices() {
        let d = chain.entry(&shape.multi_index(l)?)? - x.data()[l];
        sum += d * d;
    }
    Ok(sum.sqrt())
}

/// The same objective written as the sum of slice problems for mode `k`,
/// `sum_i ||A_i vec(U_k(:, i, :)) - b_i||^2`, square-rooted.
pub fn sliced_residual(chain: &TRChain, k: usize, mask: &ObservationMask, x: &DenseTensor) -> Result<f64> {
    check_problem(chain, k, mask, x)?;
    let rows = ModeRows::new(&chain.dims(), k, mask, x);
    let slices = Slices::PerEntry { chain };
    let (rl, rr) = (chain.ranks()[k], chain.ranks()[k + 1]);
    let mut sum = 0.0;
    for (i, obs) in rows.rows.iter().enumerate() {
        if obs.is_empty() {
            continue;
        }
        let (a, b) = assemble(&slices, k, obs, rl, rr);
        let z = chain.core(k).slice_buf(i);
        let fit = kernel::matmul(&a, obs.len(), rl * rr, &z, 1);
        sum += fit.iter().zip(&b).map(|(f, y)| (f - y) * (f - y)).sum::<f64>();
    }
    Ok(sum.sqrt())
}

fn relative_change(new: &TRCore, old: &TRCore) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (a, b) in new.data().iter().zip(old.data()) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    if base == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (diff / base).sqrt()
    }
}

/// Sweeps from a given starting chain until the last core settles.
pub fn complete_from(
    chain: TRChain,
    x: &DenseTensor,
    mask: &ObservationMask,
    cfg: &SolverConfig,
) -> Result<Completion> {
    let start = Instant::now();
    cfg.validate()?;
    check_problem(&chain, 0, mask, x)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if mask.indices().iter().any(|&l| !x.data()[l].is_finite()) {
        return Err(Error::NonFinite("observed data"));
    }
    let n = chain.order();
    let dims = chain.dims();
    let rows: Vec<ModeRows> = (0..n).map(|k| ModeRows::new(&dims, k, mask, x)).collect();

    let mut chain = chain;
    let mut report = SolverReport {
        sweeps_run: 0,
        un_delta_history: Vec::new(),
        observed_residual_history: Vec::new(),
        initial_residual: observed_residual(&chain, mask, x)?,
        converged: false,
        wall_time: 0.0,
        param_count: chain.storage_params(false)?,
        ls_flops_history: Vec::new(),
    };
    for _ in 0..cfg.maxiter {
        let previous_last = chain.core(n - 1).clone();
        let mut flops = 0;
        for (k, mode_rows) in rows.iter().enumerate() {
            let stats = update_in_place(&mut chain, k, mode_rows, cfg)?;
            report.observed_residual_history.push(stats.residual_sq.sqrt());
            flops += stats.flops;
        }
        report.sweeps_run += 1;
        report.ls_flops_history.push(flops);
        let delta = relative_change(chain.core(n - 1), &previous_last);
        report.un_delta_history.push(delta);
        if delta <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    let estimate = chain.full()?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(Completion {
        estimate,
        chain,
        report,
    })
}

/// Ring completion: initialize from the zero-filled data, then sweep.
pub fn complete(x: &DenseTensor, mask: &ObservationMask, cfg: &SolverConfig) -> Result<Completion> {
    cfg.validate()?;
    mask.check_shape(x)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if mask.indices().iter().any(|&l| !x.data()[l].is_finite()) {
        return Err(Error::NonFinite("observed data"));
    }
    let ranks = cfg.ranks.resolve(x.order());
    check_rank_vector(x.dims(), &ranks)?;
    let filled = mask.zero_fill(x)?;
    let chain = tra_init_ranks(&filled, &ranks, cfg.tra.sigma, cfg.tra.seed)?;
    complete_from(chain, x, mask, cfg)
}

/// Tensor-train completion: [`complete`] with boundary ranks fixed to one.
pub fn tt_complete(x: &DenseTensor, mask: &ObservationMask, cfg: &SolverConfig) -> Result<Completion> {
    let ranks = cfg.ranks.resolve(x.order());
    if ranks.first() != Some(&1) || ranks.last() != Some(&1) {
        return Err(Error::InvalidArgument(format!(
            "tensor-train ranks must start and end with 1, got {ranks:?}"
        )));
    }
    complete(x, mask, cfg)
}
