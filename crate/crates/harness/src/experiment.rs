//! Repeated, seeded completion experiments and their reports.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tensor_ring::{complete, tt_complete, Completion, DenseTensor, Ranks, SolverConfig, SubchainStrategy};

use crate::error::{HarnessError, Result};
use crate::image::{is_image_path, load_image};
use crate::io::load_tensor;
use crate::metrics::{generalization_error, mean_std, recovery_error};
use crate::reshape::apply_reshape;
use crate::sampling::{sample_mask, synthetic_tr};

pub const IMAGE_SCALING: &str = "bytes scaled to [0, 1]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    /// Random ring with standard-normal cores. Without a `seed` every repeat
    /// draws new data from its own seed.
    Synthetic {
        dims: Vec<usize>,
        rank: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// A tensor file, or a `.pgm`/`.ppm` image.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    #[default]
    Auto,
    Materialize,
    PerEntry,
}

fn default_rank() -> usize {
    1
}
fn default_sigma() -> f64 {
    tensor_ring::tra::DEFAULT_SIGMA
}
fn default_tol() -> f64 {
    tensor_ring::als::DEFAULT_TOL
}
fn default_maxiter() -> usize {
    tensor_ring::als::DEFAULT_MAXITER
}
fn default_budget() -> usize {
    tensor_ring::als::DEFAULT_SUBCHAIN_BUDGET
}
fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Explicit `[R_0 .. R_n]`; overrides `rank`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    /// Tensor train (boundary ranks 1) instead of a ring.
    #[serde(default)]
    pub tt: bool,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxiter")]
    pub maxiter: usize,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub strategy: StrategyChoice,
    #[serde(default = "default_budget")]
    pub subchain_budget: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            rank: default_rank(),
            ranks: None,
            tt: false,
            sigma: default_sigma(),
            tol: default_tol(),
            maxiter: default_maxiter(),
            ridge: 0.0,
            strategy: StrategyChoice::Auto,
            subchain_budget: default_budget(),
        }
    }
}

impl SolverSpec {
    /// Bond vector for an order-`n` problem at uniform rank `rank`.
    pub fn resolve_ranks(&self, n: usize, rank: usize) -> Result<Vec<usize>> {
        let ranks = match &self.ranks {
            Some(v) => v.clone(),
            None if self.tt => {
                let mut v = vec![rank; n + 1];
                v[0] = 1;
                v[n] = 1;
                v
            }
            None => vec![rank; n + 1],
        };
        if ranks.len() != n + 1 {
            return Err(HarnessError::InvalidArgument(format!(
                "{n} modes need {} ranks, got {ranks:?}",
                n + 1
            )));
        }
        if self.tt && (ranks[0] != 1 || ranks[n] != 1) {
            return Err(HarnessError::InvalidArgument(format!(
                "tensor-train ranks must start and end with 1, got {ranks:?}"
            )));
        }
        Ok(ranks)
    }

    pub fn config(&self, ranks: Vec<usize>, seed: u64, parallel: bool) -> SolverConfig {
        let mut cfg = SolverConfig::with_ranks(Ranks::Vector(ranks));
        cfg.tol = self.tol;
        cfg.maxiter = self.maxiter;
        cfg.ridge = self.ridge;
        cfg.tra.sigma = self.sigma;
        cfg.tra.seed = seed;
        cfg.subchain_strategy = match self.strategy {
            StrategyChoice::Auto => SubchainStrategy::Auto(self.subchain_budget),
            StrategyChoice::Materialize => SubchainStrategy::Materialize,
            StrategyChoice::PerEntry => SubchainStrategy::PerEntry,
        };
        cfg.parallel = parallel;
        cfg
    }

    /// Runs ring or train completion per `tt`.
    pub fn run(
        &self,
        x: &DenseTensor,
        mask: &tensor_ring::ObservationMask,
        cfg: &SolverConfig,
    ) -> Result<Completion> {
        Ok(if self.tt {
            tt_complete(x, mask, cfg)?
        } else {
            complete(x, mask, cfg)?
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reshape: Option<Vec<usize>>,
    pub observation_ratio: f64,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Repeat `r` uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    /// Serial execution and zeroed timings, so reruns are byte-identical.
    #[serde(default)]
    pub reproducible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub observed: usize,
    pub re: Option<f64>,
    /// Recovery error on unobserved entries only.
    pub generalization_re: Option<f64>,
    pub observed_residual: Option<f64>,
    pub sweeps: Option<usize>,
    pub converged: Option<bool>,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub ok: usize,
    pub failed: usize,
    pub re_mean: Option<f64>,
    pub re_std: Option<f64>,
    pub generalization_re_mean: Option<f64>,
    pub generalization_re_std: Option<f64>,
    pub sweeps_mean: Option<f64>,
}

impl Aggregate {
    /// Mean and sample standard deviation over the successful repeats.
    pub fn from_repeats(repeats: &[RepeatRecord]) -> Self {
        let re: Vec<f64> = repeats.iter().filter_map(|r| r.re).collect();
        let gen: Vec<f64> = repeats.iter().filter_map(|r| r.generalization_re).collect();
        let sweeps: Vec<f64> = repeats.iter().filter_map(|r| r.sweeps.map(|s| s as f64)).collect();
        let stats = |v: &[f64]| {
            if v.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(v);
                (Some(m), Some(s))
            }
        };
        let (re_mean, re_std) = stats(&re);
        let (generalization_re_mean, generalization_re_std) = stats(&gen);
        let failed = repeats.iter().filter(|r| r.error.is_some()).count();
        Self {
            ok: repeats.len() - failed,
            failed,
            re_mean,
            re_std,
            generalization_re_mean,
            generalization_re_std,
            sweeps_mean: stats(&sweeps).0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub rank: usize,
    pub ranks: Vec<usize>,
    pub ratio: f64,
    pub repeats: Vec<RepeatRecord>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub spec: ExperimentSpec,
    /// Dims the solver saw, after any reshape.
    pub dims: Vec<usize>,
    pub value_scaling: Option<String>,
    pub points: Vec<PointRecord>,
}

/// Data with its provenance note.
pub struct Loaded {
    pub tensor: DenseTensor,
    pub value_scaling: Option<String>,
}

/// Reads a tensor file or an image, by extension.
pub fn load_input(path: &std::path::Path) -> Result<Loaded> {
    if is_image_path(path) {
        Ok(Loaded {
            tensor: load_image(path)?,
            value_scaling: Some(IMAGE_SCALING.into()),
        })
    } else {
        Ok(Loaded {
            tensor: load_tensor(path)?,
            value_scaling: None,
        })
    }
}

fn load_source(spec: &ExperimentSpec, seed: u64) -> Result<Loaded> {
    let mut loaded = match &spec.source {
        Source::Synthetic { dims, rank, seed: fixed } => Loaded {
            tensor: synthetic_tr(dims, *rank, fixed.unwrap_or(seed))?.0,
            value_scaling: None,
        },
        Source::File { path } => load_input(path)?,
    };
    if let Some(dims) = &spec.reshape {
        loaded.tensor = apply_reshape(&loaded.tensor, dims)?;
    }
    Ok(loaded)
}

fn validate(spec: &ExperimentSpec) -> Result<()> {
    if spec.repeats == 0 {
        return Err(HarnessError::InvalidArgument("repeats must be >= 1".into()));
    }
    let ratios = spec.sweep.as_ref().map(|s| s.ratios.clone()).unwrap_or_default();
    for r in ratios.iter().chain([&spec.observation_ratio]) {
        if !(*r > 0.0 && *r <= 1.0) {
            return Err(HarnessError::InvalidArgument(format!(
                "observation ratio must be in (0, 1], got {r}"
            )));
        }
    }
    Ok(())
}

fn run_repeat(
    spec: &ExperimentSpec,
    truth: &DenseTensor,
    ranks: &[usize],
    ratio: f64,
    repeat: usize,
    seed: u64,
) -> Result<RepeatRecord> {
    let start = Instant::now();
    let mask = sample_mask(truth.shape(), ratio, seed)?;
    let cfg = spec.solver.config(ranks.to_vec(), seed, !spec.reproducible);
    let mut record = RepeatRecord {
        repeat,
        seed,
        observed: mask.len(),
        re: None,
        generalization_re: None,
        observed_residual: None,
        sweeps: None,
        converged: None,
        wall_time: 0.0,
        error: None,
    };
    match spec.solver.run(truth, &mask, &cfg) {
        Ok(out) => {
            record.re = Some(recovery_error(&out.estimate, truth)?);
            record.generalization_re = generalization_error(&out.estimate, truth, &mask)?;
            record.observed_residual = Some(mask.masked_distance(&out.estimate, truth)?);
            record.sweeps = Some(out.report.sweeps_run);
            record.converged = Some(out.report.converged);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    if !spec.reproducible {
        record.wall_time = start.elapsed().as_secs_f64();
    }
    Ok(record)
}

/// Runs every sweep point `repeats` times. Failures of individual solver runs
/// are recorded in the point; data and argument errors abort.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    validate(spec)?;
    let sweep = spec.sweep.clone().unwrap_or_default();
    let ranks = if sweep.ranks.is_empty() {
        vec![spec.solver.rank]
    } else {
        sweep.ranks.clone()
    };
    let ratios = if sweep.ratios.is_empty() {
        vec![spec.observation_ratio]
    } else {
        sweep.ratios.clone()
    };
    let seeds: Vec<u64> = (0..spec.repeats).map(|r| spec.seed.wrapping_add(r as u64)).collect();

    // Data per repeat, shared across sweep points.
    let data: Vec<Loaded> = match &spec.source {
        Source::Synthetic { seed: None, .. } => {
            seeds.iter().map(|&s| load_source(spec, s)).collect::<Result<_>>()?
        }
        _ => vec![load_source(spec, spec.seed)?],
    };
    let dims = data[0].tensor.dims().to_vec();
    let value_scaling = data[0].value_scaling.clone();

    let mut points = Vec::new();
    for &rank in &ranks {
        let bond = spec.solver.resolve_ranks(dims.len(), rank)?;
        for &ratio in &ratios {
            let job = |repeat: usize| {
                let truth = &data[repeat.min(data.len() - 1)].tensor;
                run_repeat(spec, truth, &bond, ratio, repeat, seeds[repeat])
            };
            let repeats: Vec<RepeatRecord> = if spec.reproducible {
                (0..spec.repeats).map(job).collect::<Result<_>>()?
            } else {
                (0..spec.repeats).into_par_iter().map(job).collect::<Result<_>>()?
            };
            points.push(PointRecord {
                rank,
                ranks: bond.clone(),
                ratio,
                aggregate: Aggregate::from_repeats(&repeats),
                repeats,
            });
        }
    }
    Ok(ExperimentRecord {
        spec: spec.clone(),
        dims,
        value_scaling,
        points,
    })
}

/// One row per sweep point.
pub fn write_points_csv(w: impl Write, record: &ExperimentRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rank", "ratio", "ok", "failed", "re_mean", "re_std", "gen_re_mean", "gen_re_std", "sweeps_mean",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for p in &record.points {
        let a = &p.aggregate;
        out.write_record([
            p.rank.to_string(),
            p.ratio.to_string(),
            a.ok.to_string(),
            a.failed.to_string(),
            opt(a.re_mean),
            opt(a.re_std),
            opt(a.generalization_re_mean),
            opt(a.generalization_re_std),
            a.sweeps_mean.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per repeat of every point.
pub fn write_repeats_csv(w: impl Write, record: &ExperimentRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "rank", "ratio", "repeat", "seed", "observed", "re", "gen_re", "sweeps", "converged", "wall_time", "error",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for p in &record.points {
        for r in &p.repeats {
            out.write_record([
                p.rank.to_string(),
                p.ratio.to_string(),
                r.repeat.to_string(),
                r.seed.to_string(),
                r.observed.to_string(),
                opt(r.re),
                opt(r.generalization_re),
                r.sweeps.map(|s| s.to_string()).unwrap_or_default(),
                r.converged.map(|c| c.to_string()).unwrap_or_default(),
                r.wall_time.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
