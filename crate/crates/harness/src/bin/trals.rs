use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tensor_ring::SolverReport;
use tr_harness::experiment::{load_input, write_points_csv, write_repeats_csv, StrategyChoice};
use tr_harness::image::is_image_path;
use tr_harness::reshape::apply_reshape;
use tr_harness::{
    generalization_error, recovery_error, reshape_plan, run_experiment, sample_mask, save_chain,
    save_image, save_tensor, synthetic_tr, ExperimentSpec, HarnessError, Result, SolverSpec,
};

#[derive(Parser)]
#[command(name = "trals", version, about = "Tensor ring completion by alternating least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hide a random fraction of a tensor or image and complete it.
    Complete(CompleteArgs),
    /// Write a random tensor ring as a tensor file.
    Synth(SynthArgs),
    /// Run an experiment described by a JSON spec.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Auto,
    Materialize,
    Perentry,
}

#[derive(Args)]
struct CompleteArgs {
    /// Tensor file, or a binary .pgm/.ppm image.
    #[arg(long)]
    input: PathBuf,
    /// Fraction of entries observed, in (0, 1].
    #[arg(long)]
    ratio: f64,
    #[arg(long)]
    rank: usize,
    /// Explicit bond ranks R0,..,Rn.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Tensor train: boundary ranks fixed to 1.
    #[arg(long)]
    tt: bool,
    /// Explicit dims to reshape the input to before completion.
    #[arg(long, value_delimiter = ',', conflicts_with = "reshape_order")]
    reshape: Option<Vec<usize>>,
    /// Factorize modes automatically to reach this order.
    #[arg(long)]
    reshape_order: Option<usize>,
    #[arg(long, default_value_t = tensor_ring::tra::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = tensor_ring::als::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = tensor_ring::als::DEFAULT_MAXITER)]
    maxiter: usize,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Strategy::Auto)]
    strategy: Strategy,
    /// Element budget for materializing subchains under `auto`.
    #[arg(long, default_value_t = tensor_ring::als::DEFAULT_SUBCHAIN_BUDGET)]
    subchain_budget: usize,
    /// Single-threaded with zeroed timings; reruns give identical files.
    #[arg(long)]
    reproducible: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    true_rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the generating chain.
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Directory for record.json, points.csv and repeats.csv; without it the
    /// record is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CompletionRecord {
    input: PathBuf,
    input_dims: Vec<usize>,
    dims: Vec<usize>,
    value_scaling: Option<String>,
    ratio: f64,
    observed: usize,
    seed: u64,
    reproducible: bool,
    solver: SolverSpec,
    ranks: Vec<usize>,
    re: f64,
    generalization_re: Option<f64>,
    observed_residual: f64,
    param_count: usize,
    report: SolverReport,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run_complete(args: CompleteArgs) -> Result<()> {
    let loaded = load_input(&args.input)?;
    let original = loaded.tensor;
    let dims = match (&args.reshape, args.reshape_order) {
        (Some(d), _) => d.clone(),
        (None, Some(k)) => reshape_plan(original.dims(), k)?,
        (None, None) => original.dims().to_vec(),
    };
    let x = apply_reshape(&original, &dims)?;

    let solver = SolverSpec {
        rank: args.rank,
        ranks: args.ranks.clone(),
        tt: args.tt,
        sigma: args.sigma,
        tol: args.tol,
        maxiter: args.maxiter,
        ridge: args.ridge,
        strategy: match args.strategy {
            Strategy::Auto => StrategyChoice::Auto,
            Strategy::Materialize => StrategyChoice::Materialize,
            Strategy::Perentry => StrategyChoice::PerEntry,
        },
        subchain_budget: args.subchain_budget,
    };
    let ranks = solver.resolve_ranks(dims.len(), args.rank)?;
    let mask = sample_mask(x.shape(), args.ratio, args.seed)?;
    let cfg = solver.config(ranks.clone(), args.seed, !args.reproducible);
    let mut out = solver.run(&x, &mask, &cfg)?;
    if args.reproducible {
        out.report.wall_time = 0.0;
    }

    let estimate = apply_reshape(&out.estimate, original.dims())?;
    let record = CompletionRecord {
        input: args.input.clone(),
        input_dims: original.dims().to_vec(),
        dims,
        value_scaling: loaded.value_scaling,
        ratio: args.ratio,
        observed: mask.len(),
        seed: args.seed,
        reproducible: args.reproducible,
        re: recovery_error(&estimate, &original)?,
        generalization_re: generalization_error(&out.estimate, &x, &mask)?,
        observed_residual: mask.masked_distance(&out.estimate, &x)?,
        param_count: out.report.param_count,
        solver,
        ranks,
        report: out.report.clone(),
    };

    fs::create_dir_all(&args.out)?;
    save_tensor(args.out.join("estimate.trt"), &estimate)?;
    save_chain(args.out.join("chain.trc"), &out.chain)?;
    if is_image_path(&args.input) {
        let name = if estimate.order() == 2 { "estimate.pgm" } else { "estimate.ppm" };
        save_image(&estimate, args.out.join(name))?;
    }
    write_json(&args.out.join("report.json"), &record)?;

    let mut history = csv::Writer::from_path(args.out.join("history.csv"))?;
    history.write_record(["sweep", "un_delta", "observed_residual", "ls_flops"])?;
    let n = out.chain.order();
    for s in 0..out.report.sweeps_run {
        history.write_record([
            (s + 1).to_string(),
            format!("{:e}", out.report.un_delta_history[s]),
            format!("{:e}", out.report.observed_residual_history[(s + 1) * n - 1]),
            out.report.ls_flops_history[s].to_string(),
        ])?;
    }
    history.flush()?;
    println!(
        "re {:.6e}  sweeps {}  converged {}",
        record.re, out.report.sweeps_run, out.report.converged
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    if args.true_rank == 0 {
        return Err(HarnessError::InvalidArgument("--true-rank must be >= 1".into()));
    }
    let (x, chain) = synthetic_tr(&args.dims, args.true_rank, args.seed)?;
    save_tensor(&args.out, &x)?;
    if let Some(path) = &args.chain {
        save_chain(path, &chain)?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)?;
    let spec: ExperimentSpec = serde_json::from_str(&text)?;
    let record = run_experiment(&spec)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_json(&dir.join("record.json"), &record)?;
            write_points_csv(fs::File::create(dir.join("points.csv"))?, &record)?;
            write_repeats_csv(fs::File::create(dir.join("repeats.csv"))?, &record)?;
            write_points_csv(std::io::stdout().lock(), &record)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&record)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(args) => run_complete(args),
        Command::Synth(args) => run_synth(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
