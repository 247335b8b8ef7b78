//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p tr-harness --test acceptance`. The exit status is nonzero on
//! a failed criterion only when `ACCEPTANCE_STRICT=1` is set.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_ring::{
    complete, tra_init, tt_complete, update_core, DenseTensor, ObservationMask, Ranks, Shape,
    SolverConfig, TRChain, TraConfig,
};
use tr_harness::experiment::{Source, Sweep};
use tr_harness::metrics::median;
use tr_harness::{recovery_error, run_experiment, sample_mask, synthetic_tr, ExperimentSpec, SolverSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Oracles, written against the definitions rather than the library paths.

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

fn random_chain(rng: &mut ChaCha8Rng, dims: &[usize], ranks: &[usize]) -> TRChain {
    TRChain::from_fn(dims, ranks, |_| uniform(rng)).unwrap()
}

fn random_ring_shape(rng: &mut ChaCha8Rng, max_n: usize, max_i: usize, max_r: usize) -> (Vec<usize>, Vec<usize>) {
    let n = rng.random_range(1..=max_n);
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_i)).collect();
    let mut ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_r)).collect();
    ranks.push(ranks[0]);
    (dims, ranks)
}

fn core_entry(chain: &TRChain, k: usize, a: usize, i: usize, b: usize) -> f64 {
    let c = chain.core(k);
    let (l, d) = (c.left_rank(), c.dim());
    c.data()[a + i * l + b * l * d]
}

/// Entry as the explicit sum over all bond indices.
fn multisum_entry(chain: &TRChain, idx: &[usize]) -> f64 {
    let n = chain.order();
    let ranks = chain.ranks();
    let mut r = vec![0usize; n];
    let mut total = 0.0;
    'outer: loop {
        let mut term = 1.0;
        for k in 0..n {
            term *= core_entry(chain, k, r[(k + n - 1) % n], idx[k], r[k]);
        }
        total += term;
        for k in 0..n {
            r[k] += 1;
            if r[k] < ranks[k + 1] {
                continue 'outer;
            }
            r[k] = 0;
        }
        return total;
    }
}

fn linear(dims: &[usize], idx: &[usize]) -> usize {
    let mut l = 0;
    let mut stride = 1;
    for (&i, &d) in idx.iter().zip(dims) {
        l += i * stride;
        stride *= d;
    }
    l
}

fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dims.len()];
    let total: usize = dims.iter().product();
    for _ in 0..total {
        f(&idx);
        for (slot, &d) in idx.iter_mut().zip(dims) {
            *slot += 1;
            if *slot < d {
                break;
            }
            *slot = 0;
        }
    }
}

/// Cyclic permutation bringing mode `k` first, by explicit index mapping.
fn permute_oracle(x: &DenseTensor, k: usize) -> DenseTensor {
    let dims = x.dims().to_vec();
    let n = dims.len();
    let new_dims: Vec<usize> = (0..n).map(|s| dims[(k + s) % n]).collect();
    let mut out = vec![0.0; x.len()];
    for_each_index(&dims, |idx| {
        let moved: Vec<usize> = (0..n).map(|s| idx[(k + s) % n]).collect();
        out[linear(&new_dims, &moved)] = x.data()[linear(&dims, idx)];
    });
    DenseTensor::from_dims(new_dims, out).unwrap()
}

/// `||P o (a - b)||_F` with `P` a 0/1 tensor.
fn masked_gap(p: &DenseTensor, a: &DenseTensor, b: &DenseTensor) -> f64 {
    p.data()
        .iter()
        .zip(a.data().iter().zip(b.data()))
        .map(|(&w, (&x, &y))| w * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn random_mask(rng: &mut ChaCha8Rng, shape: &Shape, ratio: f64) -> ObservationMask {
    let count = ((shape.len() as f64 * ratio).round() as usize).clamp(1, shape.len());
    ObservationMask::from_indices(shape.clone(), sample(rng, shape.len(), count).into_vec()).unwrap()
}

fn rel_gap(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let scale = b.frobenius_norm();
    let gap = a.sub(b).unwrap().frobenius_norm();
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}

// ---------------------------------------------------------------------------

struct RecoveryRuns {
    tr: Vec<(f64, usize, f64)>,
    tt: Vec<f64>,
}

fn recovery_runs() -> RecoveryRuns {
    let dims = [12, 12, 12, 12];
    let mut tr = Vec::new();
    let mut tt = Vec::new();
    for seed in 0..5u64 {
        let (x, _) = synthetic_tr(&dims, 3, seed).unwrap();
        let mask = sample_mask(x.shape(), 0.4, seed).unwrap();

        let mut cfg = SolverConfig::new(3).with_seed(seed);
        cfg.parallel = false;
        let start = Instant::now();
        let out = complete(&x, &mask, &cfg).unwrap();
        let secs = start.elapsed().as_secs_f64();
        tr.push((recovery_error(&out.estimate, &x).unwrap(), out.report.sweeps_run, secs));

        let mut cfg = SolverConfig::with_ranks(Ranks::Vector(vec![1, 3, 3, 3, 1])).with_seed(seed);
        cfg.parallel = false;
        let out = tt_complete(&x, &mask, &cfg).unwrap();
        tt.push(recovery_error(&out.estimate, &x).unwrap());
    }
    RecoveryRuns { tr, tt }
}

fn criterion_1(runs: &RecoveryRuns) -> Outcome {
    let re: Vec<f64> = runs.tr.iter().map(|r| r.0).collect();
    let med = median(&re);
    let worst = re.iter().cloned().fold(0.0, f64::max);
    let sweeps = runs.tr.iter().map(|r| r.1).max().unwrap();
    let secs = runs.tr.iter().map(|r| r.2).fold(0.0, f64::max);
    outcome(
        med <= 1e-6 && worst <= 1e-3 && sweeps <= 300 && secs <= 180.0,
        format!("12^4 rank 3, 40% observed, 5 seeds: median RE {med:.2e}, max RE {worst:.2e}, max sweeps {sweeps}, max time {secs:.1}s"),
    )
}

fn criterion_2(runs: &RecoveryRuns) -> Outcome {
    let tt_min = runs.tt.iter().cloned().fold(f64::INFINITY, f64::min);
    let tr_ok = criterion_1(runs).pass;
    outcome(
        tt_min >= 0.05 && tr_ok,
        format!(
            "train ranks [1,3,3,3,1] on the same data: min RE {tt_min:.3} (per seed {}); ring meets criterion 1: {tr_ok}",
            runs.tt.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_a, mut worst_b, mut worst_c, mut worst_d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        // (a) trace form against the bond multi-sum, over every entry.
        let (dims, ranks) = random_ring_shape(&mut rng, 5, 4, 3);
        let chain = random_chain(&mut rng, &dims, &ranks);
        let (mut diff, mut norm) = (0.0, 0.0);
        for_each_index(&dims, |idx| {
            let oracle = multisum_entry(&chain, idx);
            let got = chain.entry(idx).unwrap();
            diff += (got - oracle) * (got - oracle);
            norm += oracle * oracle;
        });
        let full = chain.full().unwrap();
        let oracle_full = DenseTensor::from_fn(full.shape().clone(), |i| multisum_entry(&chain, i));
        worst_a = worst_a
            .max(if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() })
            .max(rel_gap(&full, &oracle_full));
    }
    for _ in 0..200 {
        // (b) rotating the cores permutes the modes.
        let (dims, ranks) = random_ring_shape(&mut rng, 5, 4, 3);
        let chain = random_chain(&mut rng, &dims, &ranks);
        let k = rng.random_range(0..dims.len());
        let lhs = chain.cyclic_shift(k).unwrap().full().unwrap();
        let rhs = permute_oracle(&chain.full().unwrap(), k);
        worst_b = worst_b.max(rel_gap(&lhs, &rhs));
    }
    for _ in 0..200 {
        // (c) tr(AB) = vec(B^T)^T vec(A).
        let a = DenseTensor::from_fn(Shape::matrix(4, 3).unwrap(), |_| uniform(&mut rng));
        let b = DenseTensor::from_fn(Shape::matrix(3, 4).unwrap(), |_| uniform(&mut rng));
        let mut trace = 0.0;
        let mut scale = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                let t = a.get(&[i, j]).unwrap() * b.get(&[j, i]).unwrap();
                trace += t;
                scale += t.abs();
            }
        }
        let vec_form: f64 = b
            .transpose()
            .unwrap()
            .vectorize()
            .iter()
            .zip(a.vectorize())
            .map(|(x, y)| x * y)
            .sum();
        let ab = a.matmul(&b).unwrap();
        let lib_trace: f64 = (0..4).map(|i| ab.get(&[i, i]).unwrap()).sum();
        worst_c = worst_c.max((vec_form - trace).abs() / scale).max((lib_trace - trace).abs() / scale);
    }
    for _ in 0..200 {
        // (d) masked objective in the original and the rotated frame, for a
        // random candidate core at mode k; also the per-slice system form.
        let (mut dims, mut ranks) = random_ring_shape(&mut rng, 5, 4, 3);
        if dims.len() < 2 {
            dims.push(rng.random_range(1..=4));
            ranks.insert(1, rng.random_range(1..=3));
        }
        let base = random_chain(&mut rng, &dims, &ranks);
        let k = rng.random_range(0..dims.len());
        let c = base.core(k);
        let candidate = tensor_ring::TRCore::from_parts(
            c.left_rank(),
            c.dim(),
            c.right_rank(),
            (0..c.data().len()).map(|_| uniform(&mut rng)).collect(),
        )
        .unwrap();
        let chain = base.with_core(k, candidate).unwrap();
        let shape = Shape::new(dims.clone()).unwrap();
        let x = DenseTensor::from_fn(shape.clone(), |_| uniform(&mut rng));
        let ratio = rng.random_range(0.2..1.0);
        let mask = random_mask(&mut rng, &shape, ratio);
        let p = mask.to_binary();
        let unpermuted = masked_gap(&p, &chain.full().unwrap(), &x);
        let permuted = masked_gap(
            &permute_oracle(&p, k),
            &chain.cyclic_shift(k).unwrap().full().unwrap(),
            &permute_oracle(&x, k),
        );
        let sliced = tensor_ring::sliced_residual(&chain, k, &mask, &x).unwrap();
        let scale = unpermuted.max(f64::MIN_POSITIVE);
        worst_d = worst_d
            .max((unpermuted - permuted).abs() / scale)
            .max((unpermuted - sliced).abs() / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_a <= 1e-12 && worst_b <= 1e-12 && worst_c <= 1e-13 && worst_d <= 1e-12 && secs < 30.0,
        format!(
            "200 cases each: (a) {worst_a:.1e} (b) {worst_b:.1e} (c) {worst_c:.1e} (d) {worst_d:.1e}, {secs:.1}s"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=4);
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=5)).collect();
        let r = rng.random_range(1..=3);
        let mut ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=r)).collect();
        ranks.push(ranks[0]);
        let chain = random_chain(&mut rng, &dims, &ranks);
        let shape = Shape::new(dims.clone()).unwrap();
        let x = DenseTensor::from_fn(shape.clone(), |_| uniform(&mut rng));
        let ratio = rng.random_range(0.1..0.9);
        let mask = random_mask(&mut rng, &shape, ratio);
        let k = rng.random_range(0..n);
        let p = mask.to_binary();
        let before = masked_gap(&p, &chain.full().unwrap(), &x);
        let updated = update_core(&chain, k, &mask, &x, &SolverConfig::new(r)).unwrap();
        let after = masked_gap(&p, &updated.full().unwrap(), &x);
        worst = worst.max(after - before);
    }
    outcome(
        worst <= 1e-12,
        format!("100 random core updates: largest residual change {worst:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut tt = vec![1usize];
        tt.extend((0..3).map(|_| rng.random_range(1..=3)));
        tt.push(1);
        let x = random_chain(&mut rng, &[6, 6, 6, 6], &tt).full().unwrap();
        let chain = tra_init(&x, &TraConfig::new(3).with_sigma(0.0)).unwrap();
        worst = worst.max(recovery_error(&chain.full().unwrap(), &x).unwrap());
    }
    outcome(
        worst <= 1e-8,
        format!("50 random train tensors 6^4, ranks <= 3, sigma 0, R 3: max RE {worst:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut formula_ok = true;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=20)).collect();
        let r = rng.random_range(1..=8);
        let chain = TRChain::uniform(&dims, r, |_| 0.0).unwrap();
        let expected = r * r * (dims.iter().sum::<usize>() - n + 1);
        formula_ok &= chain.storage_params(true).unwrap() == expected;
    }
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (dims, ranks) = random_ring_shape(&mut rng, 5, 5, 4);
        let chain = random_chain(&mut rng, &dims, &ranks);
        let full = chain.full().unwrap();
        worst = worst.max(rel_gap(&chain.left_orthogonalize().unwrap().full().unwrap(), &full));
    }
    outcome(
        formula_ok && worst <= 1e-10,
        format!("orthonormal count formula exact on 50 chains: {formula_ok}; orthogonalization max rel change {worst:.2e} on 50 chains"),
    )
}

fn criterion_7() -> Outcome {
    let spec = ExperimentSpec {
        source: Source::Synthetic { dims: vec![10, 10, 10, 10], rank: 3, seed: None },
        reshape: None,
        observation_ratio: 0.2,
        solver: SolverSpec::default(),
        sweep: Some(Sweep { ranks: (1..=6).collect(), ratios: vec![] }),
        repeats: 5,
        seed: 0,
        reproducible: false,
    };
    let record = run_experiment(&spec).unwrap();
    let means: Vec<f64> = record
        .points
        .iter()
        .map(|p| p.aggregate.re_mean.unwrap_or(f64::INFINITY))
        .collect();
    outcome(
        means[2] < means[0] && means[2] < means[5],
        format!(
            "10^4 true rank 3, 20% observed, mean RE over 5 seeds by rank 1..6: {}",
            means.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn trals(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_trals"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut ok = trals(&["synth", "--dims", "8,7,8,6", "--true-rank", "3", "--seed", "8", "--out", "x.trt"], d);
    let mut bytes = b"P6\n9 6\n255\n".to_vec();
    bytes.extend((0..162u32).map(|i| (i * 37 % 256) as u8));
    std::fs::write(d.join("img.ppm"), bytes).unwrap();
    let runs: [&[&str]; 2] = [
        &["complete", "--input", "x.trt", "--ratio", "0.3", "--rank", "3", "--seed", "5", "--reproducible"],
        &["complete", "--input", "img.ppm", "--ratio", "0.5", "--rank", "2", "--reshape-order", "5", "--seed", "2", "--maxiter", "40", "--reproducible"],
    ];
    let mut identical = true;
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = format!("a{i}");
        let b = format!("b{i}");
        let mut first = args.to_vec();
        first.extend(["--out", &a]);
        let mut second = args.to_vec();
        second.extend(["--out", &b]);
        ok &= trals(&first, d) && trals(&second, d);
        if !ok {
            break;
        }
        let (fa, fb) = (read_dir_sorted(&d.join(&a)), read_dir_sorted(&d.join(&b)));
        files += fa.len();
        identical &= fa == fb;
    }
    outcome(
        ok && identical && files > 0,
        format!("two reproducible invocations each of a tensor and an image run: {files} files, byte-identical: {identical}"),
    )
}

fn main() -> ExitCode {
    let runs = recovery_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("exact recovery", Box::new(|| criterion_1(&runs))),
        ("ring vs train gap", Box::new(|| criterion_2(&runs))),
        ("identity oracles", Box::new(criterion_3)),
        ("update monotonicity", Box::new(criterion_4)),
        ("initializer fidelity", Box::new(criterion_5)),
        ("storage accounting", Box::new(criterion_6)),
        ("overfitting curve", Box::new(criterion_7)),
        ("determinism", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
