//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use vaecca::cca;
use vaecca::data::{
    read_features, write_features_binary, write_features_csv, Batch, PairedDataset,
};
use vaecca::eval::{average_precision, evaluate_embeddings, EvalReport};
use vaecca::losses::{
    center_loss, correlation_loss, discrimination, discriminative_loss, distance_loss, evaluate,
    kl_loss, kl_term, reconstruction_loss, total_loss, AblationArm, LossParts, LossWeights,
};
use vaecca::model::{
    read_checkpoint, sample_noise, write_checkpoint, Activation, Modality, ModelConfig, ModelParams,
};
use vaecca::optim::{batch_losses, train, EpochRecord, Schedule, TrainHistory, TrainRunConfig};
use vaecca::{Gradients, Tape, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

// ---------------------------------------------------------------- gradients

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64| match worst.iter_mut().find(|(n, _)| *n == name)
    {
        Some(entry) => entry.1 = entry.1.max(err),
        None => worst.push((name, err)),
    };
    for seed in 0..20u64 {
        let mut r = rng(1000 + seed);
        let n = r.random_range(2..=8);
        let o = r.random_range(2..=16);
        let (dv, da) = (r.random_range(1..=16), r.random_range(1..=16));
        let c = r.random_range(2..=5);
        let y = labels(n, c, &mut r);
        let yh = one_hot(&y, c);
        let centers = uniform(c, o, &mut r);
        let mut m = |rows, cols| uniform(rows, cols, &mut r);

        let rec_in = [m(n, dv), m(n, dv), m(n, da), m(n, da)];
        record(
            "reconstruction",
            gradient_error(&rec_in, |v| reconstruction_loss(v[0], v[1], v[2], v[3])),
        );
        let kl_in = [m(n, o), m(n, o), m(n, o), m(n, o)];
        record(
            "kl",
            gradient_error(&kl_in, |v| kl_loss(v[0], v[1], v[2], v[3])),
        );
        let zs = [m(n, o), m(n, o)];
        record(
            "correlation",
            gradient_error(&zs, |v| correlation_loss(v[0], v[1], &y)),
        );
        record(
            "distance",
            gradient_error(&zs, |v| distance_loss(v[0], v[1])),
        );
        record(
            "center",
            gradient_error(&zs, |v| center_loss(v[0], v[1], &y, &centers)),
        );
        let preds = [m(n, c), m(n, c)];
        record(
            "discriminative",
            gradient_error(&preds, |v| discriminative_loss(v[0], v[1], &yh)),
        );
        record("total", total_gradient_error(seed));
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let detail = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(
        max < FD_TOLERANCE && within(elapsed, 60),
        format!("20 seeds, max rel err {max:.2e} (< 1e-4) [{detail}] in {elapsed:.1?}"),
    )
}

/// Eq. 8 total through a small random model, perturbing every parameter.
fn total_gradient_error(seed: u64) -> f64 {
    let mut r = rng(2000 + seed);
    let config = ModelConfig {
        d_visual: r.random_range(2..=16),
        d_audio: r.random_range(2..=16),
        hidden: r.random_range(8..=16),
        latent: r.random_range(2..=8),
        classes: r.random_range(2..=4),
        activation: if seed % 2 == 0 {
            Activation::Identity
        } else {
            Activation::Tanh
        },
    };
    let mut params = ModelParams::init(config, seed).unwrap();
    params.centers = uniform(config.classes, config.latent, &mut r);
    let n = r.random_range(2..=8);
    let y = labels(n, config.classes, &mut r);
    let batch = Batch {
        visual: uniform(n, config.d_visual, &mut r),
        audio: uniform(n, config.d_audio, &mut r),
        one_hot: one_hot(&y, config.classes),
        labels: y,
    };
    let eps_v = sample_noise(n, config.latent, &mut r);
    let eps_a = sample_noise(n, config.latent, &mut r);
    let w = LossWeights::default();

    let value = |p: &ModelParams<f64>| {
        let tape = Tape::new();
        let model = p.bind_frozen(&tape);
        let (terms, _, _) = batch_losses(&model, &batch, &eps_v, &eps_a, &p.centers).unwrap();
        terms.total(&w).unwrap().value().item()
    };
    let tape = Tape::new();
    let model = params.bind(&tape);
    let (terms, _, _) = batch_losses(&model, &batch, &eps_v, &eps_a, &params.centers).unwrap();
    let mut grads = Gradients::new();
    tape.backward(terms.total(&w).unwrap(), &mut grads).unwrap();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for slot in 0..params.trainable().len() {
        let analytic = grads.get(slot).unwrap().clone();
        let mut numeric = Tensor::zeros(analytic.rows(), analytic.cols());
        for k in 0..analytic.len() {
            let orig = params.trainable()[slot].as_slice()[k];
            probe.trainable_mut()[slot].as_mut_slice()[k] = orig + FD_STEP;
            let up = value(&probe);
            probe.trainable_mut()[slot].as_mut_slice()[k] = orig - FD_STEP;
            let down = value(&probe);
            probe.trainable_mut()[slot].as_mut_slice()[k] = orig;
            numeric.as_mut_slice()[k] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

// ------------------------------------------------------------ loss values

fn loss_oracles() -> Outcome {
    let t = |rows: &[&[f64]]| Tensor::from_rows(rows).unwrap();
    let softplus = |x: f64| (1.0 + x.exp()).ln();
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let (z, one) = (t(&[&[0.0]]), t(&[&[1.0]]));
    checks.push((
        "kl standard",
        evaluate(&[&z, &z], |v| kl_term(v[0], v[1])).unwrap(),
        0.0,
    ));
    checks.push((
        "kl mu=1",
        evaluate(&[&one, &z], |v| kl_term(v[0], v[1])).unwrap(),
        0.5 * (1.0 + 1.0 - 1.0 - 0.0),
    ));
    checks.push((
        "kl both branches",
        evaluate(&[&one, &z], |v| kl_loss(v[0], v[1], v[0], v[1])).unwrap(),
        1.0,
    ));

    let (a, b) = (t(&[&[1.0, -1.0, 1.0, -1.0]]), t(&[&[1.0, 1.0, -1.0, -1.0]]));
    checks.push((
        "corr pair t=0 s=1",
        evaluate(&[&a, &b], |v| discrimination(v[0], v[1], &[0], &[0])).unwrap(),
        softplus(0.0),
    ));
    checks.push((
        "corr pair t=0.5 s=1",
        evaluate(&[&a, &a], |v| discrimination(v[0], v[1], &[0], &[0])).unwrap(),
        softplus(0.5) - 0.5,
    ));
    checks.push((
        "corr pair t=0.5 s=0",
        evaluate(&[&a, &a], |v| discrimination(v[0], v[1], &[0], &[1])).unwrap(),
        softplus(0.5),
    ));
    let flat = t(&[&[2.0, 2.0, 2.0]]);
    checks.push((
        "corr constant codes",
        evaluate(&[&flat, &flat], |v| correlation_loss(v[0], v[1], &[0])).unwrap(),
        3.0 * 2f64.ln(),
    ));

    let zz = t(&[&[0.3, -0.2], &[1.0, 4.0]]);
    let ones = t(&[&[1.0, 1.0], &[1.0, 1.0]]);
    let shifted = zz.add(&ones).unwrap();
    checks.push((
        "distance equal",
        evaluate(&[&zz, &zz], |v| distance_loss(v[0], v[1])).unwrap(),
        0.0,
    ));
    checks.push((
        "distance ones n=2",
        evaluate(&[&shifted, &zz], |v| distance_loss(v[0], v[1])).unwrap(),
        (4f64).sqrt() / 2.0,
    ));

    let y = t(&[&[0.0, 1.0, 0.0]]);
    let zero_pred = t(&[&[0.0, 0.0, 0.0]]);
    checks.push((
        "discriminative perfect",
        evaluate(&[&y, &y], |v| discriminative_loss(v[0], v[1], &y)).unwrap(),
        0.0,
    ));
    checks.push((
        "discriminative zero pred",
        evaluate(&[&zero_pred, &zero_pred], |v| {
            discriminative_loss(v[0], v[1], &y)
        })
        .unwrap(),
        2.0,
    ));

    let zc = t(&[&[1.0, 0.0]]);
    let origin = t(&[&[0.0, 0.0]]);
    checks.push((
        "center one branch",
        evaluate(&[&zc, &origin], |v| center_loss(v[0], v[1], &[0], &origin)).unwrap(),
        0.5 * 1.0,
    ));
    checks.push((
        "center at centers",
        evaluate(&[&zc, &zc], |v| center_loss(v[0], v[1], &[0], &zc)).unwrap(),
        0.0,
    ));

    let xv = t(&[&[1.0, 2.0]]);
    let xv_hat = t(&[&[0.0, 1.0]]);
    checks.push((
        "reconstruction",
        evaluate(&[&xv, &xv_hat, &xv, &xv], |v| {
            reconstruction_loss(v[0], v[1], v[2], v[3])
        })
        .unwrap(),
        1.0 + 1.0,
    ));

    let unit = LossParts {
        rec: 0.5,
        kl: 0.5,
        vae: 1.0,
        corr: 1.0,
        dist: 1.0,
        discr: 1.0,
        center: 1.0,
    };
    checks.push((
        "total unit parts",
        total_loss(unit, &LossWeights::default()).total,
        1.0 + 0.0001 + 0.001 + 0.1 + 0.01,
    ));
    checks.push((
        "total zero parts",
        total_loss(LossParts::default(), &LossWeights::default()).total,
        0.0,
    ));

    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-12)
        .map(|(n, got, want)| format!("{n}: {got} vs {want}"))
        .collect();
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} hand examples within 1e-12 (total 1.1111)", checks.len())
        } else {
            bad.join("; ")
        },
    )
}

// --------------------------------------------------------------- metrics

fn ap_oracle(flags: &[bool]) -> Option<f64> {
    let total = flags.iter().filter(|&&f| f).count();
    if total == 0 {
        return None;
    }
    let mut sum = 0.0;
    for k in 0..flags.len() {
        if flags[k] {
            let hits = flags[..=k].iter().filter(|&&f| f).count();
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..80);
        let p: f64 = r.random_range(0.05..0.9);
        let flags: Vec<bool> = (0..n).map(|_| r.random_bool(p)).collect();
        if average_precision(&flags) != ap_oracle(&flags) {
            mismatches += 1;
        }
    }
    let example = average_precision(&[true, false, true]).unwrap();
    let mut y: Vec<usize> = (0..10).flat_map(|c| std::iter::repeat_n(c, 100)).collect();
    y.shuffle(&mut rng(8));
    let report =
        evaluate_embeddings(&gaussian(1000, 16, 9), &gaussian(1000, 16, 10), &y, 10).unwrap();
    let (a2v, v2a) = (report.audio2visual.map, report.visual2audio.map);
    let elapsed = start.elapsed();
    let pass = mismatches == 0
        && (example - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15
        && (a2v - 0.1).abs() <= 0.02
        && (v2a - 0.1).abs() <= 0.02
        && within(elapsed, 60);
    Outcome::new(
        pass,
        format!(
            "{mismatches}/1000 oracle mismatches, [1,0,1] -> {example:.6}, random c=10 mAP {a2v:.4}/{v2a:.4} (0.1 +- 0.02) in {elapsed:.1?}"
        ),
    )
}

// -------------------------------------------------------------------- CCA

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn cca_oracle() -> Outcome {
    let x = gaussian(80, 6, 1);
    let same = cca::fit(&x, &x, 6, Some(0.0)).unwrap();
    let identical_err = same
        .correlations
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);

    let a = gaussian(50, 1, 2);
    let v = a.scale(-0.6).add(&gaussian(50, 1, 3)).unwrap();
    let one = cca::fit(&a, &v, 1, Some(0.0)).unwrap();
    let pearson_err = (one.correlations[0] - pearson(&a.column(0), &v.column(0)).abs()).abs();

    let shared = gaussian(200, 3, 4);
    let xa = shared
        .matmul(&gaussian(3, 4, 5))
        .unwrap()
        .add(&gaussian(200, 4, 6).scale(0.5))
        .unwrap();
    let xv = shared
        .matmul(&gaussian(3, 5, 7))
        .unwrap()
        .add(&gaussian(200, 5, 8).scale(0.5))
        .unwrap();
    let base = cca::fit(&xa, &xv, 4, Some(0.0)).unwrap();
    let ta = gaussian(4, 4, 9).add(&Tensor::eye(4).scale(3.0)).unwrap();
    let tv = gaussian(5, 5, 10).add(&Tensor::eye(5).scale(3.0)).unwrap();
    let xa2 = xa
        .matmul(&ta)
        .unwrap()
        .add_row(&gaussian(1, 4, 11).scale(5.0))
        .unwrap();
    let xv2 = xv
        .matmul(&tv)
        .unwrap()
        .add_row(&gaussian(1, 5, 12).scale(5.0))
        .unwrap();
    let moved = cca::fit(&xa2, &xv2, 4, Some(0.0)).unwrap();
    let affine_err = base
        .correlations
        .iter()
        .zip(&moved.correlations)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);

    Outcome::new(
        identical_err <= 1e-9 && pearson_err <= 1e-10 && affine_err <= 1e-6,
        format!(
            "identical views |rho-1| {identical_err:.1e} (<= 1e-9), 1-d vs Pearson {pearson_err:.1e} (<= 1e-10), affine {affine_err:.1e} (<= 1e-6)"
        ),
    )
}

// --------------------------------------------------------------- schedule

fn schedule_conformance() -> Outcome {
    let s = Schedule::default();
    let got = [s.lr_at(0), s.lr_at(10), s.lr_at(40), s.lr_at(70)];
    let want = [3.5e-5, 3.5e-4, 3.5e-5, 3.5e-6];
    Outcome::new(got == want, format!("epochs 0/10/40/70 -> {got:?}"))
}

// ------------------------------------------------------- synthetic runs

/// 150 epochs: 30 of VAE pretraining, then 120 on the full objective.
fn benchmark_run_config(weights: LossWeights<f64>) -> TrainRunConfig<f64> {
    TrainRunConfig {
        epochs: 150,
        pretrain_epochs: 30,
        batch_size: 32,
        seed: 0,
        weights,
        ..TrainRunConfig::default()
    }
}

struct Run {
    params: ModelParams<f64>,
    history: TrainHistory<f64>,
    report: EvalReport,
    elapsed: Duration,
}

fn run_benchmark(
    train_data: &PairedDataset<f64>,
    test: &PairedDataset<f64>,
    weights: LossWeights<f64>,
) -> Run {
    let start = Instant::now();
    let cfg = benchmark_run_config(weights);
    let mut params = ModelParams::init(benchmark_model(), cfg.seed).unwrap();
    let mut quiet = |_: &EpochRecord<f64>, _: &ModelParams<f64>| Ok(());
    let history = train(&mut params, train_data, &cfg, &mut quiet).unwrap();
    let ea = params
        .embed_for_retrieval(&test.audio.values, Modality::Audio)
        .unwrap();
    let ev = params
        .embed_for_retrieval(&test.visual.values, Modality::Visual)
        .unwrap();
    let report = evaluate_embeddings(&ea, &ev, test.labels.as_slice(), test.classes()).unwrap();
    Run {
        params,
        history,
        report,
        elapsed: start.elapsed(),
    }
}

/// Mean mAP of random embeddings under the same evaluator, over 20 draws.
fn random_baseline(test: &PairedDataset<f64>) -> (f64, f64) {
    let (mut a2v, mut v2a) = (0.0, 0.0);
    for seed in 0..20 {
        let r = evaluate_embeddings(
            &gaussian(test.len(), 64, 100 + seed),
            &gaussian(test.len(), 64, 200 + seed),
            test.labels.as_slice(),
            test.classes(),
        )
        .unwrap();
        a2v += r.audio2visual.map / 20.0;
        v2a += r.visual2audio.map / 20.0;
    }
    (a2v, v2a)
}

fn end_to_end(run: &Run, test: &PairedDataset<f64>) -> Outcome {
    let (a2v, v2a) = (run.report.audio2visual.map, run.report.visual2audio.map);
    let (ba, bv) = random_baseline(test);
    Outcome::new(
        a2v >= 0.80 && v2a >= 0.80 && within(run.elapsed, 300),
        format!(
            "mAP audio2visual {a2v:.4}, visual2audio {v2a:.4} (>= 0.80); random baseline {ba:.4}/{bv:.4}; {:.1?}",
            run.elapsed
        ),
    )
}

fn ablation_ordering(
    full: &Run,
    train_data: &PairedDataset<f64>,
    test: &PairedDataset<f64>,
) -> Outcome {
    let start = Instant::now();
    let defaults = LossWeights::default();
    let mut scores = Vec::new();
    for arm in AblationArm::ALL {
        let avg = if arm == AblationArm::Full {
            full.report.average
        } else {
            run_benchmark(train_data, test, defaults.for_arm(arm))
                .report
                .average
        };
        scores.push((arm, avg));
    }
    let elapsed = start.elapsed() + full.elapsed;
    let get = |a: AblationArm| scores.iter().find(|s| s.0 == a).unwrap().1;
    let (center, correlation, distance, full_avg) = (
        get(AblationArm::Center),
        get(AblationArm::Correlation),
        get(AblationArm::Distance),
        get(AblationArm::Full),
    );
    let ordered = full_avg >= distance && distance >= correlation && correlation >= center;
    Outcome::new(
        ordered && within(elapsed, 1200),
        format!(
            "full {full_avg:.4} >= distance {distance:.4} >= correlation {correlation:.4} >= center {center:.4} ; {elapsed:.1?}"
        ),
    )
}

fn convergence(run: &Run) -> Outcome {
    let totals: Vec<f64> = run.history.records.iter().map(|r| r.report.total).collect();
    let finite = totals.iter().all(|t| t.is_finite());
    let (first, last) = (totals[0], *totals.last().unwrap());
    Outcome::new(
        finite && last <= 0.5 * first,
        format!(
            "{} epochs all finite: {finite}; total after epoch 1 {first:.4}, final {last:.4} (ratio {:.3} <= 0.5)",
            totals.len(),
            last / first
        ),
    )
}

fn history_bits(h: &TrainHistory<f64>) -> Vec<u64> {
    h.records
        .iter()
        .flat_map(|r| {
            let p = &r.report;
            [
                p.rec,
                p.kl,
                p.vae,
                p.corr,
                p.dist,
                p.discr,
                p.center,
                p.total,
                r.objective,
                r.lr,
            ]
        })
        .map(f64::to_bits)
        .collect()
}

fn reproducibility(
    first: &Run,
    train_data: &PairedDataset<f64>,
    test: &PairedDataset<f64>,
) -> Outcome {
    let second = run_benchmark(train_data, test, LossWeights::default());
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    write_checkpoint(&first.params, &p1).unwrap();
    write_checkpoint(&second.params, &p2).unwrap();
    let same_ckpt = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
    let same_history = history_bits(&first.history) == history_bits(&second.history)
        && first.history.steps == second.history.steps;
    let same_report = first.report == second.report
        && format!("{:?}", first.report) == format!("{:?}", second.report);
    Outcome::new(
        same_ckpt && same_history && same_report,
        format!("checkpoint bytes equal: {same_ckpt}, history bits equal: {same_history}, eval report equal: {same_report}"),
    )
}

// ---------------------------------------------------------------- formats

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut params = ModelParams::<f64>::init(
        ModelConfig {
            d_visual: 20,
            d_audio: 9,
            hidden: 12,
            latent: 5,
            classes: 4,
            activation: Activation::Tanh,
        },
        3,
    )
    .unwrap();
    params.centers = gaussian(4, 5, 1);
    let ckpt = dir.path().join("m.ckpt");
    write_checkpoint(&params, &ckpt).unwrap();
    let back: ModelParams<f64> = read_checkpoint(&ckpt).unwrap();
    let bits = |p: &ModelParams<f64>| -> Vec<u64> {
        p.named_tensors()
            .iter()
            .flat_map(|(_, t)| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let ckpt_ok = back.config == params.config && bits(&back) == bits(&params);

    let features = gaussian(31, 7, 2).scale(1e3);
    let bin = dir.path().join("f.avfb");
    write_features_binary(&features, &bin).unwrap();
    let fb = read_features::<f64>(&bin, Modality::Visual, 7)
        .unwrap()
        .values;
    let bin_ok = fb
        .as_slice()
        .iter()
        .map(|v| v.to_bits())
        .eq(features.as_slice().iter().map(|v| v.to_bits()));

    let csv = dir.path().join("f.csv");
    write_features_csv(&features, &csv).unwrap();
    let fc = read_features::<f64>(&csv, Modality::Audio, 7)
        .unwrap()
        .values;
    let csv_err = features
        .as_slice()
        .iter()
        .zip(fc.as_slice())
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    Outcome::new(
        ckpt_ok && bin_ok && csv_err <= f64::EPSILON,
        format!("checkpoint bit-exact: {ckpt_ok}, binary features bit-exact: {bin_ok}, CSV max rel err {csv_err:.1e}"),
    )
}

// ------------------------------------------------------------------- main

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome::new(false, format!("panicked: {msg}"))
    });
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{tag}  {name}: {}", outcome.detail);
    outcome.pass
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    println!("acceptance criteria");
    let mut results = vec![
        report("gradient correctness", gradient_correctness),
        report("loss-value oracles", loss_oracles),
        report("metric oracle", metric_oracle),
        report("CCA oracle", cca_oracle),
        report("schedule conformance", schedule_conformance),
    ];

    let (train_data, test) = benchmark_data(0);
    let full = run_benchmark(&train_data, &test, LossWeights::default());
    results.push(report("end-to-end synthetic training", || {
        end_to_end(&full, &test)
    }));
    results.push(report("ablation ordering", || {
        ablation_ordering(&full, &train_data, &test)
    }));
    results.push(report("convergence", || convergence(&full)));
    results.push(report("reproducibility", || {
        reproducibility(&full, &train_data, &test)
    }));
    results.push(report("format round-trips", format_round_trips));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
