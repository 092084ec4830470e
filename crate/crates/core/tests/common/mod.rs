#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vaecca::data::{gen_synthetic, PairedDataset, SyntheticSpec};
use vaecca::model::ModelConfig;
use vaecca::{Result, Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn labels(n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

pub fn one_hot(labels: &[usize], classes: usize) -> Tensor<f64> {
    Tensor::from_fn(labels.len(), classes, |i, j| {
        if labels[i] == j {
            1.0
        } else {
            0.0
        }
    })
}

/// Largest norm-wise relative error between the tape gradient and central
/// differences, over every input of `f`.
pub fn gradient_error(
    inputs: &[Tensor<f64>],
    f: impl for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>,
) -> f64 {
    let tape = Tape::new();
    let vars: Vec<_> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, t.clone()))
        .collect();
    let loss = f(&vars).unwrap();
    let grads = tape.gradients(loss).unwrap();

    let value = |xs: &[Tensor<f64>]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        f(&vars).unwrap().value().item()
    };

    let mut worst: f64 = 0.0;
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        let mut numeric = Tensor::zeros(analytic.rows(), analytic.cols());
        let mut xs = inputs.to_vec();
        for k in 0..inputs[i].len() {
            let orig = inputs[i].as_slice()[k];
            xs[i].as_mut_slice()[k] = orig + FD_STEP;
            let up = value(&xs);
            xs[i].as_mut_slice()[k] = orig - FD_STEP;
            let down = value(&xs);
            xs[i].as_mut_slice()[k] = orig;
            numeric.as_mut_slice()[k] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

pub fn relative_error(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let diff = a.sub(b).unwrap().frobenius();
    let scale = a.frobenius().max(b.frobenius());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

/// The synthetic benchmark: 5 classes, 200 train / 50 test pairs, 64-d
/// visual and 32-d audio features.
pub fn benchmark_data(seed: u64) -> (PairedDataset<f64>, PairedDataset<f64>) {
    gen_synthetic(&SyntheticSpec {
        classes: 5,
        per_class: 50,
        test_fraction: 0.2,
        d_visual: 64,
        d_audio: 32,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

pub fn benchmark_model() -> ModelConfig {
    ModelConfig {
        d_visual: 64,
        d_audio: 32,
        classes: 5,
        ..ModelConfig::default()
    }
}
