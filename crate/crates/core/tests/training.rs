mod common;

use common::*;
use vaecca::data::{FeatureMatrix, PairedDataset};
use vaecca::losses::LossWeights;
use vaecca::model::{Modality, ModelConfig, ModelParams};
use vaecca::optim::{pretrain_vae, train, train_full, Schedule, Stage, TrainRunConfig};
use vaecca::{Error, Result};

fn quiet<T>(_: &vaecca::optim::EpochRecord<f64>, _: &T) -> Result<()> {
    Ok(())
}

fn small_config() -> ModelConfig {
    ModelConfig {
        hidden: 64,
        latent: 16,
        ..benchmark_model()
    }
}

fn run_config(epochs: usize, pretrain: usize) -> TrainRunConfig<f64> {
    TrainRunConfig {
        epochs,
        pretrain_epochs: pretrain,
        batch_size: 32,
        seed: 5,
        ..TrainRunConfig::default()
    }
}

#[test]
fn pretraining_reduces_the_vae_loss() {
    let (train_data, _) = benchmark_data(0);
    let mut params = ModelParams::init(benchmark_model(), 0).unwrap();
    let history = pretrain_vae(&mut params, &train_data, &run_config(10, 10), &mut quiet).unwrap();
    let obj: Vec<f64> = history.records.iter().map(|r| r.objective).collect();
    assert_eq!(obj.len(), 10);
    for w in obj.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{obj:?}");
    }
    assert!(obj[9] < obj[0]);
    assert!(history.records.iter().all(|r| r.stage == Stage::Pretrain));
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let (train_data, _) = benchmark_data(1);
    let params = ModelParams::init(small_config(), 1).unwrap();
    let cfg = TrainRunConfig {
        schedule: Schedule::constant(0.0),
        ..run_config(3, 3)
    };
    let mut trained = params.clone();
    pretrain_vae(&mut trained, &train_data, &cfg, &mut quiet).unwrap();
    assert_eq!(trained, params);

    let cfg = TrainRunConfig {
        schedule: Schedule::constant(0.0),
        ..run_config(2, 0)
    };
    train_full(&mut trained, &train_data, &cfg, &mut quiet).unwrap();
    assert_eq!(trained.trainable(), params.trainable());
}

#[test]
fn same_seed_gives_identical_history() {
    let (train_data, _) = benchmark_data(2);
    let cfg = run_config(4, 2);
    let mut a = ModelParams::init(small_config(), 3).unwrap();
    let mut b = ModelParams::init(small_config(), 3).unwrap();
    let ha = train(&mut a, &train_data, &cfg, &mut quiet).unwrap();
    let hb = train(&mut b, &train_data, &cfg, &mut quiet).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);

    let mut c = ModelParams::init(small_config(), 3).unwrap();
    let hc = train(
        &mut c,
        &train_data,
        &TrainRunConfig { seed: 6, ..cfg },
        &mut quiet,
    )
    .unwrap();
    assert_ne!(ha, hc);
}

#[test]
fn step_count_is_epochs_times_batches() {
    let (train_data, _) = benchmark_data(3);
    let mut params = ModelParams::init(small_config(), 0).unwrap();
    let history = train(&mut params, &train_data, &run_config(3, 1), &mut quiet).unwrap();
    assert_eq!(history.steps, 3 * 200usize.div_ceil(32));
    assert_eq!(history.records.len(), 3);
    let epochs: Vec<usize> = history.records.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, vec![0, 1, 2]);
}

#[test]
fn discriminative_term_alone_still_trains_the_classifiers() {
    let (train_data, _) = benchmark_data(4);
    let mut params = ModelParams::init(small_config(), 0).unwrap();
    let cfg = TrainRunConfig {
        weights: LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            discriminative: 1.0,
        },
        ..run_config(20, 0)
    };
    let history = train_full(&mut params, &train_data, &cfg, &mut quiet).unwrap();
    let first = history.records.first().unwrap().report.discr;
    let last = history.records.last().unwrap().report.discr;
    assert!(last < 0.75 * first, "{first} -> {last}");
    for r in &history.records {
        assert_eq!(r.report.total, r.report.discr);
    }
}

#[test]
fn report_totals_follow_the_weights() {
    let (train_data, _) = benchmark_data(5);
    let mut params = ModelParams::init(small_config(), 0).unwrap();
    let cfg = run_config(2, 1);
    let history = train(&mut params, &train_data, &cfg, &mut quiet).unwrap();
    let w = cfg.weights;
    for r in &history.records {
        let p = &r.report;
        let expected = w.discriminative * p.discr
            + w.lambda1 * p.vae
            + w.lambda2 * p.corr
            + w.lambda3 * p.dist
            + w.lambda4 * p.center;
        assert_eq!(p.total, expected);
    }
    assert_eq!(history.records[0].objective, history.records[0].report.vae);
}

#[test]
fn overflowing_inputs_abort_with_the_offending_term() {
    let (mut data, _) = benchmark_data(6);
    data = PairedDataset::new(
        data.audio.clone(),
        FeatureMatrix::new(Modality::Visual, data.visual.values.scale(1e200), "huge").unwrap(),
        data.labels.clone(),
        data.split,
    )
    .unwrap();
    let mut params = ModelParams::init(small_config(), 0).unwrap();
    match pretrain_vae(&mut params, &data, &run_config(1, 1), &mut quiet) {
        Err(Error::Diverged { term, epoch }) => {
            assert_eq!(epoch, 0);
            assert!(["rec", "vae", "kl"].contains(&term), "{term}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_run_configs_are_rejected() {
    let (train_data, _) = benchmark_data(7);
    let mut params = ModelParams::init(small_config(), 0).unwrap();
    for cfg in [
        TrainRunConfig {
            batch_size: 201,
            ..run_config(1, 0)
        },
        TrainRunConfig {
            batch_size: 0,
            ..run_config(1, 0)
        },
        TrainRunConfig {
            epochs: 0,
            ..run_config(1, 0)
        },
        TrainRunConfig {
            pretrain_epochs: 5,
            ..run_config(1, 0)
        },
    ] {
        assert!(matches!(
            train(&mut params, &train_data, &cfg, &mut quiet),
            Err(Error::Validation(_))
        ));
    }
    let wrong = ModelConfig {
        d_audio: 31,
        ..small_config()
    };
    let mut params = ModelParams::init(wrong, 0).unwrap();
    assert!(matches!(
        train(&mut params, &train_data, &run_config(1, 0), &mut quiet),
        Err(Error::FeatureDim { .. })
    ));
}
