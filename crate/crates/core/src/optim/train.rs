use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdamConfig, AdamState, Schedule};
use crate::autodiff::{Gradients, Tape, Var};
use crate::data::{make_batches, Batch, PairedDataset};
use crate::error::{Error, Result};
use crate::losses::{update_centers, BatchCodes, LossReport, LossTerms, LossWeights};
use crate::model::{sample_noise, BoundModel, Modality, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stream offsets keep noise draws disjoint from batch shuffles.
const PRETRAIN_STREAM: u64 = 1 << 40;
const FULL_STREAM: u64 = 2 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pretrain,
    Full,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Pretrain => "pretrain",
            Stage::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRunConfig<T> {
    /// Total epochs over both stages.
    pub epochs: usize,
    /// Leading epochs spent in VAE pretraining.
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights<T>,
    pub center_alpha: T,
    /// Cap on the global gradient norm; `None` disables clipping.
    pub grad_clip: Option<T>,
    /// Each stage reads the schedule from its own epoch 0.
    pub schedule: Schedule,
    pub adam: AdamConfig,
    /// Epochs between checkpoints written by the caller; `None` for final only.
    pub checkpoint_every: Option<usize>,
}

impl<T: Scalar> Default for TrainRunConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 500,
            pretrain_epochs: 100,
            batch_size: 64,
            seed: 0,
            weights: LossWeights::default(),
            center_alpha: T::lit(0.5),
            grad_clip: None,
            schedule: Schedule::default(),
            adam: AdamConfig::default(),
            checkpoint_every: None,
        }
    }
}

impl<T: Scalar> TrainRunConfig<T> {
    pub fn full_epochs(&self) -> usize {
        self.epochs.saturating_sub(self.pretrain_epochs)
    }

    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if self.pretrain_epochs > self.epochs {
            return Err(Error::Validation(format!(
                "pretrain epochs {} exceed total epochs {}",
                self.pretrain_epochs, self.epochs
            )));
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::Validation(format!(
                "batch size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        self.weights.validate()?;
        if !(self.center_alpha.is_finite() && self.center_alpha >= T::zero()) {
            return Err(Error::Validation("center alpha must be >= 0".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > T::zero()) {
                return Err(Error::Validation("gradient clip must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Batch-size-weighted epoch averages.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord<T> {
    pub stage: Stage,
    /// Epoch index counted over both stages, starting at 0.
    pub epoch: usize,
    pub lr: f64,
    /// Every term and the weighted total of the full objective.
    pub report: LossReport<T>,
    /// Value of the objective actually minimized in this stage.
    pub objective: T,
    /// Zero-variance latent rows seen by the correlation loss.
    pub degenerate_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory<T> {
    pub records: Vec<EpochRecord<T>>,
    pub steps: usize,
}

impl<T: Scalar> TrainHistory<T> {
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &EpochRecord<T>> {
        self.records.iter().filter(move |r| r.stage == stage)
    }
}

/// Both branches on one batch with fixed noise: every loss term plus the
/// sampled codes `(terms, z_v, z_a)`.
pub fn batch_losses<'t, T: Scalar>(
    model: &BoundModel<'t, T>,
    batch: &Batch<T>,
    eps_v: &Tensor<T>,
    eps_a: &Tensor<T>,
    centers: &Tensor<T>,
) -> Result<(LossTerms<'t, T>, Var<'t, T>, Var<'t, T>)> {
    let tape = model.enc_visual.weight.tape();
    let x_v = tape.constant(batch.visual.clone());
    let x_a = tape.constant(batch.audio.clone());
    let v = model.encode_sample(x_v, Modality::Visual, eps_v)?;
    let a = model.encode_sample(x_a, Modality::Audio, eps_a)?;
    let codes = BatchCodes {
        x_v,
        x_v_hat: model.decode(v.z, Modality::Visual)?,
        x_a,
        x_a_hat: model.decode(a.z, Modality::Audio)?,
        mu_v: v.mu,
        log_var_v: v.log_var,
        mu_a: a.mu,
        log_var_a: a.log_var,
        z_v: v.z,
        z_a: a.z,
        pred_v: model.classify(v.z, Modality::Visual)?,
        pred_a: model.classify(a.z, Modality::Audio)?,
        labels: &batch.labels,
        one_hot: &batch.one_hot,
        centers,
    };
    Ok((LossTerms::compute(&codes)?, v.z, a.z))
}

struct StepOutcome<T> {
    report: LossReport<T>,
    objective: T,
    degenerate_rows: usize,
}

/// Forward pass, loss, backward and Adam update for one batch.
fn step<T: Scalar>(
    params: &mut ModelParams<T>,
    adam: &mut AdamState<T>,
    batch: &Batch<T>,
    rng: &mut ChaCha8Rng,
    stage: Stage,
    cfg: &TrainRunConfig<T>,
    lr: T,
) -> Result<StepOutcome<T>> {
    let n = batch.labels.len();
    let latent = params.config.latent;
    let eps_v = sample_noise(n, latent, rng);
    let eps_a = sample_noise(n, latent, rng);

    let tape = Tape::new();
    let model = params.bind(&tape);
    let (terms, z_v, z_a) = batch_losses(&model, batch, &eps_v, &eps_a, &params.centers)?;
    let report = terms.report(&cfg.weights);
    let objective: Var<'_, T> = match stage {
        Stage::Pretrain => terms.vae,
        Stage::Full => terms.total(&cfg.weights)?,
    };
    let objective_value = objective.value().item();
    let bad_term = match stage {
        Stage::Pretrain => [("rec", report.rec), ("kl", report.kl), ("vae", report.vae)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(name, _)| name),
        Stage::Full => report.non_finite_term(),
    };
    if let Some(term) = bad_term {
        return Err(Error::Diverged { term, epoch: 0 });
    }

    let mut grads = Gradients::new();
    tape.backward(objective, &mut grads)?;
    if let Some(cap) = cfg.grad_clip {
        let norm = grads.norm();
        if norm > cap {
            grads.scale_all(cap / norm);
        }
    }
    let z_v = z_v.value();
    let z_a = z_a.value();
    let degenerate_rows = tape.degenerate_rows();
    drop(tape);

    adam.step(&mut params.trainable_mut(), &grads, lr)?;
    if stage == Stage::Full {
        params.centers =
            update_centers(&params.centers, &z_v, &z_a, &batch.labels, cfg.center_alpha)?;
    }
    Ok(StepOutcome {
        report,
        objective: objective_value,
        degenerate_rows,
    })
}

fn run_stage<T: Scalar>(
    params: &mut ModelParams<T>,
    data: &PairedDataset<T>,
    cfg: &TrainRunConfig<T>,
    stage: Stage,
    first_epoch: usize,
    epochs: usize,
    history: &mut TrainHistory<T>,
    observer: &mut dyn FnMut(&EpochRecord<T>, &ModelParams<T>) -> Result<()>,
) -> Result<()> {
    cfg.validate(data.len())?;
    check_dims(params, data)?;
    let mut adam = AdamState::new(&params.trainable(), cfg.adam);
    let m = T::from_usize_exact(data.len());
    let stream = match stage {
        Stage::Pretrain => PRETRAIN_STREAM,
        Stage::Full => FULL_STREAM,
    };

    for local in 0..epochs {
        let epoch = first_epoch + local;
        let lr = cfg.schedule.lr_at(local);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream + epoch as u64);

        let mut sums = [T::zero(); 7];
        let mut objective = T::zero();
        let mut degenerate_rows = 0;
        for idx in make_batches(data.len(), cfg.batch_size, cfg.seed, epoch)? {
            let batch = data.batch(&idx);
            let out =
                step(params, &mut adam, &batch, &mut rng, stage, cfg, T::lit(lr)).map_err(|e| {
                    match e {
                        Error::Diverged { term, .. } => Error::Diverged { term, epoch },
                        other => other,
                    }
                })?;
            history.steps += 1;
            let w = T::from_usize_exact(idx.len()) / m;
            let r = &out.report;
            for (s, v) in sums
                .iter_mut()
                .zip([r.rec, r.kl, r.vae, r.corr, r.dist, r.discr, r.center])
            {
                *s += w * v;
            }
            objective += w * out.objective;
            degenerate_rows += out.degenerate_rows;
        }
        let parts = crate::losses::LossParts {
            rec: sums[0],
            kl: sums[1],
            vae: sums[2],
            corr: sums[3],
            dist: sums[4],
            discr: sums[5],
            center: sums[6],
        };
        let record = EpochRecord {
            stage,
            epoch,
            lr,
            report: crate::losses::total_loss(parts, &cfg.weights),
            objective,
            degenerate_rows,
        };
        observer(&record, params)?;
        history.records.push(record);
    }
    Ok(())
}

fn check_dims<T: Scalar>(params: &ModelParams<T>, data: &PairedDataset<T>) -> Result<()> {
    for modality in [Modality::Visual, Modality::Audio] {
        let expected = params.config.input_dim(modality);
        let got = data.features(modality).cols();
        if got != expected {
            return Err(Error::FeatureDim {
                modality: modality.name(),
                got,
                expected,
            });
        }
    }
    if data.classes() != params.config.classes {
        return Err(Error::Validation(format!(
            "dataset has {} classes, model expects {}",
            data.classes(),
            params.config.classes
        )));
    }
    Ok(())
}

/// Minimizes the VAE loss alone for `cfg.pretrain_epochs` epochs.
pub fn pretrain_vae<T: Scalar>(
    params: &mut ModelParams<T>,
    data: &PairedDataset<T>,
    cfg: &TrainRunConfig<T>,
    observer: &mut dyn FnMut(&EpochRecord<T>, &ModelParams<T>) -> Result<()>,
) -> Result<TrainHistory<T>> {
    let mut history = TrainHistory::default();
    run_stage(
        params,
        data,
        cfg,
        Stage::Pretrain,
        0,
        cfg.pretrain_epochs,
        &mut history,
        observer,
    )?;
    Ok(history)
}

/// Minimizes the weighted total for the remaining epochs, updating the class
/// centers after every batch.
pub fn train_full<T: Scalar>(
    params: &mut ModelParams<T>,
    data: &PairedDataset<T>,
    cfg: &TrainRunConfig<T>,
    observer: &mut dyn FnMut(&EpochRecord<T>, &ModelParams<T>) -> Result<()>,
) -> Result<TrainHistory<T>> {
    let mut history = TrainHistory::default();
    run_stage(
        params,
        data,
        cfg,
        Stage::Full,
        cfg.pretrain_epochs,
        cfg.full_epochs(),
        &mut history,
        observer,
    )?;
    Ok(history)
}

/// Pretraining followed by full training.
pub fn train<T: Scalar>(
    params: &mut ModelParams<T>,
    data: &PairedDataset<T>,
    cfg: &TrainRunConfig<T>,
    observer: &mut dyn FnMut(&EpochRecord<T>, &ModelParams<T>) -> Result<()>,
) -> Result<TrainHistory<T>> {
    let mut history = pretrain_vae(params, data, cfg, observer)?;
    let full = train_full(params, data, cfg, observer)?;
    history.records.extend(full.records);
    history.steps += full.steps;
    Ok(history)
}
