//! `vaecca`: synthetic data, training, evaluation, ablation and the CCA
//! baseline from one binary.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vaecca::cca;
use vaecca::data::{
    gen_synthetic, load_dataset, standardize, write_dataset, Manifest, PairedDataset,
};
use vaecca::eval::{evaluate_embeddings, EvalReport};
use vaecca::losses::AblationArm;
use vaecca::model::{read_checkpoint, write_checkpoint, Modality, ModelConfig, ModelParams};
use vaecca::optim::train;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "vaecca",
    version,
    about = "Audio-visual cross-modal retrieval with a dual-branch VAE"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset (train and test splits).
    Synth(RunArgs),
    /// Pretrain the VAE, then train the full objective.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(RunArgs),
    /// Train and evaluate the center, correlation, distance and full arms.
    Ablate(RunArgs),
    /// Fit linear CCA on the train split and evaluate it on the test split.
    BaselineCca(RunArgs),
}

macro_rules! run_args {
    ($($field:ident: $help:literal),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        struct RunArgs {
            /// key=value configuration file; flags override it.
            #[arg(long)]
            config: Option<PathBuf>,
            /// Extra override in key=value form; repeatable.
            #[arg(long = "set", value_name = "KEY=VALUE")]
            set: Vec<String>,
            $(
                #[doc = $help]
                #[arg(long)]
                $field: Option<String>,
            )*
        }

        impl RunArgs {
            fn overrides(&self) -> Vec<(&'static str, String)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field), v.clone()));
                    }
                )*
                out
            }
        }
    };
}

run_args! {
    out: "Output directory",
    seed: "Seed for data generation, initialization, noise and shuffling",
    train: "Training split manifest (synthetic data when omitted)",
    test: "Test split manifest (synthetic data when omitted)",
    checkpoint: "Checkpoint to evaluate (default <out>/model.ckpt)",
    format: "Feature file format written by synth: csv or binary",
    classes: "Synthetic: number of classes",
    per_class: "Synthetic: samples per class before the split",
    test_fraction: "Synthetic: held-out fraction per class",
    proto_dim: "Synthetic: prototype dimension",
    d_visual: "Synthetic: visual feature dimension",
    d_audio: "Synthetic: audio feature dimension",
    prototype_scale: "Synthetic: prototype standard deviation",
    jitter: "Synthetic: per-sample latent jitter",
    noise: "Synthetic: observation noise",
    hidden: "Encoder/decoder hidden width",
    latent: "Common subspace dimension",
    activation: "Hidden activation: identity or tanh",
    epochs: "Total epochs over both stages",
    pretrain_epochs: "Epochs of VAE pretraining",
    batch_size: "Batch size",
    lr_scale: "Multiplier on every learning rate of the schedule",
    center_alpha: "Center update rate",
    grad_clip: "Gradient norm cap, or none",
    checkpoint_every: "Write a checkpoint every N epochs, or none",
    lambda1: "Weight of the VAE loss",
    lambda2: "Weight of the correlation loss",
    lambda3: "Weight of the distance loss",
    lambda4: "Weight of the center loss",
    discriminative_weight: "Weight of the discriminative loss",
    cca_k: "CCA: number of canonical pairs",
    cca_ridge: "CCA: covariance ridge, or none for the trace-scaled default",
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for item in &self.set {
            let Some((k, v)) = item.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {item:?}");
            };
            cfg.set(k, v)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }
}

struct Splits {
    train: Option<PairedDataset<f64>>,
    test: Option<PairedDataset<f64>>,
}

fn load_splits(cfg: &RunConfig, need_train: bool, need_test: bool) -> Result<Splits> {
    if cfg.train.is_none() && cfg.test.is_none() {
        let (train, test) = gen_synthetic::<f64>(&cfg.synthetic_spec())?;
        return Ok(Splits {
            train: Some(train),
            test: Some(test),
        });
    }
    let load = |p: &Option<PathBuf>,
                what: &str,
                needed: bool|
     -> Result<Option<(PairedDataset<f64>, bool)>> {
        match p {
            Some(path) => {
                let normalize = Manifest::read(path)?.normalize;
                let ds = load_dataset(path).with_context(|| format!("loading {what} split"))?;
                Ok(Some((ds, normalize)))
            }
            None if needed => {
                bail!("a {what} manifest is required when the other split comes from a file")
            }
            None => Ok(None),
        }
    };
    let train = load(&cfg.train, "train", need_train)?;
    let test = load(&cfg.test, "test", need_test)?;
    let normalize = train.as_ref().is_some_and(|t| t.1) || test.as_ref().is_some_and(|t| t.1);
    let (mut train, mut test) = (train.map(|t| t.0), test.map(|t| t.0));
    if normalize {
        let Some(tr) = &train else {
            bail!("normalize=zscore needs the train manifest for its statistics");
        };
        let mut others: Vec<&mut PairedDataset<f64>> = test.iter_mut().collect();
        train = Some(standardize(tr, &mut others)?);
    }
    Ok(Splits { train, test })
}

fn model_config(cfg: &RunConfig, data: &PairedDataset<f64>) -> ModelConfig {
    ModelConfig {
        d_visual: data.visual.dim(),
        d_audio: data.audio.dim(),
        hidden: cfg.hidden,
        latent: cfg.latent,
        classes: data.classes(),
        activation: cfg.activation,
    }
}

fn embed_and_evaluate(params: &ModelParams<f64>, test: &PairedDataset<f64>) -> Result<EvalReport> {
    let a = params.embed_for_retrieval(&test.audio.values, Modality::Audio)?;
    let v = params.embed_for_retrieval(&test.visual.values, Modality::Visual)?;
    Ok(evaluate_embeddings(
        &a,
        &v,
        test.labels.as_slice(),
        test.classes(),
    )?)
}

fn print_map(label: &str, r: &EvalReport) {
    eprintln!(
        "{label}: audio2visual {:.4}  visual2audio {:.4}  average {:.4}",
        r.audio2visual.map, r.visual2audio.map, r.average
    );
}

/// Trains one model into `dir`, writing the resolved config, history and
/// checkpoints.
fn train_into(
    cfg: &RunConfig,
    data: &PairedDataset<f64>,
    dir: &Path,
    tag: &str,
) -> Result<ModelParams<f64>> {
    output::write(&dir.join(output::CONFIG_FILE), &cfg.to_text())?;
    let mut params = ModelParams::init(model_config(cfg, data), cfg.seed)?;
    let tcfg = cfg.train_config();
    let every = tcfg.checkpoint_every;
    let mut observer =
        |r: &vaecca::optim::EpochRecord<f64>, p: &ModelParams<f64>| -> vaecca::Result<()> {
            eprintln!(
                "[{tag}] epoch {:>4} {:<8} lr {:.2e}  objective {:.6}  total {:.6}",
                r.epoch + 1,
                r.stage,
                r.lr,
                r.objective,
                r.report.total
            );
            if let Some(n) = every {
                if n > 0 && (r.epoch + 1) % n == 0 {
                    let path = dir
                        .join("checkpoints")
                        .join(format!("epoch_{:04}.ckpt", r.epoch + 1));
                    write_checkpoint(p, path)?;
                }
            }
            Ok(())
        };
    let history = train(&mut params, data, &tcfg, &mut observer)
        .with_context(|| format!("training {tag}"))?;
    output::write(
        &dir.join(output::HISTORY_FILE),
        &output::history_csv(&history.records),
    )?;
    write_checkpoint(&params, dir.join(output::CHECKPOINT_FILE))?;
    Ok(params)
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let (train, test) = gen_synthetic::<f64>(&cfg.synthetic_spec())?;
    output::write(&cfg.out.join(output::CONFIG_FILE), &cfg.to_text())?;
    let a = write_dataset(&train, &cfg.out, "train", cfg.format)?;
    let b = write_dataset(&test, &cfg.out, "test", cfg.format)?;
    eprintln!(
        "wrote {} ({} pairs) and {} ({} pairs)",
        a.display(),
        train.len(),
        b.display(),
        test.len()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let splits = load_splits(cfg, true, false)?;
    let data = splits.train.context("no training data")?;
    let params = train_into(cfg, &data, &cfg.out, "train")?;
    if let Some(test) = &splits.test {
        let report = embed_and_evaluate(&params, test)?;
        output::write_eval(&cfg.out.join(output::EVAL_DIR), &report)?;
        print_map("test", &report);
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let splits = load_splits(cfg, false, true)?;
    let test = splits.test.context("no test data")?;
    let ckpt = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out.join(output::CHECKPOINT_FILE));
    let params: ModelParams<f64> = read_checkpoint(&ckpt)?;
    let report = embed_and_evaluate(&params, &test)
        .with_context(|| format!("evaluating {} on the test split", ckpt.display()))?;
    output::write_eval(&cfg.out.join(output::EVAL_DIR), &report)?;
    print_map("test", &report);
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let splits = load_splits(cfg, true, true)?;
    let train_data = splits.train.context("no training data")?;
    let test = splits.test.context("no test data")?;
    output::write(&cfg.out.join(output::CONFIG_FILE), &cfg.to_text())?;
    let mut reports = Vec::new();
    for arm in AblationArm::ALL {
        let w = cfg.weights().for_arm(arm);
        let mut arm_cfg = cfg.clone();
        arm_cfg.lambda1 = w.lambda1;
        arm_cfg.lambda2 = w.lambda2;
        arm_cfg.lambda3 = w.lambda3;
        arm_cfg.lambda4 = w.lambda4;
        arm_cfg.discriminative_weight = w.discriminative;
        let dir = cfg.out.join(arm.slug());
        arm_cfg.out = dir.clone();
        let params = train_into(&arm_cfg, &train_data, &dir, arm.slug())?;
        let report = embed_and_evaluate(&params, &test)?;
        output::write_eval(&dir.join(output::EVAL_DIR), &report)?;
        print_map(arm.label(), &report);
        reports.push((arm.label(), report));
    }
    let rows: Vec<(&str, &EvalReport)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    let table = output::map_table(&rows);
    output::write(&cfg.out.join(output::ABLATION_FILE), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_baseline_cca(cfg: &RunConfig) -> Result<()> {
    let splits = load_splits(cfg, true, true)?;
    let train_data = splits.train.context("no training data")?;
    let test = splits.test.context("no test data")?;
    let (d_a, d_v) = (train_data.audio.dim(), train_data.visual.dim());
    let cap = d_a.min(d_v).min(train_data.len().saturating_sub(1));
    let k = cfg.cca_k.unwrap_or(cap.min(cfg.latent));
    if k == 0 || k > cap {
        bail!("cca_k = {k} must be in 1..={cap} (min of d_audio = {d_a}, d_visual = {d_v}, m - 1)");
    }
    output::write(&cfg.out.join(output::CONFIG_FILE), &cfg.to_text())?;
    let model = cca::fit(
        &train_data.audio.values,
        &train_data.visual.values,
        k,
        cfg.cca_ridge,
    )?;
    let a = model.transform(&test.audio.values, Modality::Audio)?;
    let v = model.transform(&test.visual.values, Modality::Visual)?;
    let report = evaluate_embeddings(&a, &v, test.labels.as_slice(), test.classes())?;
    output::write_eval(&cfg.out.join(output::EVAL_DIR), &report)?;
    print_map("cca", &report);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a.resolve()?),
        Command::Train(a) => cmd_train(&a.resolve()?),
        Command::Eval(a) => cmd_eval(&a.resolve()?),
        Command::Ablate(a) => cmd_ablate(&a.resolve()?),
        Command::BaselineCca(a) => cmd_baseline_cca(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
