//! Run configuration: defaults, a `key=value` config file, then command-line
//! overrides, in that order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vaecca::data::{FeatureFormat, SyntheticSpec};
use vaecca::losses::LossWeights;
use vaecca::model::Activation;
use vaecca::optim::{Schedule, TrainRunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Training split manifest; synthetic data is generated when absent.
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub format: FeatureFormat,

    pub classes: usize,
    pub per_class: usize,
    pub test_fraction: f64,
    pub proto_dim: usize,
    pub d_visual: usize,
    pub d_audio: usize,
    pub prototype_scale: f64,
    pub jitter: f64,
    pub noise: f64,

    pub hidden: usize,
    pub latent: usize,
    pub activation: Activation,

    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub lr_scale: f64,
    pub center_alpha: f64,
    pub grad_clip: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub discriminative_weight: f64,

    pub cca_k: Option<usize>,
    pub cca_ridge: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SyntheticSpec::default();
        let train = TrainRunConfig::<f64>::default();
        let w = LossWeights::<f64>::default();
        Self {
            out: PathBuf::from("run"),
            seed: 0,
            train: None,
            test: None,
            checkpoint: None,
            format: FeatureFormat::Csv,
            classes: synth.classes,
            per_class: synth.per_class,
            test_fraction: synth.test_fraction,
            proto_dim: synth.latent_dim,
            d_visual: synth.d_visual,
            d_audio: synth.d_audio,
            prototype_scale: synth.prototype_scale,
            jitter: synth.jitter,
            noise: synth.noise,
            hidden: 512,
            latent: 64,
            activation: Activation::Identity,
            epochs: train.epochs,
            pretrain_epochs: train.pretrain_epochs,
            batch_size: train.batch_size,
            lr_scale: 1.0,
            center_alpha: 0.5,
            grad_clip: None,
            checkpoint_every: None,
            lambda1: w.lambda1,
            lambda2: w.lambda2,
            lambda3: w.lambda3,
            lambda4: w.lambda4,
            discriminative_weight: w.discriminative,
            cca_k: None,
            cca_ridge: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value == "none" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref()
        .map_or_else(|| "none".to_string(), ToString::to_string)
}

impl RunConfig {
    /// Sets one key. Keys use `snake_case`; dashes are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse(k, value)?,
            "train" => self.train = optional(k, value)?,
            "test" => self.test = optional(k, value)?,
            "checkpoint" => self.checkpoint = optional(k, value)?,
            "format" => self.format = parse(k, value)?,
            "classes" => self.classes = parse(k, value)?,
            "per_class" => self.per_class = parse(k, value)?,
            "test_fraction" => self.test_fraction = parse(k, value)?,
            "proto_dim" => self.proto_dim = parse(k, value)?,
            "d_visual" => self.d_visual = parse(k, value)?,
            "d_audio" => self.d_audio = parse(k, value)?,
            "prototype_scale" => self.prototype_scale = parse(k, value)?,
            "jitter" => self.jitter = parse(k, value)?,
            "noise" => self.noise = parse(k, value)?,
            "hidden" => self.hidden = parse(k, value)?,
            "latent" => self.latent = parse(k, value)?,
            "activation" => self.activation = parse(k, value)?,
            "epochs" => self.epochs = parse(k, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(k, value)?,
            "batch_size" => self.batch_size = parse(k, value)?,
            "lr_scale" => self.lr_scale = parse(k, value)?,
            "center_alpha" => self.center_alpha = parse(k, value)?,
            "grad_clip" => self.grad_clip = optional(k, value)?,
            "checkpoint_every" => self.checkpoint_every = optional(k, value)?,
            "lambda1" => self.lambda1 = parse(k, value)?,
            "lambda2" => self.lambda2 = parse(k, value)?,
            "lambda3" => self.lambda3 = parse(k, value)?,
            "lambda4" => self.lambda4 = parse(k, value)?,
            "discriminative_weight" => self.discriminative_weight = parse(k, value)?,
            "cca_k" => self.cca_k = optional(k, value)?,
            "cca_ridge" => self.cca_ridge = optional(k, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Applies a config file: one `key=value` per line, `#` comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), n + 1);
            };
            self.set(key, value)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| show(&p.as_ref().map(|p| p.display().to_string()));
        vec![
            ("out", self.out.display().to_string()),
            ("seed", self.seed.to_string()),
            ("train", path(&self.train)),
            ("test", path(&self.test)),
            ("checkpoint", path(&self.checkpoint)),
            ("format", format_name(self.format).to_string()),
            ("classes", self.classes.to_string()),
            ("per_class", self.per_class.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("proto_dim", self.proto_dim.to_string()),
            ("d_visual", self.d_visual.to_string()),
            ("d_audio", self.d_audio.to_string()),
            ("prototype_scale", self.prototype_scale.to_string()),
            ("jitter", self.jitter.to_string()),
            ("noise", self.noise.to_string()),
            ("hidden", self.hidden.to_string()),
            ("latent", self.latent.to_string()),
            ("activation", self.activation.name().to_string()),
            ("epochs", self.epochs.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr_scale", self.lr_scale.to_string()),
            ("center_alpha", self.center_alpha.to_string()),
            ("grad_clip", show(&self.grad_clip)),
            ("checkpoint_every", show(&self.checkpoint_every)),
            ("lambda1", self.lambda1.to_string()),
            ("lambda2", self.lambda2.to_string()),
            ("lambda3", self.lambda3.to_string()),
            ("lambda4", self.lambda4.to_string()),
            (
                "discriminative_weight",
                self.discriminative_weight.to_string(),
            ),
            ("cca_k", show(&self.cca_k)),
            ("cca_ridge", show(&self.cca_ridge)),
        ]
    }

    /// Text form readable by [`RunConfig::apply_file`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            per_class: self.per_class,
            test_fraction: self.test_fraction,
            latent_dim: self.proto_dim,
            d_visual: self.d_visual,
            d_audio: self.d_audio,
            prototype_scale: self.prototype_scale,
            jitter: self.jitter,
            noise: self.noise,
            seed: self.seed,
        }
    }

    pub fn weights(&self) -> LossWeights<f64> {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            lambda4: self.lambda4,
            discriminative: self.discriminative_weight,
        }
    }

    pub fn train_config(&self) -> TrainRunConfig<f64> {
        TrainRunConfig {
            epochs: self.epochs,
            pretrain_epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            weights: self.weights(),
            center_alpha: self.center_alpha,
            grad_clip: self.grad_clip,
            schedule: Schedule::default().scaled(self.lr_scale),
            checkpoint_every: self.checkpoint_every,
            ..TrainRunConfig::default()
        }
    }
}

fn format_name(f: FeatureFormat) -> &'static str {
    match f {
        FeatureFormat::Csv => "csv",
        FeatureFormat::Binary => "binary",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.set("grad-clip", "5").unwrap();
        c.set("test", "data/test.manifest").unwrap();
        let mut back = RunConfig::default();
        for line in c.to_text().lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k, v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::default().set("lambda5", "1").is_err());
        assert!(RunConfig::default().set("epochs", "many").is_err());
    }
}
