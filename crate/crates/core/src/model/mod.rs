//! Dual-branch VAE: per-modality encoders into a shared latent space,
//! Gaussian reparameterization, per-modality classifier heads and decoders.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Visual,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Visual => "visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nonlinearity applied after each hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Every layer is linear.
    #[default]
    Identity,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Validation(format!("unknown activation {other:?}"))),
        }
    }
}

/// Layer widths. Defaults are the VEGAS configuration: 1024-d visual and
/// 128-d audio inputs, a 512-d encoder layer, a 64-d common subspace and ten
/// categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_visual: usize,
    pub d_audio: usize,
    pub hidden: usize,
    pub latent: usize,
    pub classes: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_visual: 1024,
            d_audio: 128,
            hidden: 512,
            latent: 64,
            classes: 10,
            activation: Activation::Identity,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_visual", self.d_visual),
            ("d_audio", self.d_audio),
            ("hidden", self.hidden),
            ("latent", self.latent),
            ("classes", self.classes),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Validation(format!(
                "model dimension {name} must be >= 1"
            )));
        }
        if self.latent > self.hidden {
            return Err(Error::Validation(format!(
                "latent dim {} exceeds hidden dim {}",
                self.latent, self.hidden
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Audio => self.d_audio,
            Modality::Visual => self.d_visual,
        }
    }
}

/// Fully-connected layer `y = x·W + b` with `W: in × out`, `b: 1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(input, output),
            bias: Tensor::zeros(1, output),
        }
    }

    /// Weights uniform in ±1/√fan_in, zero bias.
    fn uniform(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Tensor::from_fn(input, output, |_, _| {
                T::lit(rng.random_range(-bound..bound))
            }),
            bias: Tensor::zeros(1, output),
        }
    }
}

/// Every trainable tensor of both branches, plus the class centers.
///
/// The μ and log σ² heads are single parameter sets used by both branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub enc_visual: Linear<T>,
    pub enc_audio: Linear<T>,
    pub mu_head: Linear<T>,
    pub logvar_head: Linear<T>,
    pub cls_visual: Linear<T>,
    pub cls_audio: Linear<T>,
    pub dec_visual_hidden: Linear<T>,
    pub dec_visual_out: Linear<T>,
    pub dec_audio_hidden: Linear<T>,
    pub dec_audio_out: Linear<T>,
    /// `classes × latent`; maintained by the center update rule, not by the
    /// optimizer.
    pub centers: Tensor<T>,
}

/// Names of the optimizer-managed tensors, in slot order.
pub const PARAM_NAMES: [&str; 20] = [
    "enc_visual.weight",
    "enc_visual.bias",
    "enc_audio.weight",
    "enc_audio.bias",
    "mu_head.weight",
    "mu_head.bias",
    "logvar_head.weight",
    "logvar_head.bias",
    "cls_visual.weight",
    "cls_visual.bias",
    "cls_audio.weight",
    "cls_audio.bias",
    "dec_visual_hidden.weight",
    "dec_visual_hidden.bias",
    "dec_visual_out.weight",
    "dec_visual_out.bias",
    "dec_audio_hidden.weight",
    "dec_audio_hidden.bias",
    "dec_audio_out.weight",
    "dec_audio_out.bias",
];

pub const CENTERS_NAME: &str = "centers";

impl<T: Scalar> ModelParams<T> {
    /// Randomly initialized parameters, deterministic per `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config;
        let mut layer = |i, o| Linear::uniform(i, o, &mut rng);
        Ok(Self {
            config,
            enc_visual: layer(c.d_visual, c.hidden),
            enc_audio: layer(c.d_audio, c.hidden),
            mu_head: layer(c.hidden, c.latent),
            logvar_head: layer(c.hidden, c.latent),
            cls_visual: layer(c.latent, c.classes),
            cls_audio: layer(c.latent, c.classes),
            dec_visual_hidden: layer(c.latent, c.hidden),
            dec_visual_out: layer(c.hidden, c.d_visual),
            dec_audio_hidden: layer(c.latent, c.hidden),
            dec_audio_out: layer(c.hidden, c.d_audio),
            centers: Tensor::zeros(c.classes, c.latent),
        })
    }

    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        Ok(Self {
            config,
            enc_visual: Linear::zeros(c.d_visual, c.hidden),
            enc_audio: Linear::zeros(c.d_audio, c.hidden),
            mu_head: Linear::zeros(c.hidden, c.latent),
            logvar_head: Linear::zeros(c.hidden, c.latent),
            cls_visual: Linear::zeros(c.latent, c.classes),
            cls_audio: Linear::zeros(c.latent, c.classes),
            dec_visual_hidden: Linear::zeros(c.latent, c.hidden),
            dec_visual_out: Linear::zeros(c.hidden, c.d_visual),
            dec_audio_hidden: Linear::zeros(c.latent, c.hidden),
            dec_audio_out: Linear::zeros(c.hidden, c.d_audio),
            centers: Tensor::zeros(c.classes, c.latent),
        })
    }

    fn layers(&self) -> [&Linear<T>; 10] {
        [
            &self.enc_visual,
            &self.enc_audio,
            &self.mu_head,
            &self.logvar_head,
            &self.cls_visual,
            &self.cls_audio,
            &self.dec_visual_hidden,
            &self.dec_visual_out,
            &self.dec_audio_hidden,
            &self.dec_audio_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut Linear<T>; 10] {
        [
            &mut self.enc_visual,
            &mut self.enc_audio,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.cls_visual,
            &mut self.cls_audio,
            &mut self.dec_visual_hidden,
            &mut self.dec_visual_out,
            &mut self.dec_audio_hidden,
            &mut self.dec_audio_out,
        ]
    }

    /// Optimizer-managed tensors in slot order (see [`PARAM_NAMES`]).
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        self.layers()
            .into_iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Every tensor with its checkpoint name, centers last.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out: Vec<_> = PARAM_NAMES.iter().copied().zip(self.trainable()).collect();
        out.push((CENTERS_NAME, &self.centers));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Registers every trainable tensor on `tape` as a gradient-receiving
    /// parameter.
    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> BoundModel<'t, T> {
        self.bind_with(tape, true)
    }

    /// Registers the parameters as constants (no gradients).
    pub fn bind_frozen<'t>(&self, tape: &'t Tape<T>) -> BoundModel<'t, T> {
        self.bind_with(tape, false)
    }

    fn bind_with<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> BoundModel<'t, T> {
        let mut slot = 0;
        let mut bind_layer = |l: &Linear<T>| {
            let mut leaf = |t: &Tensor<T>| {
                let v = if trainable {
                    tape.param(slot, t.clone())
                } else {
                    tape.constant(t.clone())
                };
                slot += 1;
                v
            };
            BoundLinear {
                weight: leaf(&l.weight),
                bias: leaf(&l.bias),
            }
        };
        BoundModel {
            config: self.config,
            enc_visual: bind_layer(&self.enc_visual),
            enc_audio: bind_layer(&self.enc_audio),
            mu_head: bind_layer(&self.mu_head),
            logvar_head: bind_layer(&self.logvar_head),
            cls_visual: bind_layer(&self.cls_visual),
            cls_audio: bind_layer(&self.cls_audio),
            dec_visual_hidden: bind_layer(&self.dec_visual_hidden),
            dec_visual_out: bind_layer(&self.dec_visual_out),
            dec_audio_hidden: bind_layer(&self.dec_audio_hidden),
            dec_audio_out: bind_layer(&self.dec_audio_out),
        }
    }

    /// Latent statistics for `x` (no sampling; `z == mu`, `eps == 0`).
    pub fn encode(&self, x: &Tensor<T>, modality: Modality) -> Result<LatentCode<T>> {
        let tape = Tape::new();
        let model = self.bind_frozen(&tape);
        let (mu, log_var) = model.encode(tape.constant(x.clone()), modality)?;
        Ok(LatentCode::deterministic(mu.value(), log_var.value()))
    }

    pub fn classify(&self, z: &Tensor<T>, modality: Modality) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let model = self.bind_frozen(&tape);
        Ok(model.classify(tape.constant(z.clone()), modality)?.value())
    }

    pub fn decode(&self, z: &Tensor<T>, modality: Modality) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let model = self.bind_frozen(&tape);
        Ok(model.decode(tape.constant(z.clone()), modality)?.value())
    }

    /// Evaluation-time embedding: the posterior mean, without sampling.
    pub fn embed_for_retrieval(&self, x: &Tensor<T>, modality: Modality) -> Result<Tensor<T>> {
        Ok(self.encode(x, modality)?.mu)
    }
}

/// Per-sample Gaussian posterior in the shared latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T> {
    pub mu: Tensor<T>,
    pub log_var: Tensor<T>,
    /// Noise used to draw `z`.
    pub eps: Tensor<T>,
    pub z: Tensor<T>,
}

impl<T: Scalar> LatentCode<T> {
    pub fn deterministic(mu: Tensor<T>, log_var: Tensor<T>) -> Self {
        let eps = Tensor::zeros(mu.rows(), mu.cols());
        Self {
            z: mu.clone(),
            mu,
            log_var,
            eps,
        }
    }

    /// `z = mu + exp(log_var / 2) ⊙ eps`.
    pub fn reparameterize(&self, eps: &Tensor<T>) -> Result<Self> {
        self.mu.expect_same_shape(eps, "reparameterize")?;
        let half = T::lit(0.5);
        let std = self.log_var.map(|lv| (lv * half).exp());
        let z = self.mu.add(&std.mul(eps)?)?;
        Ok(Self {
            mu: self.mu.clone(),
            log_var: self.log_var.clone(),
            eps: eps.clone(),
            z,
        })
    }
}

/// Standard-normal noise of the given shape.
pub fn sample_noise<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<T> {
    Tensor::from_fn(rows, cols, |_, _| {
        T::lit(rng.sample::<f64, _>(rand_distr::StandardNormal))
    })
}

#[derive(Clone, Copy)]
pub struct BoundLinear<'t, T> {
    pub weight: Var<'t, T>,
    pub bias: Var<'t, T>,
}

impl<'t, T: Scalar> BoundLinear<'t, T> {
    pub fn forward(&self, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.matmul(self.weight)?.add_row(self.bias)
    }
}

/// [`ModelParams`] registered on a tape.
#[derive(Clone, Copy)]
pub struct BoundModel<'t, T> {
    pub config: ModelConfig,
    pub enc_visual: BoundLinear<'t, T>,
    pub enc_audio: BoundLinear<'t, T>,
    pub mu_head: BoundLinear<'t, T>,
    pub logvar_head: BoundLinear<'t, T>,
    pub cls_visual: BoundLinear<'t, T>,
    pub cls_audio: BoundLinear<'t, T>,
    pub dec_visual_hidden: BoundLinear<'t, T>,
    pub dec_visual_out: BoundLinear<'t, T>,
    pub dec_audio_hidden: BoundLinear<'t, T>,
    pub dec_audio_out: BoundLinear<'t, T>,
}

/// Latent statistics recorded on a tape.
#[derive(Clone, Copy)]
pub struct LatentVars<'t, T> {
    pub mu: Var<'t, T>,
    pub log_var: Var<'t, T>,
    pub z: Var<'t, T>,
}

impl<'t, T: Scalar> BoundModel<'t, T> {
    fn activate(&self, x: Var<'t, T>) -> Var<'t, T> {
        match self.config.activation {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Modality encoder followed by the shared μ and log σ² heads.
    pub fn encode(&self, x: Var<'t, T>, modality: Modality) -> Result<(Var<'t, T>, Var<'t, T>)> {
        let expected = self.config.input_dim(modality);
        let (_, got) = x.shape();
        if got != expected {
            return Err(Error::FeatureDim {
                modality: modality.name(),
                got,
                expected,
            });
        }
        let enc = match modality {
            Modality::Visual => self.enc_visual,
            Modality::Audio => self.enc_audio,
        };
        let h = self.activate(enc.forward(x)?);
        Ok((self.mu_head.forward(h)?, self.logvar_head.forward(h)?))
    }

    /// `mu + exp(log_var/2) ⊙ eps`; `eps` is a constant so no gradient
    /// reaches it.
    pub fn reparameterize(
        &self,
        mu: Var<'t, T>,
        log_var: Var<'t, T>,
        eps: &Tensor<T>,
    ) -> Result<Var<'t, T>> {
        let tape = mu.tape();
        let std = log_var.scale(T::lit(0.5)).exp();
        mu.add(std.mul(tape.constant(eps.clone()))?)
    }

    /// Encodes and samples in one step.
    pub fn encode_sample(
        &self,
        x: Var<'t, T>,
        modality: Modality,
        eps: &Tensor<T>,
    ) -> Result<LatentVars<'t, T>> {
        let (mu, log_var) = self.encode(x, modality)?;
        let z = self.reparameterize(mu, log_var, eps)?;
        Ok(LatentVars { mu, log_var, z })
    }

    /// Linear classifier into the category space; no activation.
    pub fn classify(&self, z: Var<'t, T>, modality: Modality) -> Result<Var<'t, T>> {
        self.check_latent(z)?;
        match modality {
            Modality::Visual => self.cls_visual.forward(z),
            Modality::Audio => self.cls_audio.forward(z),
        }
    }

    pub fn decode(&self, z: Var<'t, T>, modality: Modality) -> Result<Var<'t, T>> {
        self.check_latent(z)?;
        let (hidden, out) = match modality {
            Modality::Visual => (self.dec_visual_hidden, self.dec_visual_out),
            Modality::Audio => (self.dec_audio_hidden, self.dec_audio_out),
        };
        let h = self.activate(hidden.forward(z)?);
        out.forward(h)
    }

    fn check_latent(&self, z: Var<'t, T>) -> Result<()> {
        let shape = z.shape();
        if shape.1 != self.config.latent {
            return Err(Error::Dimension {
                op: "latent input",
                lhs: shape,
                rhs: (shape.0, self.config.latent),
            });
        }
        Ok(())
    }
}
