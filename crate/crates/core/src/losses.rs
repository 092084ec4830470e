//! Training objectives.
//!
//! Every loss is built on a [`Tape`] so the trainer can differentiate it; a
//! loss over plain tensors is just the same call on constant leaves.
//! Batch-normalized terms divide by the batch size `n`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weights of the auxiliary terms in the total objective.
///
/// `total = w·discr + λ1·vae + λ2·corr + λ3·dist + λ4·center` where `w` is
/// [`LossWeights::discriminative`] (1 unless an ablation switches the
/// classifier term off).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub lambda3: T,
    pub lambda4: T,
    pub discriminative: T,
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            lambda1: T::lit(0.0001),
            lambda2: T::lit(0.001),
            lambda3: T::lit(0.1),
            lambda4: T::lit(0.01),
            discriminative: T::one(),
        }
    }
}

impl<T: Scalar> LossWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.discriminative,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::Validation(format!(
                "loss weights must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }

    /// Weights of one ablation arm derived from `self`. Single-loss arms keep
    /// the VAE term, drop the classifier term and keep only their own λ.
    pub fn for_arm(&self, arm: AblationArm) -> Self {
        let zero = T::zero();
        let base = Self {
            lambda1: self.lambda1,
            lambda2: zero,
            lambda3: zero,
            lambda4: zero,
            discriminative: zero,
        };
        match arm {
            AblationArm::Center => Self {
                lambda4: self.lambda4,
                ..base
            },
            AblationArm::Correlation => Self {
                lambda2: self.lambda2,
                ..base
            },
            AblationArm::Distance => Self {
                lambda3: self.lambda3,
                ..base
            },
            AblationArm::Full => *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationArm {
    Center,
    Correlation,
    Distance,
    Full,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [
        AblationArm::Center,
        AblationArm::Correlation,
        AblationArm::Distance,
        AblationArm::Full,
    ];

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            AblationArm::Center => "With center loss",
            AblationArm::Correlation => "With correlation loss",
            AblationArm::Distance => "With distance",
            AblationArm::Full => "Full our proposed method",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            AblationArm::Center => "center",
            AblationArm::Correlation => "correlation",
            AblationArm::Distance => "distance",
            AblationArm::Full => "full",
        }
    }
}

/// Scalar values of every loss component on one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub rec: T,
    pub kl: T,
    pub vae: T,
    pub corr: T,
    pub dist: T,
    pub discr: T,
    pub center: T,
}

/// [`LossParts`] plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport<T> {
    pub rec: T,
    pub kl: T,
    pub vae: T,
    pub corr: T,
    pub dist: T,
    pub discr: T,
    pub center: T,
    pub total: T,
}

impl<T: Scalar> LossReport<T> {
    pub fn parts(&self) -> LossParts<T> {
        LossParts {
            rec: self.rec,
            kl: self.kl,
            vae: self.vae,
            corr: self.corr,
            dist: self.dist,
            discr: self.discr,
            center: self.center,
        }
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("rec", self.rec),
            ("kl", self.kl),
            ("corr", self.corr),
            ("dist", self.dist),
            ("discr", self.discr),
            ("center", self.center),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// Weighted combination of already computed parts.
pub fn total_loss<T: Scalar>(parts: LossParts<T>, w: &LossWeights<T>) -> LossReport<T> {
    let total = w.discriminative * parts.discr
        + w.lambda1 * parts.vae
        + w.lambda2 * parts.corr
        + w.lambda3 * parts.dist
        + w.lambda4 * parts.center;
    LossReport {
        rec: parts.rec,
        kl: parts.kl,
        vae: parts.vae,
        corr: parts.corr,
        dist: parts.dist,
        discr: parts.discr,
        center: parts.center,
        total,
    }
}

fn batch_size<T: Scalar>(v: Var<'_, T>) -> Result<T> {
    let n = v.shape().0;
    if n == 0 {
        return Err(Error::Empty { op: "loss" });
    }
    Ok(T::from_usize_exact(n))
}

/// `(‖X_v − X̂_v‖²_F + ‖X_a − X̂_a‖²_F) / n`.
pub fn reconstruction_loss<'t, T: Scalar>(
    x_v: Var<'t, T>,
    x_v_hat: Var<'t, T>,
    x_a: Var<'t, T>,
    x_a_hat: Var<'t, T>,
) -> Result<Var<'t, T>> {
    let n = batch_size(x_v)?;
    let v = x_v.sub(x_v_hat)?.square().sum();
    let a = x_a.sub(x_a_hat)?.square().sum();
    Ok(v.add(a)?.scale(T::one() / n))
}

/// Batch mean of `½ Σ_j (μ_j² + σ_j² − 1 − log σ_j²)`, the closed-form
/// `KL(N(μ, σ²) ‖ N(0, 1))`.
pub fn kl_term<'t, T: Scalar>(mu: Var<'t, T>, log_var: Var<'t, T>) -> Result<Var<'t, T>> {
    let n = batch_size(mu)?;
    let (rows, cols) = mu.shape();
    let per_entry = mu
        .square()
        .add(log_var.exp())?
        .sub(log_var)?
        .add_scalar(-T::one());
    debug_assert_eq!(per_entry.shape(), (rows, cols));
    Ok(per_entry.sum().scale(T::lit(0.5) / n))
}

/// KL term summed over both modalities.
pub fn kl_loss<'t, T: Scalar>(
    mu_v: Var<'t, T>,
    log_var_v: Var<'t, T>,
    mu_a: Var<'t, T>,
    log_var_a: Var<'t, T>,
) -> Result<Var<'t, T>> {
    kl_term(mu_v, log_var_v)?.add(kl_term(mu_a, log_var_a)?)
}

pub fn vae_loss<'t, T: Scalar>(rec: Var<'t, T>, kl: Var<'t, T>) -> Result<Var<'t, T>> {
    rec.add(kl)
}

/// Batch-level correlation of two `n × o` matrices: each column is centered
/// over the batch, then `Σ_j cov_j / √(Σ_j var_j(a) · Σ_j var_j(b))`.
pub fn corr<T: Scalar>(za: &Tensor<T>, zb: &Tensor<T>) -> Result<T> {
    za.expect_same_shape(zb, "corr")?;
    if za.rows() < 2 {
        return Err(Error::Degenerate {
            op: "corr",
            detail: "need at least two samples".into(),
        });
    }
    let ca = za.sub(&Tensor::from_fn(za.rows(), za.cols(), {
        let m = za.column_means()?;
        move |_, j| m[(0, j)]
    }))?;
    let cb = zb.sub(&Tensor::from_fn(zb.rows(), zb.cols(), {
        let m = zb.column_means()?;
        move |_, j| m[(0, j)]
    }))?;
    let cov = ca.mul(&cb)?.sum();
    let (na, nb) = (ca.frobenius(), cb.frobenius());
    if na == T::zero() || nb == T::zero() {
        return Err(Error::Degenerate {
            op: "corr",
            detail: "zero variance input".into(),
        });
    }
    Ok((cov / (na * nb)).max(-T::one()).min(T::one()))
}

/// `n_a × n_b` matrix of per-sample correlations: entry `(i, j)` is the
/// Pearson correlation of row `i` of `za` with row `j` of `zb`, treating the
/// latent dimensions as observations. Rows with zero spread correlate 0 with
/// everything (counted in [`Tape::degenerate_rows`]).
pub fn pairwise_corr<'t, T: Scalar>(za: Var<'t, T>, zb: Var<'t, T>) -> Result<Var<'t, T>> {
    let a = za.center_rows().normalize_rows();
    let b = zb.center_rows().normalize_rows();
    a.matmul_t(b)
}

/// 1 where the labels agree, else 0.
pub fn same_category<T: Scalar>(labels_a: &[usize], labels_b: &[usize]) -> Tensor<T> {
    Tensor::from_fn(labels_a.len(), labels_b.len(), |i, j| {
        if labels_a[i] == labels_b[j] {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// `(1/n²) Σ_{i,j} [log(1 + e^{t_ij}) − s_ij·t_ij]` with `t = ½·corr`.
pub fn discrimination_from_corr<'t, T: Scalar>(
    corr: Var<'t, T>,
    same: &Tensor<T>,
) -> Result<Var<'t, T>> {
    let (r, c) = corr.shape();
    if same.shape() != (r, c) {
        return Err(Error::Dimension {
            op: "discrimination",
            lhs: (r, c),
            rhs: same.shape(),
        });
    }
    let t = corr.scale(T::lit(0.5));
    let s = corr.tape().constant(same.clone());
    let per_pair = t.softplus().sub(t.mul(s)?)?;
    let denom = T::from_usize_exact(r * c);
    Ok(per_pair.sum().scale(T::one() / denom))
}

/// One discrimination term between two sets of codes.
pub fn discrimination<'t, T: Scalar>(
    za: Var<'t, T>,
    zb: Var<'t, T>,
    labels_a: &[usize],
    labels_b: &[usize],
) -> Result<Var<'t, T>> {
    if za.shape().0 != labels_a.len() || zb.shape().0 != labels_b.len() {
        return Err(Error::Contract("labels not aligned with codes".into()));
    }
    let c = pairwise_corr(za, zb)?;
    discrimination_from_corr(c, &same_category(labels_a, labels_b))
}

/// Inter-modality (audio, visual) plus both intra-modality terms.
pub fn correlation_loss<'t, T: Scalar>(
    z_v: Var<'t, T>,
    z_a: Var<'t, T>,
    labels: &[usize],
) -> Result<Var<'t, T>> {
    if z_v.shape() != z_a.shape() {
        return Err(Error::Dimension {
            op: "correlation_loss",
            lhs: z_v.shape(),
            rhs: z_a.shape(),
        });
    }
    let inter = discrimination(z_a, z_v, labels, labels)?;
    let intra_v = discrimination(z_v, z_v, labels, labels)?;
    let intra_a = discrimination(z_a, z_a, labels, labels)?;
    inter.add(intra_v)?.add(intra_a)
}

/// `‖Z_v − Z_a‖_F / n`.
pub fn distance_loss<'t, T: Scalar>(z_v: Var<'t, T>, z_a: Var<'t, T>) -> Result<Var<'t, T>> {
    let n = batch_size(z_v)?;
    Ok(z_v.sub(z_a)?.frobenius()?.scale(T::one() / n))
}

fn check_one_hot<T: Scalar>(y: &Tensor<T>) -> Result<()> {
    for i in 0..y.rows() {
        let row = y.row(i);
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Validation(format!("label row {i} is not one-hot")));
        }
    }
    Ok(())
}

/// `‖P_a − Y‖_F / n + ‖P_v − Y‖_F / n`.
pub fn discriminative_loss<'t, T: Scalar>(
    pred_a: Var<'t, T>,
    pred_v: Var<'t, T>,
    one_hot: &Tensor<T>,
) -> Result<Var<'t, T>> {
    check_one_hot(one_hot)?;
    let n = batch_size(pred_a)?;
    let y = pred_a.tape().constant(one_hot.clone());
    let a = pred_a.sub(y)?.frobenius()?;
    let v = pred_v.sub(y)?.frobenius()?;
    Ok(a.scale(T::one() / n).add(v.scale(T::one() / n))?)
}

fn gather_centers<T: Scalar>(centers: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= centers.rows()) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {} centers",
            centers.rows()
        )));
    }
    Ok(centers.select_rows(labels))
}

/// `(½ Σ_i ‖z_v,i − c_{y_i}‖² + ½ Σ_i ‖z_a,i − c_{y_i}‖²) / n`; centers are
/// treated as constants.
pub fn center_loss<'t, T: Scalar>(
    z_v: Var<'t, T>,
    z_a: Var<'t, T>,
    labels: &[usize],
    centers: &Tensor<T>,
) -> Result<Var<'t, T>> {
    if z_v.shape().0 != labels.len() {
        return Err(Error::Contract("labels not aligned with codes".into()));
    }
    let n = batch_size(z_v)?;
    let c = z_v.tape().constant(gather_centers(centers, labels)?);
    let v = z_v.sub(c)?.square().sum();
    let a = z_a.sub(c)?.square().sum();
    Ok(v.add(a)?.scale(T::lit(0.5) / n))
}

/// Moves each class center toward the codes of that class pooled over every
/// matrix in `codes`: `c_j ← c_j − α·Σ_{i∈j}(c_j − z_i)/(1 + n_j)`.
pub fn update_centers_pooled<T: Scalar>(
    centers: &Tensor<T>,
    codes: &[&Tensor<T>],
    labels: &[usize],
    alpha: T,
) -> Result<Tensor<T>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= centers.rows()) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {} centers",
            centers.rows()
        )));
    }
    let (c, o) = centers.shape();
    let mut diff = Tensor::<T>::zeros(c, o);
    let mut counts = vec![0usize; c];
    for z in codes {
        if z.rows() != labels.len() || z.cols() != o {
            return Err(Error::Dimension {
                op: "update_centers",
                lhs: z.shape(),
                rhs: (labels.len(), o),
            });
        }
        for (i, &y) in labels.iter().enumerate() {
            counts[y] += 1;
            for j in 0..o {
                diff[(y, j)] += centers[(y, j)] - z[(i, j)];
            }
        }
    }
    let mut out = centers.clone();
    for (y, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let step = alpha / (T::one() + T::from_usize_exact(n));
        for j in 0..o {
            out[(y, j)] = out[(y, j)] - step * diff[(y, j)];
        }
    }
    Ok(out)
}

/// Center update pooling both modalities.
pub fn update_centers<T: Scalar>(
    centers: &Tensor<T>,
    z_v: &Tensor<T>,
    z_a: &Tensor<T>,
    labels: &[usize],
    alpha: T,
) -> Result<Tensor<T>> {
    update_centers_pooled(centers, &[z_v, z_a], labels, alpha)
}

/// Every loss term of one batch, recorded on a tape.
#[derive(Clone, Copy)]
pub struct LossTerms<'t, T> {
    pub rec: Var<'t, T>,
    pub kl: Var<'t, T>,
    pub vae: Var<'t, T>,
    pub corr: Var<'t, T>,
    pub dist: Var<'t, T>,
    pub discr: Var<'t, T>,
    pub center: Var<'t, T>,
}

/// Inputs of [`LossTerms::compute`] for one batch.
pub struct BatchCodes<'t, 'a, T> {
    pub x_v: Var<'t, T>,
    pub x_v_hat: Var<'t, T>,
    pub x_a: Var<'t, T>,
    pub x_a_hat: Var<'t, T>,
    pub mu_v: Var<'t, T>,
    pub log_var_v: Var<'t, T>,
    pub mu_a: Var<'t, T>,
    pub log_var_a: Var<'t, T>,
    pub z_v: Var<'t, T>,
    pub z_a: Var<'t, T>,
    pub pred_v: Var<'t, T>,
    pub pred_a: Var<'t, T>,
    pub labels: &'a [usize],
    pub one_hot: &'a Tensor<T>,
    pub centers: &'a Tensor<T>,
}

impl<'t, T: Scalar> LossTerms<'t, T> {
    pub fn compute(b: &BatchCodes<'t, '_, T>) -> Result<Self> {
        let rec = reconstruction_loss(b.x_v, b.x_v_hat, b.x_a, b.x_a_hat)?;
        let kl = kl_loss(b.mu_v, b.log_var_v, b.mu_a, b.log_var_a)?;
        let vae = vae_loss(rec, kl)?;
        Ok(Self {
            rec,
            kl,
            vae,
            corr: correlation_loss(b.z_v, b.z_a, b.labels)?,
            dist: distance_loss(b.z_v, b.z_a)?,
            discr: discriminative_loss(b.pred_a, b.pred_v, b.one_hot)?,
            center: center_loss(b.z_v, b.z_a, b.labels, b.centers)?,
        })
    }

    /// Weighted total as a differentiable scalar.
    pub fn total(&self, w: &LossWeights<T>) -> Result<Var<'t, T>> {
        self.discr
            .scale(w.discriminative)
            .add(self.vae.scale(w.lambda1))?
            .add(self.corr.scale(w.lambda2))?
            .add(self.dist.scale(w.lambda3))?
            .add(self.center.scale(w.lambda4))
    }

    pub fn parts(&self) -> LossParts<T> {
        LossParts {
            rec: self.rec.value().item(),
            kl: self.kl.value().item(),
            vae: self.vae.value().item(),
            corr: self.corr.value().item(),
            dist: self.dist.value().item(),
            discr: self.discr.value().item(),
            center: self.center.value().item(),
        }
    }

    pub fn report(&self, w: &LossWeights<T>) -> LossReport<T> {
        total_loss(self.parts(), w)
    }
}

/// Evaluates a loss on plain tensors.
pub fn evaluate<T: Scalar>(
    inputs: &[&Tensor<T>],
    f: impl for<'t> FnOnce(&[Var<'t, T>]) -> Result<Var<'t, T>>,
) -> Result<T> {
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.constant((*t).clone())).collect();
    Ok(f(&vars)?.value().item())
}
