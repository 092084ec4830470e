//! Paired audio-visual datasets: in-memory types, batching, file formats and
//! a synthetic generator.

mod io;
mod synthetic;

pub use io::{
    load_dataset, read_features, read_labels, write_dataset, write_features_binary,
    write_features_csv, write_labels, FeatureFormat, Manifest, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use synthetic::{gen_synthetic, SyntheticSpec};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Modality;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split {other:?}"))),
        }
    }
}

/// `m × d` features of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub modality: Modality,
    pub values: Tensor<T>,
    /// File the features came from, or `"synthetic"`.
    pub source: String,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(modality: Modality, values: Tensor<T>, source: impl Into<String>) -> Result<Self> {
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = values.cols().max(1);
            return Err(Error::Validation(format!(
                "{modality} features: non-finite value at row {} column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            modality,
            values,
            source: source.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Class ids in `[0, classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Validation("class count must be >= 1".into()));
        }
        if let Some((row, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Validation(format!(
                "label {l} at row {row} out of range for {classes} classes"
            )));
        }
        Ok(Self { labels, classes })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `m × c` indicator matrix.
    pub fn one_hot<T: Scalar>(&self) -> Tensor<T> {
        one_hot_rows(&self.labels, self.classes)
    }

    /// Number of samples of each class.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Indicator row `e_label` of length `classes`.
pub fn one_hot<T: Scalar>(label: usize, classes: usize) -> Result<Tensor<T>> {
    if label >= classes {
        return Err(Error::Validation(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    Ok(one_hot_rows(&[label], classes))
}

fn one_hot_rows<T: Scalar>(labels: &[usize], classes: usize) -> Tensor<T> {
    Tensor::from_fn(labels.len(), classes, |i, j| {
        if labels[i] == j {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Aligned audio features, visual features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset<T> {
    pub audio: FeatureMatrix<T>,
    pub visual: FeatureMatrix<T>,
    pub labels: LabelVector,
    pub split: Split,
}

/// Rows of a dataset selected for one optimizer step.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub visual: Tensor<T>,
    pub audio: Tensor<T>,
    pub labels: Vec<usize>,
    pub one_hot: Tensor<T>,
}

impl<T: Scalar> PairedDataset<T> {
    pub fn new(
        audio: FeatureMatrix<T>,
        visual: FeatureMatrix<T>,
        labels: LabelVector,
        split: Split,
    ) -> Result<Self> {
        if audio.modality != Modality::Audio || visual.modality != Modality::Visual {
            return Err(Error::Validation("modality tags swapped".into()));
        }
        let (ma, mv, ml) = (audio.rows(), visual.rows(), labels.len());
        if ma != mv || ma != ml {
            return Err(Error::Validation(format!(
                "pairing mismatch: {ma} audio rows ({}), {mv} visual rows ({}), {ml} labels",
                audio.source, visual.source
            )));
        }
        Ok(Self {
            audio,
            visual,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.labels.classes()
    }

    pub fn features(&self, modality: Modality) -> &Tensor<T> {
        match modality {
            Modality::Audio => &self.audio.values,
            Modality::Visual => &self.visual.values,
        }
    }

    pub fn batch(&self, idx: &[usize]) -> Batch<T> {
        let labels: Vec<usize> = idx.iter().map(|&i| self.labels.as_slice()[i]).collect();
        Batch {
            visual: self.visual.values.select_rows(idx),
            audio: self.audio.values.select_rows(idx),
            one_hot: one_hot_rows(&labels, self.classes()),
            labels,
        }
    }
}

/// Shuffled index batches for one epoch. The permutation depends only on
/// `(seed, epoch)`; the final batch may be short.
pub fn make_batches(
    m: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > m {
        return Err(Error::Validation(format!(
            "batch size {batch_size} must be in 1..={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Per-dimension standardization fitted on one split and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore<T> {
    mean: Tensor<T>,
    std: Tensor<T>,
}

impl<T: Scalar> ZScore<T> {
    pub fn fit(x: &Tensor<T>) -> Result<Self> {
        let mean = x.column_means()?;
        let n = T::from_usize_exact(x.rows());
        let mut var = Tensor::zeros(1, x.cols());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let d = x[(i, j)] - mean[(0, j)];
                var[(0, j)] += d * d / n;
            }
        }
        // Constant columns are centered but not rescaled.
        let std = var.map(|v: T| if v > T::zero() { v.sqrt() } else { T::one() });
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.cols() != self.mean.cols() {
            return Err(Error::Dimension {
                op: "zscore",
                lhs: x.shape(),
                rhs: self.mean.shape(),
            });
        }
        Ok(Tensor::from_fn(x.rows(), x.cols(), |i, j| {
            (x[(i, j)] - self.mean[(0, j)]) / self.std[(0, j)]
        }))
    }
}

/// Z-scores both splits with statistics from `train` only.
pub fn standardize<T: Scalar>(
    train: &PairedDataset<T>,
    others: &mut [&mut PairedDataset<T>],
) -> Result<PairedDataset<T>> {
    let za = ZScore::fit(&train.audio.values)?;
    let zv = ZScore::fit(&train.visual.values)?;
    for ds in others.iter_mut() {
        ds.audio.values = za.apply(&ds.audio.values)?;
        ds.visual.values = zv.apply(&ds.visual.values)?;
    }
    let mut out = train.clone();
    out.audio.values = za.apply(&train.audio.values)?;
    out.visual.values = zv.apply(&train.visual.values)?;
    Ok(out)
}
