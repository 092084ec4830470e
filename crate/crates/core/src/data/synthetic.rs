use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{FeatureMatrix, LabelVector, PairedDataset, Split};
use crate::error::{Error, Result};
use crate::model::Modality;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Parameters of the synthetic paired generator.
///
/// Each class owns a latent prototype and a pair of mixing matrices. A sample
/// jitters its class prototype, then each modality observes the jittered
/// latent through its class mixing matrix plus isotropic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    /// Samples per class, before the train/test split.
    pub per_class: usize,
    /// Fraction of each class held out for the test split.
    pub test_fraction: f64,
    pub latent_dim: usize,
    pub d_visual: usize,
    pub d_audio: usize,
    /// Standard deviation of prototype entries.
    pub prototype_scale: f64,
    /// Standard deviation of per-sample latent jitter.
    pub jitter: f64,
    /// Standard deviation of observation noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            per_class: 50,
            test_fraction: 0.2,
            latent_dim: 8,
            d_visual: 64,
            d_audio: 32,
            prototype_scale: 1.0,
            jitter: 0.3,
            noise: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Validation("classes must be >= 1".into()));
        }
        if self.per_class == 0 {
            return Err(Error::Validation(
                "per-class sample count must be >= 1".into(),
            ));
        }
        if self.latent_dim == 0 || self.d_visual == 0 || self.d_audio == 0 {
            return Err(Error::Validation("dimensions must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Validation("test fraction must be in [0, 1)".into()));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("jitter", self.jitter),
            ("prototype scale", self.prototype_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Test samples drawn per class.
    pub fn test_per_class(&self) -> usize {
        ((self.per_class as f64) * self.test_fraction).round() as usize
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

/// Generates disjoint `(train, test)` splits, deterministic per seed.
pub fn gen_synthetic<T: Scalar>(
    spec: &SyntheticSpec,
) -> Result<(PairedDataset<T>, PairedDataset<T>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.latent_dim;
    let mix_sd = 1.0 / (k as f64).sqrt();

    let prototypes: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..k)
                .map(|_| normal(&mut rng, spec.prototype_scale))
                .collect()
        })
        .collect();
    let mixing = |d: usize, rng: &mut ChaCha8Rng| -> Vec<Tensor<f64>> {
        (0..spec.classes)
            .map(|_| Tensor::from_fn(d, k, |_, _| normal(rng, mix_sd)))
            .collect()
    };
    let visual_mix = mixing(spec.d_visual, &mut rng);
    let audio_mix = mixing(spec.d_audio, &mut rng);

    let n_test = spec.test_per_class();
    let n_train = spec.per_class - n_test;
    let mut rows = [
        (Vec::new(), Vec::new(), Vec::new()),
        (Vec::new(), Vec::new(), Vec::new()),
    ];
    for class in 0..spec.classes {
        for s in 0..spec.per_class {
            let h: Vec<f64> = prototypes[class]
                .iter()
                .map(|&p| p + normal(&mut rng, spec.jitter))
                .collect();
            let observe = |m: &Tensor<f64>, rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..m.rows())
                    .map(|r| {
                        let clean: f64 = m.row(r).iter().zip(&h).map(|(a, b)| a * b).sum();
                        clean + normal(rng, spec.noise)
                    })
                    .collect()
            };
            let v = observe(&visual_mix[class], &mut rng);
            let a = observe(&audio_mix[class], &mut rng);
            let target = if s < n_train {
                &mut rows[0]
            } else {
                &mut rows[1]
            };
            target.0.push(v);
            target.1.push(a);
            target.2.push(class);
        }
    }

    let build = |(v, a, l): &(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>), split| {
        let to_t = |rows: &Vec<Vec<f64>>, d: usize| -> Result<Tensor<T>> {
            if rows.is_empty() {
                return Ok(Tensor::zeros(0, d));
            }
            let t = Tensor::from_rows(rows)?;
            Ok(t.cast())
        };
        PairedDataset::new(
            FeatureMatrix::new(Modality::Audio, to_t(a, spec.d_audio)?, "synthetic")?,
            FeatureMatrix::new(Modality::Visual, to_t(v, spec.d_visual)?, "synthetic")?,
            LabelVector::new(l.clone(), spec.classes)?,
            split,
        )
    };
    Ok((
        build(&rows[0], Split::Train)?,
        build(&rows[1], Split::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_split() {
        let spec = SyntheticSpec {
            classes: 5,
            per_class: 40,
            ..Default::default()
        };
        let (train, test) = gen_synthetic::<f64>(&spec).unwrap();
        assert_eq!(train.len() + test.len(), 200);
        assert_eq!(test.len(), 40);
        assert_eq!(train.labels.counts(), vec![32; 5]);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec::default();
        let a = gen_synthetic::<f64>(&spec).unwrap();
        let b = gen_synthetic::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic::<f64>(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn noiseless_spec_repeats_class_rows() {
        let spec = SyntheticSpec {
            noise: 0.0,
            jitter: 0.0,
            per_class: 4,
            ..Default::default()
        };
        let (train, _) = gen_synthetic::<f64>(&spec).unwrap();
        let l = train.labels.as_slice();
        for i in 0..train.len() {
            for j in 0..train.len() {
                if l[i] == l[j] {
                    assert_eq!(train.visual.values.row(i), train.visual.values.row(j));
                    assert_eq!(train.audio.values.row(i), train.audio.values.row(j));
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = SyntheticSpec {
            per_class: 0,
            ..Default::default()
        };
        assert!(gen_synthetic::<f64>(&bad).is_err());
        let bad = SyntheticSpec {
            noise: -1.0,
            ..Default::default()
        };
        assert!(gen_synthetic::<f64>(&bad).is_err());
    }
}
