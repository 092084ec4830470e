use crate::autodiff::Gradients;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for a fixed list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[&Tensor<T>], config: AdamConfig) -> Self {
        let zeros = |p: &&Tensor<T>| Tensor::zeros(p.rows(), p.cols());
        Self {
            config,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. A slot missing from `grads` counts as
    /// a zero gradient.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &Gradients<T>,
        lr: T,
    ) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} tensors, got {}",
                self.first.len(),
                params.len()
            )));
        }
        for (slot, p) in params.iter().enumerate() {
            if p.shape() != self.first[slot].shape() {
                return Err(Error::Contract(format!(
                    "parameter {slot} has shape {:?}, moments have {:?}",
                    p.shape(),
                    self.first[slot].shape()
                )));
            }
            if let Some(g) = grads.get(slot) {
                if g.shape() != p.shape() {
                    return Err(Error::Contract(format!(
                        "gradient {slot} has shape {:?}, parameter has {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
            }
        }

        self.step += 1;
        let b1 = T::lit(self.config.beta1);
        let b2 = T::lit(self.config.beta2);
        let eps = T::lit(self.config.eps);
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let one = T::one();

        for (slot, p) in params.iter_mut().enumerate() {
            let g = grads.get(slot);
            let m = self.first[slot].as_mut_slice();
            let v = self.second[slot].as_mut_slice();
            for (k, w) in p.as_mut_slice().iter_mut().enumerate() {
                let gk = g.map_or(T::zero(), |g| g.as_slice()[k]);
                m[k] = b1 * m[k] + (one - b1) * gk;
                v[k] = b2 * v[k] + (one - b2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
