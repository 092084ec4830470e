//! Linear canonical correlation analysis between the audio and visual views.

use crate::error::{Error, Result};
use crate::linalg::{inverse_sqrt, svd};
use crate::model::Modality;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fitted projections of both views onto `k` canonical directions.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel<T> {
    /// `d_a × k`.
    pub w_audio: Tensor<T>,
    /// `d_v × k`.
    pub w_visual: Tensor<T>,
    pub mean_audio: Tensor<T>,
    pub mean_visual: Tensor<T>,
    /// Canonical correlations, descending.
    pub correlations: Vec<T>,
    /// Ridge added to the audio and visual covariance diagonals.
    pub ridge: (T, T),
}

/// Ridge used when none is given: `1e-4 · trace(C) / d`.
pub fn default_ridge<T: Scalar>(cov: &Tensor<T>) -> T {
    let d = cov.rows();
    if d == 0 {
        return T::zero();
    }
    let trace: T = (0..d).map(|i| cov[(i, i)]).sum();
    T::lit(1e-4) * trace / T::from_usize_exact(d)
}

fn centered<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let mean = x.column_means()?;
    let c = Tensor::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - mean[(0, j)]);
    Ok((c, mean))
}

fn with_ridge<T: Scalar>(mut cov: Tensor<T>, r: T) -> Tensor<T> {
    for i in 0..cov.rows() {
        cov[(i, i)] += r;
    }
    cov
}

/// Fits `k` canonical pairs. `ridge` of `None` uses [`default_ridge`] per view;
/// `Some(r)` adds `r` to both covariances.
pub fn fit<T: Scalar>(
    x_audio: &Tensor<T>,
    x_visual: &Tensor<T>,
    k: usize,
    ridge: Option<T>,
) -> Result<CcaModel<T>> {
    let m = x_audio.rows();
    if m != x_visual.rows() {
        return Err(Error::Dimension {
            op: "cca fit",
            lhs: x_audio.shape(),
            rhs: x_visual.shape(),
        });
    }
    if m < 2 {
        return Err(Error::Empty { op: "cca fit" });
    }
    let (d_a, d_v) = (x_audio.cols(), x_visual.cols());
    let k_max = d_a.min(d_v).min(m - 1);
    if k == 0 || k > k_max {
        return Err(Error::Validation(format!(
            "k = {k} must be in 1..={k_max} (min of d_a, d_v, m - 1)"
        )));
    }
    if let Some(r) = ridge {
        if !(r.is_finite() && r >= T::zero()) {
            return Err(Error::Validation("ridge must be >= 0".into()));
        }
    }

    let (ca, mean_audio) = centered(x_audio)?;
    let (cv, mean_visual) = centered(x_visual)?;
    let denom = T::from_usize_exact(m - 1);
    let cov_aa = ca.t_matmul(&ca)?.scale(T::one() / denom);
    let cov_vv = cv.t_matmul(&cv)?.scale(T::one() / denom);
    let cov_av = ca.t_matmul(&cv)?.scale(T::one() / denom);
    let r_a = ridge.unwrap_or_else(|| default_ridge(&cov_aa));
    let r_v = ridge.unwrap_or_else(|| default_ridge(&cov_vv));

    let wa_full = inverse_sqrt(&with_ridge(cov_aa, r_a))?;
    let wv_full = inverse_sqrt(&with_ridge(cov_vv, r_v))?;
    let whitened = wa_full.matmul(&cov_av)?.matmul(&wv_full)?;
    let dec = svd(&whitened)?;

    let mut w_audio = Tensor::from_fn(d_a, k, |i, j| {
        (0..d_a).map(|p| wa_full[(i, p)] * dec.u[(p, j)]).sum::<T>()
    });
    let mut w_visual = Tensor::from_fn(d_v, k, |i, j| {
        (0..d_v).map(|p| wv_full[(i, p)] * dec.v[(p, j)]).sum::<T>()
    });
    for j in 0..k {
        if first_significant(&w_audio, j) < T::zero() {
            for i in 0..d_a {
                w_audio[(i, j)] = -w_audio[(i, j)];
            }
            for i in 0..d_v {
                w_visual[(i, j)] = -w_visual[(i, j)];
            }
        }
    }

    Ok(CcaModel {
        w_audio,
        w_visual,
        mean_audio,
        mean_visual,
        correlations: dec.singular_values[..k].to_vec(),
        ridge: (r_a, r_v),
    })
}

/// First entry of column `j` that is not negligible next to the column's
/// largest entry.
fn first_significant<T: Scalar>(w: &Tensor<T>, j: usize) -> T {
    let col = w.column(j);
    let largest = col.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = largest * T::solver_eps().sqrt();
    col.into_iter().find(|v| v.abs() > tol).unwrap_or(T::zero())
}

impl<T: Scalar> CcaModel<T> {
    pub fn k(&self) -> usize {
        self.correlations.len()
    }

    /// `(X − mean) · W` for the given view.
    pub fn transform(&self, x: &Tensor<T>, view: Modality) -> Result<Tensor<T>> {
        let (w, mean) = match view {
            Modality::Audio => (&self.w_audio, &self.mean_audio),
            Modality::Visual => (&self.w_visual, &self.mean_visual),
        };
        if x.cols() != w.rows() {
            return Err(Error::FeatureDim {
                modality: view.name(),
                got: x.cols(),
                expected: w.rows(),
            });
        }
        let c = Tensor::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - mean[(0, j)]);
        c.matmul(w)
    }
}
