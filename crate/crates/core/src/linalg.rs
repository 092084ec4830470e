//! Small dense decompositions used by the CCA baseline.
//!
//! Both routines are Jacobi iterations: slow for large matrices but simple,
//! deterministic, and accurate to working precision on the sizes this crate
//! deals with (tens to a few hundred dimensions).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; `vectors` holds the matching
/// unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Tensor<T>,
}

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Tensor<T>,
    pub singular_values: Vec<T>,
    pub v: Tensor<T>,
}

pub fn symmetric_eigen<T: Scalar>(a: &Tensor<T>) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension {
            op: "symmetric_eigen",
            lhs: a.shape(),
            rhs: (n, n),
        });
    }
    let mut m = a.clone();
    let mut v = Tensor::eye(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= eps * eps * diag || off == T::zero() {
            return Ok(sorted_eigen(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let two = T::lit(2.0);
                let theta = (m[(q, q)] - m[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi eigen-solver did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn sorted_eigen<T: Scalar>(m: Tensor<T>, v: Tensor<T>) -> SymmetricEigen<T> {
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: Tensor::from_fn(n, n, |r, c| v[(r, order[c])]),
    }
}

/// `A^{-1/2}` of a symmetric positive definite matrix.
pub fn inverse_sqrt<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let eig = symmetric_eigen(a)?;
    let n = a.rows();
    let largest = eig.values.first().copied().unwrap_or(T::zero()).abs();
    let floor = largest * T::solver_eps() * T::from_usize_exact(n.max(1));
    if let Some(&smallest) = eig.values.last() {
        if smallest <= floor || smallest <= T::zero() {
            return Err(Error::Numerical(format!(
                "covariance is singular (smallest eigenvalue {smallest}); use a positive ridge"
            )));
        }
    }
    let scale: Vec<T> = eig.values.iter().map(|&l| T::one() / l.sqrt()).collect();
    let vs = Tensor::from_fn(n, n, |i, j| eig.vectors[(i, j)] * scale[j]);
    vs.matmul_t(&eig.vectors)
}

/// One-sided Jacobi SVD. Singular values are sorted in descending order and
/// `min(rows, cols)` triplets are returned.
pub fn svd<T: Scalar>(a: &Tensor<T>) -> Result<Svd<T>> {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Tensor::eye(n);
    let eps = T::epsilon();
    // Columns this small next to the whole matrix are numerically zero.
    let negligible = eps * eps * a.as_slice().iter().map(|&x| x * x).sum::<T>();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for k in 0..m {
                    let (up, uq) = (u[(k, p)], u[(k, q)]);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == T::zero()
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (up, uq) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * up - s * uq;
                    u[(k, q)] = s * up + c * uq;
                }
                for k in 0..n {
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<T> = (0..n)
        .map(|j| (0..m).map(|k| u[(k, j)] * u[(k, j)]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let u_sorted = Tensor::from_fn(m, n, |k, c| {
        let j = order[c];
        if norms[j] == T::zero() {
            T::zero()
        } else {
            u[(k, j)] / norms[j]
        }
    });
    Ok(Svd {
        u: u_sorted,
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v: Tensor::from_fn(n, n, |k, c| v[(k, order[c])]),
    })
}
