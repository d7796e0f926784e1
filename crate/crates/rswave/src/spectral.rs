//! Dense Hermitian eigendecomposition and functional calculus.
//!
//! All spectral projections, energy cutoffs and propagators at desk scale go
//! through one full eigendecomposition; `g(H)`, `E_Δ` and `e^{itH}` are then
//! exact in the eigenbasis.

use crate::error::{Error, Result};
use crate::weyl::{dense_apply, dense_apply_adjoint};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;

pub struct HermitianEigen {
    pub evals: Vec<f64>,
    /// Eigenvectors as columns, same order as `evals` (ascending).
    pub vectors: Mat<C64>,
}

impl HermitianEigen {
    pub fn compute(m: &Mat<C64>) -> Result<Self> {
        let eig = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::EigenFailed(format!("{e:?}")))?;
        let evals: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
        Ok(HermitianEigen {
            evals,
            vectors: eig.U().to_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    /// `Q f(Λ) Q* v`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64, v: &[C64]) -> Vec<C64> {
        let mut w = dense_apply_adjoint(&self.vectors, v);
        for (wi, &lam) in w.iter_mut().zip(self.evals.iter()) {
            *wi *= f(lam);
        }
        dense_apply(&self.vectors, &w)
    }

    /// `e^{i·t·H} v` (pass a negative `t` for the forward Schrödinger
    /// propagator `e^{−iHt}`).
    pub fn evolve(&self, t: f64, v: &[C64]) -> Vec<C64> {
        self.apply_fn(|lam| C64::new(0.0, t * lam).exp(), v)
    }

    /// Indices of eigenvalues inside the open interval `(lo, hi)`.
    pub fn window_indices(&self, lo: f64, hi: f64) -> Vec<usize> {
        self.evals
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > lo && l < hi)
            .map(|(i, _)| i)
            .collect()
    }

    /// Orthogonal projection of `v` onto the eigenspaces in `(lo, hi)`.
    pub fn project_window(&self, lo: f64, hi: f64, v: &[C64]) -> Vec<C64> {
        self.apply_fn(
            |lam| {
                if lam > lo && lam < hi {
                    C64::ONE
                } else {
                    C64::ZERO
                }
            },
            v,
        )
    }

    /// Dense spectral projector onto `(lo, hi)`.
    pub fn window_projector(&self, lo: f64, hi: f64) -> Mat<C64> {
        self.function_dense(|lam| {
            if lam > lo && lam < hi {
                C64::ONE
            } else {
                C64::ZERO
            }
        })
    }

    /// Dense `g(H) = Q·g(Λ)·Q*` for an arbitrary scalar function of the
    /// eigenvalues.
    pub fn function_dense(&self, f: impl Fn(f64) -> C64) -> Mat<C64> {
        let n = self.dim();
        let mut scaled: Mat<C64> = Mat::zeros(n, n);
        for k in 0..n {
            let w = f(self.evals[k]);
            if w == C64::ZERO {
                continue;
            }
            for i in 0..n {
                scaled[(i, k)] = self.vectors[(i, k)] * w;
            }
        }
        let mut out: Mat<C64> = Mat::zeros(n, n);
        faer::linalg::matmul::matmul(
            out.as_mut(),
            faer::Accum::Replace,
            scaled.as_ref(),
            self.vectors.as_ref().adjoint(),
            C64::ONE,
            faer::get_global_parallelism(),
        );
        out
    }
}

/// `a · b` through faer's parallel kernels.
pub fn matmul_nn(a: faer::MatRef<C64>, b: faer::MatRef<C64>) -> Mat<C64> {
    let mut out: Mat<C64> = Mat::zeros(a.nrows(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a,
        b,
        C64::ONE,
        faer::get_global_parallelism(),
    );
    out
}

/// `a* · b` through faer's parallel kernels.
pub fn matmul_an(a: faer::MatRef<C64>, b: faer::MatRef<C64>) -> Mat<C64> {
    let mut out: Mat<C64> = Mat::zeros(a.ncols(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a.adjoint(),
        b,
        C64::ONE,
        faer::get_global_parallelism(),
    );
    out
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> Mat<C64> {
        let mut m: Mat<C64> = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(i as f64, 0.0);
            if i + 1 < n {
                m[(i, i + 1)] = C64::new(0.3, 0.4);
                m[(i + 1, i)] = C64::new(0.3, -0.4);
            }
        }
        m
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = test_matrix(12);
        let eig = HermitianEigen::compute(&m).unwrap();
        let n = 12;
        // Check A v = Q Λ Q* v on a few basis vectors.
        for j in [0usize, 5, 11] {
            let mut e = vec![C64::ZERO; n];
            e[j] = C64::ONE;
            let direct = dense_apply(&m, &e);
            let via = eig.apply_fn(|l| C64::new(l, 0.0), &e);
            for i in 0..n {
                assert!((direct[i] - via[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn evolve_is_unitary() {
        let m = test_matrix(16);
        let eig = HermitianEigen::compute(&m).unwrap();
        let v: Vec<C64> = (0..16).map(|i| C64::new((i as f64).sin(), 0.2)).collect();
        let nv = vec_norm(&v);
        let w = eig.evolve(1.37, &v);
        assert!((vec_norm(&w) - nv).abs() < 1e-10 * nv);
    }

    #[test]
    fn window_projector_is_idempotent_projection() {
        let m = test_matrix(10);
        let eig = HermitianEigen::compute(&m).unwrap();
        let v: Vec<C64> = (0..10).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.1)).collect();
        let p1 = eig.project_window(2.0, 6.0, &v);
        let p2 = eig.project_window(2.0, 6.0, &p1);
        for i in 0..10 {
            assert!((p1[i] - p2[i]).norm() < 1e-12);
        }
    }
}
