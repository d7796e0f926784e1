//! Small fixed-size complex linear algebra for the 3-component wave structure.

use num_complex::Complex64 as C64;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Complex 3-vector.
pub type Vec3 = [C64; 3];

/// Complex 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[C64; 3]; 3]);

impl Mat3 {
    pub fn zero() -> Self {
        Mat3([[C64::ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for k in 0..3 {
            m.0[k][k] = c(1.0);
        }
        m
    }

    pub fn diag(d: Vec3) -> Self {
        let mut m = Self::zero();
        for k in 0..3 {
            m.0[k][k] = d[k];
        }
        m
    }

    pub fn from_real(r: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = c(r[i][j]);
            }
        }
        m
    }

    /// Columns as a matrix.
    pub fn from_columns(cols: [Vec3; 3]) -> Self {
        let mut m = Self::zero();
        for (j, col) in cols.iter().enumerate() {
            for i in 0..3 {
                m.0[i][j] = col[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec3 {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn adjoint(&self) -> Mat3 {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat3 {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = C64::ZERO;
                for k in 0..3 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = s;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let mut out = [C64::ZERO; 3];
        for i in 0..3 {
            for k in 0..3 {
                out[i] += self.0[i][k] * v[k];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat3) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += rhs.0[i][j];
            }
        }
        m
    }

    pub fn sub(&self, rhs: &Mat3) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= rhs.0[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] *= s;
            }
        }
        m
    }

    /// Symmetric part `(M + Mᵀ)/2` (plain transpose, no conjugation).
    pub fn sym(&self) -> Mat3 {
        self.add(&self.transpose()).scale(c(0.5))
    }

    /// Antisymmetric part `(M − Mᵀ)/2`.
    pub fn antisym(&self) -> Mat3 {
        self.sub(&self.transpose()).scale(c(0.5))
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Max absolute entry.
    pub fn norm_max(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s = s.max(self.0[i][j].norm());
            }
        }
        s
    }

    /// Deviation from Hermitian symmetry, `‖M − M*‖`.
    pub fn hermitian_defect(&self) -> f64 {
        self.sub(&self.adjoint()).norm()
    }
}

pub fn vec_sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn vec_scale(a: &Vec3, s: C64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn vec_norm(a: &Vec3) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn vec_dot(a: &Vec3, b: &Vec3) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_of_product() {
        let a = Mat3::from_real([[1.0, 2.0, 0.0], [0.5, -1.0, 3.0], [0.0, 1.0, 1.0]]);
        let mut b = Mat3::identity();
        b.0[0][1] = C64::new(0.0, 2.0);
        let lhs = a.mul(&b).adjoint();
        let rhs = b.adjoint().mul(&a.adjoint());
        assert!(lhs.sub(&rhs).norm() < 1e-14);
    }

    #[test]
    fn sym_antisym_recompose() {
        let a = Mat3::from_real([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let r = a.sym().add(&a.antisym());
        assert!(r.sub(&a).norm() < 1e-14);
    }
}
