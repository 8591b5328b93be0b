//! Small dense row-major matrices over any [`Real`].

use crate::dual::Real;
use crate::error::{FinslerError, Result};

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(f(i, j));
            }
        }
        Mat { n, a }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                for j in 0..self.n {
                    s += self.get(i, j) * v[j];
                }
                s
            })
            .collect()
    }

    /// `uᵀ M v`
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let mv = self.mul_vec(v);
        dot(u, &mv)
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat { n: self.n, a: self.a.iter().map(Real::re).collect() }
    }

    /// LU factorization with partial pivoting on the real part.
    fn lu(&self) -> Result<(Vec<T>, Vec<usize>, f64)> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.a.iter().fold(0.0_f64, |m, v| m.max(v.re().abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].re().abs();
            for i in k + 1..n {
                let v = a[i * n + k].re().abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best < 1e-14 * scale {
                return Err(FinslerError::InvalidMetric(format!("singular matrix (pivot {best:.3e})")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
            }
        }
        Ok((a, perm, sign))
    }

    pub fn det(&self) -> Result<T> {
        let n = self.n;
        let (lu, _, sign) = self.lu()?;
        let mut d = T::cst(sign);
        for i in 0..n {
            d *= lu[i * n + i];
        }
        Ok(d)
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let (lu, perm, _) = self.lu()?;
        Ok(lu_solve(&lu, &perm, self.n, b))
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let (lu, perm, _) = self.lu()?;
        let mut inv = Mat::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = lu_solve(&lu, &perm, n, &e);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }
}

fn lu_solve<T: Real>(lu: &[T], perm: &[usize], n: usize, b: &[T]) -> Vec<T> {
    let mut x: Vec<T> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let v = x[j];
            x[i] -= lu[i * n + j] * v;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let v = x[j];
            x[i] -= lu[i * n + j] * v;
        }
        x[i] = x[i] / lu[i * n + i];
    }
    x
}

pub fn dot<T: Real>(u: &[T], v: &[T]) -> T {
    let mut s = T::zero();
    for (a, b) in u.iter().zip(v) {
        s += *a * *b;
    }
    s
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Smallest and largest eigenvalue of a symmetric f64 matrix.
pub fn sym_eig_extremes(m: &Mat<f64>) -> (f64, f64) {
    let dm = nalgebra::DMatrix::from_row_slice(m.n, m.n, &m.a);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Largest generalized eigenvalue of `a v = λ b v` for symmetric `a`, SPD `b`,
/// i.e. `max_z (zᵀ a z)/(zᵀ b z)`.
pub fn max_generalized_eig(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let n = a.n;
    let bm = nalgebra::DMatrix::from_row_slice(n, n, &b.a);
    let am = nalgebra::DMatrix::from_row_slice(n, n, &a.a);
    let chol = nalgebra::Cholesky::new(bm).expect("generalized eigenproblem needs SPD b");
    let l = chol.l();
    let linv = l.clone().try_inverse().expect("cholesky factor is invertible");
    let c = &linv * am * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(c).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}
