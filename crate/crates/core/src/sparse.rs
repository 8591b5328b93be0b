//! Compressed sparse rows and a Jacobi-preconditioned BiCGSTAB solver for
//! the nonsymmetric diffusion systems of the time stepper.

use crate::error::{FinslerError, Result};
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).into_par_iter().map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).find(|k| self.cols[*k] == i).map_or(0.0, |k| self.vals[k])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Sequential so that runs are bitwise reproducible; a parallel reduction
/// would make the summation order depend on scheduling.
fn pdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` from the initial guess `x`, stopping when
/// `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&dinv).map(|(p, q)| p * q).collect() };
    let bn = pdot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let ax = a.mul_vec(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut rn = pdot(&r, &r).sqrt();
    if rn <= tol * bn {
        return Ok(SolveStats { iterations: 0, residual: rn / bn });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = pdot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut().zip(&r).zip(&v).for_each(|((pi, ri), vi)| *pi = ri + beta * (*pi - omega * vi));
        let ph = precond(&p);
        v = a.mul_vec(&ph);
        alpha = rho / pdot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let sn = pdot(&s, &s).sqrt();
        if sn <= tol * bn {
            x.iter_mut().zip(&ph).for_each(|(xi, pi)| *xi += alpha * pi);
            return Ok(SolveStats { iterations: it, residual: sn / bn });
        }
        let sh = precond(&s);
        let t = a.mul_vec(&sh);
        omega = pdot(&t, &s) / pdot(&t, &t);
        x.par_iter_mut().zip(&ph).zip(&sh).for_each(|((xi, pi), si)| *xi += alpha * pi + omega * si);
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        rn = pdot(&r, &r).sqrt();
        if rn <= tol * bn {
            return Ok(SolveStats { iterations: it, residual: rn / bn });
        }
        if !rn.is_finite() || omega == 0.0 {
            break;
        }
    }
    Err(FinslerError::Numeric { msg: "BiCGSTAB did not converge".into(), residual: rn / bn })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_tridiagonal_system() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 4.0)];
                if i > 0 {
                    r.push((i - 1, -1.5));
                }
                if i + 1 < n {
                    r.push((i + 1, -0.5));
                }
                r
            })
            .collect();
        let a = Csr::from_rows(rows);
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&truth);
        let mut x = vec![0.0; n];
        let st = bicgstab(&a, &b, &mut x, 1e-13, 200).unwrap();
        assert!(st.residual <= 1e-13);
        for (p, q) in x.iter().zip(&truth) {
            assert!((p - q).abs() < 1e-11);
        }
    }
}
