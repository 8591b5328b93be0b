//! Finsler metric families and their fiber quantities: the norm, the
//! fundamental and Cartan tensors, the dual norm, the Legendre transform and
//! the misalignment constant.
//!
//! All fiber derivatives are exact: the family formula for `F²/2` is written
//! once over [`Real`] and differentiated with nested dual numbers.

use crate::dual::{lift, lift_axis, Real};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::linalg::{dot, max_generalized_eig, norm2, sym_eig_extremes, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A parametric Finsler metric family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MetricSpec {
    Euclidean {
        dim: usize,
    },
    /// `F² = g_ij(x) yⁱ yʲ`
    Riemannian {
        dim: usize,
        g: Vec<Vec<Expr>>,
    },
    /// `F = √(α_ij(x) yⁱ yʲ) + β_i(x) yⁱ`
    Randers {
        dim: usize,
        alpha: Vec<Vec<Expr>>,
        beta: Vec<Expr>,
    },
}

/// A point of the slit tangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentSample {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        TangentSample { x: x.to_vec(), y: y.to_vec() }
    }

    pub fn check(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(FinslerError::Domain("x and y dimensions differ".into()));
        }
        if self.y.iter().all(|v| *v == 0.0) {
            return Err(FinslerError::Domain("tangent vector y must be nonzero".into()));
        }
        if self.y.iter().chain(&self.x).any(|v| !v.is_finite()) {
            return Err(FinslerError::Domain("non-finite sample".into()));
        }
        Ok(())
    }
}

/// Fully symmetric rank-3 array stored flat as `c[(i*n + j)*n + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub n: usize,
    pub c: Vec<f64>,
}

impl Tensor3 {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    /// `C_ijk vⁱ`, an n×n matrix.
    pub fn contract_first(&self, v: &[f64]) -> Mat<f64> {
        Mat::from_fn(self.n, |j, k| (0..self.n).map(|i| self.get(i, j, k) * v[i]).sum())
    }
}

fn expr_matrix(rows: &[&[&str]]) -> Result<Vec<Vec<Expr>>> {
    rows.iter().map(|r| r.iter().map(|s| Expr::parse(s)).collect()).collect()
}

impl MetricSpec {
    pub fn euclidean(dim: usize) -> Self {
        MetricSpec::Euclidean { dim }
    }

    pub fn riemannian(g: &[&[&str]]) -> Result<Self> {
        let m = MetricSpec::Riemannian { dim: g.len(), g: expr_matrix(g)? };
        m.validate()?;
        Ok(m)
    }

    pub fn randers(alpha: &[&[&str]], beta: &[&str]) -> Result<Self> {
        let beta = beta.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        let m = MetricSpec::Randers { dim: alpha.len(), alpha: expr_matrix(alpha)?, beta };
        m.validate()?;
        Ok(m)
    }

    /// Randers metric with Euclidean α and a constant one-form β.
    pub fn randers_flat(beta: &[f64]) -> Self {
        let n = beta.len();
        let alpha = (0..n).map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        MetricSpec::Randers { dim: n, alpha, beta: beta.iter().map(|&b| Expr::constant(b)).collect() }
    }

    /// Round unit sphere in stereographic coordinates, `g = 4/(1+|x|²)² δ`.
    pub fn stereographic_sphere(dim: usize) -> Self {
        let r2 = (1..=dim).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ");
        let conf = format!("4/(1 + {r2})^2");
        let g =
            (0..dim).map(|i| (0..dim).map(|j| if i == j { Expr::parse(&conf).unwrap() } else { Expr::constant(0.0) }).collect()).collect();
        MetricSpec::Riemannian { dim, g }
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::Euclidean { dim } | MetricSpec::Riemannian { dim, .. } | MetricSpec::Randers { dim, .. } => *dim,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            MetricSpec::Euclidean { .. } => "euclidean",
            MetricSpec::Riemannian { .. } => "riemannian",
            MetricSpec::Randers { .. } => "randers",
        }
    }

    /// Fundamental tensor independent of the direction.
    pub fn is_riemannian(&self) -> bool {
        !matches!(self, MetricSpec::Randers { .. })
    }

    /// Coefficients independent of `x`: straight chords are geodesics.
    pub fn has_constant_coefficients(&self) -> bool {
        match self {
            MetricSpec::Euclidean { .. } => true,
            MetricSpec::Riemannian { g, .. } => g.iter().flatten().all(|e| e.as_constant().is_some()),
            MetricSpec::Randers { alpha, beta, .. } => alpha.iter().flatten().chain(beta.iter()).all(|e| e.as_constant().is_some()),
        }
    }

    /// Structural checks: shapes and coordinate references.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(FinslerError::InvalidMetric("dimension must be at least 1".into()));
        }
        let check_mat = |m: &Vec<Vec<Expr>>, name: &str| -> Result<()> {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(FinslerError::InvalidMetric(format!("{name} must be {n}x{n}")));
            }
            if m.iter().flatten().any(|e| e.max_coord() > n || e.uses_time()) {
                return Err(FinslerError::InvalidMetric(format!("{name} may only reference x1..x{n}")));
            }
            Ok(())
        };
        match self {
            MetricSpec::Euclidean { .. } => Ok(()),
            MetricSpec::Riemannian { g, .. } => check_mat(g, "g"),
            MetricSpec::Randers { alpha, beta, .. } => {
                check_mat(alpha, "alpha")?;
                if beta.len() != n || beta.iter().any(|e| e.max_coord() > n || e.uses_time()) {
                    return Err(FinslerError::InvalidMetric(format!("beta must have {n} entries in x1..x{n}")));
                }
                Ok(())
            }
        }
    }

    /// Pointwise admissibility: positive-definite quadratic part and, for
    /// Randers, `‖β‖_α < 1`.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        match self {
            MetricSpec::Euclidean { .. } => Ok(()),
            MetricSpec::Riemannian { g, .. } => {
                let m = eval_matrix(g, x);
                let (lo, _) = sym_eig_extremes(&m);
                if lo > 0.0 {
                    Ok(())
                } else {
                    Err(FinslerError::InvalidMetric(format!("g(x) not positive definite (eigenvalue {lo:.3e})")))
                }
            }
            MetricSpec::Randers { alpha, beta, .. } => {
                let a = eval_matrix(alpha, x);
                let (lo, _) = sym_eig_extremes(&a);
                if lo <= 0.0 {
                    return Err(FinslerError::InvalidMetric(format!("alpha(x) not positive definite (eigenvalue {lo:.3e})")));
                }
                let b: Vec<f64> = beta.iter().map(|e| e.eval_f64(x, 0.0)).collect();
                let bn = dot(&b, &a.solve(&b)?).sqrt();
                if bn >= 1.0 {
                    return Err(FinslerError::InvalidMetric(format!("randers one-form has alpha-norm {bn:.6} >= 1")));
                }
                Ok(())
            }
        }
    }

    /// `F(x, y)`.
    pub fn norm<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match self {
            MetricSpec::Euclidean { .. } => dot(y, y).sqrt(),
            MetricSpec::Riemannian { g, .. } => quad(g, x, y).sqrt(),
            MetricSpec::Randers { alpha, beta, .. } => {
                let a = quad(alpha, x, y).sqrt();
                let b = linear(beta, x, y);
                a + b
            }
        }
    }

    /// `F²(x, y)/2`, the generating function of all fiber tensors.
    pub fn energy<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match self {
            MetricSpec::Euclidean { .. } => dot(y, y).scale(0.5),
            MetricSpec::Riemannian { g, .. } => quad(g, x, y).scale(0.5),
            MetricSpec::Randers { .. } => {
                let f = self.norm(x, y);
                (f * f).scale(0.5)
            }
        }
    }

    /// Legendre map `l(y)_i = g_ij(x,y) yʲ = ∂(F²/2)/∂yⁱ`.
    pub fn legendre_g<T: Real>(&self, x: &[T], y: &[T]) -> Vec<T> {
        match self {
            MetricSpec::Euclidean { .. } => y.to_vec(),
            MetricSpec::Riemannian { g, .. } => sym_matrix(g, x).mul_vec(y),
            MetricSpec::Randers { .. } => {
                let xl = lift(x);
                (0..y.len()).map(|k| self.energy(&xl, &lift_axis(y, k)).d).collect()
            }
        }
    }

    /// Fundamental tensor `g_ij(x,y)`, generic.
    pub fn fundamental_g<T: Real>(&self, x: &[T], y: &[T]) -> Mat<T> {
        let n = y.len();
        match self {
            MetricSpec::Euclidean { .. } => Mat::identity(n),
            MetricSpec::Riemannian { g, .. } => sym_matrix(g, x),
            MetricSpec::Randers { .. } => {
                let xl = lift(x);
                let mut m = Mat::zeros(n);
                for j in 0..n {
                    let col = self.legendre_g(&xl, &lift_axis(y, j));
                    for i in 0..n {
                        m.set(i, j, col[i].d);
                    }
                }
                symmetrize(&mut m);
                m
            }
        }
    }

    /// Cartan tensor `C_ijk = ¼ ∂³F²/∂yⁱ∂yʲ∂yᵏ`, generic, flat storage.
    pub fn cartan_g<T: Real>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let n = y.len();
        if self.is_riemannian() {
            return vec![T::zero(); n * n * n];
        }
        let xl = lift(x);
        let mut c = vec![T::zero(); n * n * n];
        for k in 0..n {
            let gk = self.fundamental_g(&xl, &lift_axis(y, k));
            for i in 0..n {
                for j in 0..n {
                    c[(i * n + j) * n + k] = gk.get(i, j).d.scale(0.5);
                }
            }
        }
        c
    }
}

fn eval_matrix(m: &[Vec<Expr>], x: &[f64]) -> Mat<f64> {
    let n = m.len();
    Mat::from_fn(n, |i, j| m[i][j].eval_f64(x, 0.0))
}

fn sym_matrix<T: Real>(m: &[Vec<Expr>], x: &[T]) -> Mat<T> {
    let n = m.len();
    let t = T::zero();
    Mat::from_fn(n, |i, j| if i == j { m[i][i].eval(x, t) } else { (m[i][j].eval(x, t) + m[j][i].eval(x, t)).scale(0.5) })
}

fn symmetrize<T: Real>(m: &mut Mat<T>) {
    for i in 0..m.n {
        for j in i + 1..m.n {
            let v = (m.get(i, j) + m.get(j, i)).scale(0.5);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
}

fn quad<T: Real>(m: &[Vec<Expr>], x: &[T], y: &[T]) -> T {
    let t = T::zero();
    let mut s = T::zero();
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            s += e.eval(x, t) * y[i] * y[j];
        }
    }
    s
}

fn linear<T: Real>(b: &[Expr], x: &[T], y: &[T]) -> T {
    let t = T::zero();
    let mut s = T::zero();
    for (e, &yi) in b.iter().zip(y) {
        s += e.eval(x, t) * yi;
    }
    s
}

/// `F(x, y)`; errors on `y = 0` or an inadmissible metric.
pub fn eval_f(metric: &MetricSpec, s: &TangentSample) -> Result<f64> {
    s.check()?;
    metric.check_point(&s.x)?;
    Ok(metric.norm(&s.x, &s.y))
}

/// Fundamental tensor at `(x, y)`, verified positive definite.
pub fn fundamental_tensor(metric: &MetricSpec, s: &TangentSample) -> Result<Mat<f64>> {
    s.check()?;
    metric.check_point(&s.x)?;
    let g = metric.fundamental_g(&s.x, &s.y);
    let (lo, _) = sym_eig_extremes(&g);
    if lo <= 0.0 {
        return Err(FinslerError::InvalidMetric(format!("fundamental tensor not positive definite (eigenvalue {lo:.3e})")));
    }
    Ok(g)
}

pub fn cartan_tensor(metric: &MetricSpec, s: &TangentSample) -> Result<Tensor3> {
    s.check()?;
    metric.check_point(&s.x)?;
    Ok(Tensor3 { n: s.y.len(), c: metric.cartan_g(&s.x, &s.y) })
}

/// Dual norm `F*(x, ξ) = sup_{F(x,y)=1} ξ(y)`, in closed form per family.
pub fn dual_norm(metric: &MetricSpec, x: &[f64], xi: &[f64]) -> Result<f64> {
    Ok(match metric {
        MetricSpec::Euclidean { .. } => norm2(xi),
        MetricSpec::Riemannian { g, .. } => {
            let m = sym_matrix(g, x);
            dot(xi, &m.solve(xi)?).max(0.0).sqrt()
        }
        MetricSpec::Randers { alpha, beta, .. } => {
            let a = sym_matrix(alpha, x);
            let b: Vec<f64> = beta.iter().map(|e| e.eval_f64(x, 0.0)).collect();
            let ainv_xi = a.solve(xi)?;
            let ainv_b = a.solve(&b)?;
            let s = dot(xi, &ainv_xi);
            let c = dot(&b, &ainv_xi);
            let b2 = dot(&b, &ainv_b);
            if b2 >= 1.0 {
                return Err(FinslerError::InvalidMetric(format!("randers one-form has alpha-norm {:.6} >= 1", b2.sqrt())));
            }
            (((1.0 - b2) * s + c * c).max(0.0).sqrt() - c) / (1.0 - b2)
        }
    })
}

/// Legendre transform `y ↦ g_y(y, ·)`; maps `0 ↦ 0`.
pub fn legendre(metric: &MetricSpec, s: &TangentSample) -> Result<Vec<f64>> {
    if s.y.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; s.y.len()]);
    }
    Ok(metric.legendre_g(&s.x, &s.y))
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_DAMPING: f64 = 0.5;

/// Inverse Legendre transform by damped Newton iteration on the fiber.
pub fn legendre_inv(metric: &MetricSpec, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    let n = xi.len();
    let xi_norm = norm2(xi);
    if xi_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    match metric {
        MetricSpec::Euclidean { .. } => Ok(xi.to_vec()),
        MetricSpec::Riemannian { g, .. } => sym_matrix(g, x).solve(xi),
        MetricSpec::Randers { alpha, .. } => {
            // start from ξ raised by α, rescaled to F-length F*(ξ)
            let target = dual_norm(metric, x, xi)?;
            let mut y = sym_matrix(alpha, x).solve(xi)?;
            let fy = metric.norm(x, &y);
            y.iter_mut().for_each(|v| *v *= target / fy);

            let resid = |y: &[f64]| -> Vec<f64> { metric.legendre_g(x, y).iter().zip(xi).map(|(a, b)| a - b).collect() };
            let mut r = resid(&y);
            let mut rn = norm2(&r);
            let tol = NEWTON_TOL * xi_norm.max(1.0);
            for _ in 0..NEWTON_MAX_ITER {
                if rn <= 1e-3 * tol {
                    break;
                }
                let step = metric.fundamental_g(x, &y).solve(&r)?;
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..40 {
                    let cand: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a - t * d).collect();
                    let rc = resid(&cand);
                    let rcn = norm2(&rc);
                    if rcn < rn {
                        y = cand;
                        r = rc;
                        rn = rcn;
                        accepted = true;
                        break;
                    }
                    t *= NEWTON_DAMPING;
                }
                if !accepted {
                    break;
                }
            }
            if rn > tol {
                return Err(FinslerError::Numeric { msg: "inverse Legendre transform did not converge".into(), residual: rn });
            }
            Ok(y)
        }
    }
}

/// Unit-direction sets used by sampling routines. For `n = 2` the set is
/// nested in `count` (van der Corput angles), so enlarging it can only
/// raise a sampled supremum.
pub fn sample_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * van_der_corput(i as u64);
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1e5);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let s = norm2(&v);
                    v.into_iter().map(|a| a / s).collect()
                })
                .collect()
        }
    }
}

fn van_der_corput(mut i: u64) -> f64 {
    let mut v = 0.0;
    let mut denom = 1.0;
    while i > 0 {
        denom *= 2.0;
        v += (i & 1) as f64 / denom;
        i >>= 1;
    }
    v
}

/// Axis-aligned coordinate box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        CoordBox { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Tensor grid with `per_axis` points per axis (corners included).
    pub fn sample_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.lo.len();
        let k = per_axis.max(1);
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut id| {
                (0..n)
                    .map(|d| {
                        let i = id % k;
                        id /= k;
                        if k == 1 {
                            0.5 * (self.lo[d] + self.hi[d])
                        } else {
                            self.lo[d] + (self.hi[d] - self.lo[d]) * i as f64 / (k - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Sampled misalignment `α = sup g_V(Z,Z)/g_U(Z,Z)` over the box.
///
/// The supremum over `Z` is taken exactly (largest generalized eigenvalue of
/// the pair `g_V, g_U`); `V` and `U` range over `n_dirs` sampled unit
/// directions and `x` over a 5-per-axis tensor grid of the box. The result
/// is a lower estimate of the true constant.
pub fn misalignment(metric: &MetricSpec, region: &CoordBox, n_dirs: usize) -> Result<f64> {
    if n_dirs < 2 {
        return Err(FinslerError::Domain("misalignment needs at least 2 directions".into()));
    }
    if metric.is_riemannian() {
        return Ok(1.0);
    }
    let n = metric.dim();
    let dirs = sample_directions(n, n_dirs);
    let mut best: f64 = 1.0;
    for x in region.sample_points(5) {
        metric.check_point(&x)?;
        let gs: Vec<Mat<f64>> = dirs.iter().map(|v| metric.fundamental_g(&x, v)).collect();
        best = best.max(max_pair_ratio(&gs));
    }
    Ok(best)
}

fn max_pair_ratio(gs: &[Mat<f64>]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let n = gs[0].n;
    for gv in gs {
        for gu in gs {
            let r = if n == 2 { gen_eig_max_2(gv, gu) } else { max_generalized_eig(gv, gu) };
            best = best.max(r);
        }
    }
    best
}

fn gen_eig_max_2(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let (a11, a12, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    let (b11, b12, b22) = (b.get(0, 0), b.get(0, 1), b.get(1, 1));
    let p = b11 * b22 - b12 * b12;
    let q = a11 * b22 + a22 * b11 - 2.0 * a12 * b12;
    let r = a11 * a22 - a12 * a12;
    (q + (q * q - 4.0 * p * r).max(0.0).sqrt()) / (2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randers_half() -> MetricSpec {
        MetricSpec::randers_flat(&[0.5, 0.0])
    }

    #[test]
    fn eval_examples() {
        let e = MetricSpec::euclidean(2);
        assert_eq!(eval_f(&e, &TangentSample::new(&[0.0, 0.0], &[3.0, 4.0])).unwrap(), 5.0);
        let r = randers_half();
        let f = |y: &[f64]| eval_f(&r, &TangentSample::new(&[0.0, 0.0], y)).unwrap();
        assert!((f(&[1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((f(&[-1.0, 0.0]) - 0.5).abs() < 1e-15);
        assert!((f(&[2.0, 1.0]) - 2.0 * f(&[1.0, 0.5])).abs() < 1e-14);
    }

    #[test]
    fn zero_vector_and_bad_randers_rejected() {
        let e = MetricSpec::euclidean(2);
        assert!(matches!(eval_f(&e, &TangentSample::new(&[0.0, 0.0], &[0.0, 0.0])), Err(FinslerError::Domain(_))));
        let bad = MetricSpec::randers_flat(&[1.0, 0.0]);
        assert!(matches!(eval_f(&bad, &TangentSample::new(&[0.0, 0.0], &[1.0, 0.0])), Err(FinslerError::InvalidMetric(_))));
        assert!(MetricSpec::randers(&[&["1", "0"], &["0", "1"]], &["0.5*x1", "0"]).is_ok());
        assert!(MetricSpec::randers(&[&["1", "0"]], &["0", "0"]).is_err());
    }

    #[test]
    fn euclidean_tensors() {
        let e = MetricSpec::euclidean(3);
        let s = TangentSample::new(&[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]);
        assert_eq!(fundamental_tensor(&e, &s).unwrap(), Mat::identity(3));
        assert!(cartan_tensor(&e, &s).unwrap().c.iter().all(|v| *v == 0.0));
        assert_eq!(dual_norm(&e, &[0.0; 3], &[3.0, 4.0, 0.0]).unwrap(), 5.0);
        assert_eq!(legendre(&e, &TangentSample::new(&[0.0; 2], &[1.0, 2.0])).unwrap(), vec![1.0, 2.0]);
        assert_eq!(legendre_inv(&e, &[0.0; 2], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn randers_dual_norm_known_values() {
        let r = randers_half();
        assert!((dual_norm(&r, &[0.0, 0.0], &[1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((dual_norm(&r, &[0.0, 0.0], &[-1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn misalignment_riemannian_is_one() {
        let s = MetricSpec::stereographic_sphere(2);
        let b = CoordBox::new(&[-1.0, -1.0], &[1.0, 1.0]);
        assert_eq!(misalignment(&s, &b, 16).unwrap(), 1.0);
        assert!(misalignment(&s, &b, 1).is_err());
    }

    #[test]
    fn directions_are_unit() {
        for n in 1..=5 {
            for d in sample_directions(n, 17) {
                assert!((norm2(&d) - 1.0).abs() < 1e-12);
            }
        }
    }
}
