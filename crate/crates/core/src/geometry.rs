//! Connection and curvature of a Finsler metric measure space: spray,
//! Chern connection, Chern curvatures, flag and Ricci curvature, distortion,
//! S-curvature, weighted and mixed weighted Ricci curvature, the difference
//! tensor `T(V,W)` and the divergence of the Cartan tensor.
//!
//! Index conventions: `Γ^i_jk` is stored at `[(i*n + j)*n + k]`, four-index
//! tensors `R^i_jkl` at `[((i*n + j)*n + k)*n + l]`, and
//! `[R(X,Y)Z]^i = R^i_jkl Zʲ Xᵏ Yˡ`.

use crate::dual::{lift, lift_axis, lift_dir, Real};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::linalg::{dot, Mat};
use crate::metric::{MetricSpec, TangentSample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Reference measure `dμ = σ(x) dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Lebesgue,
    /// User-supplied density expression `σ(x) > 0`.
    Custom {
        sigma: Expr,
    },
    BusemannHausdorff,
}

impl MeasureSpec {
    pub fn custom(sigma: &str) -> Result<Self> {
        Ok(MeasureSpec::Custom { sigma: Expr::parse(sigma)? })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureSpec::Lebesgue => "lebesgue",
            MeasureSpec::Custom { .. } => "custom-expression",
            MeasureSpec::BusemannHausdorff => "busemann-hausdorff",
        }
    }

    /// `Φ(x) = log σ(x)`, differentiable through [`Real`].
    pub fn phi<T: Real>(&self, metric: &MetricSpec, x: &[T]) -> Result<T> {
        match self {
            MeasureSpec::Lebesgue => Ok(T::zero()),
            MeasureSpec::Custom { sigma } => {
                let s = sigma.eval(x, T::zero());
                if s.re() <= 0.0 || !s.re().is_finite() {
                    return Err(FinslerError::Domain(format!("density sigma = {:.3e} is not positive", s.re())));
                }
                Ok(s.ln())
            }
            MeasureSpec::BusemannHausdorff => match metric {
                MetricSpec::Euclidean { .. } => Ok(T::zero()),
                MetricSpec::Riemannian { .. } => {
                    let y = vec![T::one(); x.len()];
                    Ok(metric.fundamental_g(x, &y).det()?.ln().scale(0.5))
                }
                MetricSpec::Randers { alpha, beta, .. } => {
                    let n = x.len();
                    let a = Mat::from_fn(n, |i, j| alpha[i][j].eval(x, T::zero()));
                    let b: Vec<T> = beta.iter().map(|e| e.eval(x, T::zero())).collect();
                    let b2 = dot(&b, &a.solve(&b)?);
                    let one_minus = T::one() - b2;
                    if one_minus.re() <= 0.0 {
                        return Err(FinslerError::InvalidMetric("randers one-form has alpha-norm >= 1".into()));
                    }
                    Ok(one_minus.ln().scale(0.5 * (n as f64 + 1.0)) + a.det()?.ln().scale(0.5))
                }
            },
        }
    }

    pub fn sigma(&self, metric: &MetricSpec, x: &[f64]) -> Result<f64> {
        Ok(self.phi(metric, x)?.exp())
    }

    /// `∂Φ/∂xⁱ`, exact.
    pub fn dphi(&self, metric: &MetricSpec, x: &[f64]) -> Result<Vec<f64>> {
        if matches!(self, MeasureSpec::Lebesgue) {
            return Ok(vec![0.0; x.len()]);
        }
        (0..x.len()).map(|k| Ok(self.phi(metric, &lift_axis(x, k))?.d)).collect()
    }
}

fn derivative_parts<T: Real>(v: &[crate::dual::Dual<T>]) -> Vec<T> {
    v.iter().map(|a| a.d).collect()
}

/// Geodesic spray `Gⁱ(x,y)`, with `ẍ + 2G(x,ẋ) = 0` the geodesic equation.
pub fn spray_g<T: Real>(m: &MetricSpec, x: &[T], y: &[T]) -> Result<Vec<T>> {
    let n = y.len();
    if matches!(m, MetricSpec::Euclidean { .. }) {
        return Ok(vec![T::zero(); n]);
    }
    let yl = lift(y);
    let mixed = derivative_parts(&m.legendre_g(&lift_dir(x, y), &yl));
    let rhs: Vec<T> = (0..n).map(|l| mixed[l] - m.energy(&lift_axis(x, l), &yl).d).collect();
    let g = m.fundamental_g(x, y);
    Ok(g.solve(&rhs)?.into_iter().map(|v| v.scale(0.5)).collect())
}

/// Nonlinear connection `N^i_j = ∂Gⁱ/∂yʲ`, as a matrix indexed `(i, j)`.
pub fn nonlinear_g<T: Real>(m: &MetricSpec, x: &[T], y: &[T]) -> Result<Mat<T>> {
    let n = y.len();
    let xl = lift(x);
    let mut nl = Mat::zeros(n);
    if matches!(m, MetricSpec::Euclidean { .. }) {
        return Ok(nl);
    }
    for j in 0..n {
        let col = spray_g(m, &xl, &lift_axis(y, j))?;
        for i in 0..n {
            nl.set(i, j, col[i].d);
        }
    }
    Ok(nl)
}

/// Horizontal derivatives `δ_k A = ∂_{xᵏ} A − N^m_k ∂_{yᵐ} A` of a flat array
/// valued function, returned as `out[k]`.
fn horizontal<T: Real, F>(x: &[T], y: &[T], nl: &Mat<T>, f: F) -> Result<Vec<Vec<T>>>
where
    F: Fn(&[crate::dual::Dual<T>], &[crate::dual::Dual<T>]) -> Result<Vec<crate::dual::Dual<T>>>,
{
    let n = x.len();
    let xl = lift(x);
    let yl = lift(y);
    let dy: Vec<Vec<T>> = (0..n).map(|m| Ok(derivative_parts(&f(&xl, &lift_axis(y, m))?))).collect::<Result<_>>()?;
    (0..n)
        .map(|k| {
            let mut dk = derivative_parts(&f(&lift_axis(x, k), &yl)?);
            for (m, dym) in dy.iter().enumerate() {
                let c = nl.get(m, k);
                for (a, b) in dk.iter_mut().zip(dym) {
                    *a -= c * *b;
                }
            }
            Ok(dk)
        })
        .collect()
}

/// Chern connection coefficients `Γ^i_jk(x,y)`.
pub fn chern_g<T: Real>(m: &MetricSpec, x: &[T], y: &[T]) -> Result<Vec<T>> {
    let n = y.len();
    if matches!(m, MetricSpec::Euclidean { .. }) {
        return Ok(vec![T::zero(); n * n * n]);
    }
    let g = m.fundamental_g(x, y);
    let ginv = g.inverse()?;
    let nl = nonlinear_g(m, x, y)?;
    let dg = horizontal(x, y, &nl, |xd, yd| Ok(m.fundamental_g(xd, yd).a))?;
    let dgs = |k: usize, a: usize, b: usize| dg[k][a * n + b];
    let mut gamma = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut s = T::zero();
                for l in 0..n {
                    s += ginv.get(i, l) * (dgs(k, l, j) + dgs(j, l, k) - dgs(l, j, k));
                }
                let v = s.scale(0.5);
                gamma[(i * n + j) * n + k] = v;
                gamma[(i * n + k) * n + j] = v;
            }
        }
    }
    Ok(gamma)
}

/// Spray, nonlinear connection and Chern coefficients at a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionCoeffs {
    pub n: usize,
    pub spray: Vec<f64>,
    /// `N^i_j` indexed `(i, j)`.
    pub nonlinear: Mat<f64>,
    pub gamma: Vec<f64>,
}

impl ConnectionCoeffs {
    #[inline]
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.n + j) * self.n + k]
    }
}

pub fn spray_connection(m: &MetricSpec, s: &TangentSample) -> Result<ConnectionCoeffs> {
    s.check()?;
    m.check_point(&s.x)?;
    Ok(ConnectionCoeffs {
        n: s.y.len(),
        spray: spray_g(m, &s.x, &s.y)?,
        nonlinear: nonlinear_g(m, &s.x, &s.y)?,
        gamma: chern_g(m, &s.x, &s.y)?,
    })
}

/// Chern-Riemann curvature `R`, the non-Riemannian curvature `P` and the
/// Landsberg tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ChernCurvature {
    pub n: usize,
    pub r: Vec<f64>,
    /// `P^i_jkl = −∂Γ^i_jk/∂yˡ`.
    pub p: Vec<f64>,
    /// `L^i_kl = −yʲ P^i_jkl`.
    pub landsberg: Vec<f64>,
    /// `L_ikl = g_im L^m_kl`, lowered with `g_y`.
    pub landsberg_lower: Vec<f64>,
}

impl ChernCurvature {
    #[inline]
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.r[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.p[((i * self.n + j) * self.n + k) * self.n + l]
    }

    /// `R(X,Y)Z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            s += self.r(i, j, k, l) * z[j] * x[k] * y[l];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Matrix of `v ↦ R(v,y)y`, indexed `(i, k)`.
    pub fn jacobi_operator(&self, y: &[f64]) -> Mat<f64> {
        let n = self.n;
        Mat::from_fn(n, |i, k| {
            let mut s = 0.0;
            for j in 0..n {
                for l in 0..n {
                    s += self.r(i, j, k, l) * y[j] * y[l];
                }
            }
            s
        })
    }
}

pub fn chern_curvature(m: &MetricSpec, s: &TangentSample) -> Result<ChernCurvature> {
    s.check()?;
    m.check_point(&s.x)?;
    let n = s.y.len();
    let n4 = n * n * n * n;
    if matches!(m, MetricSpec::Euclidean { .. }) {
        return Ok(ChernCurvature {
            n,
            r: vec![0.0; n4],
            p: vec![0.0; n4],
            landsberg: vec![0.0; n * n * n],
            landsberg_lower: vec![0.0; n * n * n],
        });
    }
    let (x, y) = (&s.x, &s.y);
    let gamma = chern_g(m, x, y)?;
    let nl = nonlinear_g(m, x, y)?;
    let dgam = horizontal(x, y, &nl, |xd, yd| chern_g(m, xd, yd))?;
    let yl = lift(x.as_slice());
    let dgam_y: Vec<Vec<f64>> = (0..n).map(|l| Ok(derivative_parts(&chern_g(m, &yl, &lift_axis(y, l))?))).collect::<Result<_>>()?;
    let gm = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
    let idx3 = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let idx4 = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;

    let mut r = vec![0.0; n4];
    let mut p = vec![0.0; n4];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgam[k][idx3(i, j, l)] - dgam[l][idx3(i, j, k)];
                    for q in 0..n {
                        v += gm(i, k, q) * gm(q, j, l) - gm(i, l, q) * gm(q, j, k);
                    }
                    r[idx4(i, j, k, l)] = v;
                    p[idx4(i, j, k, l)] = -dgam_y[l][idx3(i, j, k)];
                }
            }
        }
    }
    let mut landsberg = vec![0.0; n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                landsberg[idx3(i, k, l)] = -(0..n).map(|j| y[j] * p[idx4(i, j, k, l)]).sum::<f64>();
            }
        }
    }
    let g = m.fundamental_g(x, y);
    let mut landsberg_lower = vec![0.0; n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                landsberg_lower[idx3(i, k, l)] = (0..n).map(|q| g.get(i, q) * landsberg[idx3(q, k, l)]).sum();
            }
        }
    }
    Ok(ChernCurvature { n, r, p, landsberg, landsberg_lower })
}

/// Orthonormal basis of `g` (columns), Gram-Schmidt seeded with `first`
/// (if given) and then the coordinate axes.
pub fn orthonormal_frame(g: &Mat<f64>, first: Option<&[f64]>, extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.n;
    let mut cands: Vec<Vec<f64>> = Vec::new();
    if let Some(f) = first {
        cands.push(f.to_vec());
    }
    cands.extend(extra.iter().cloned());
    for a in 0..n {
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        cands.push(e);
    }
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
    for mut v in cands {
        if frame.len() == n {
            break;
        }
        for _ in 0..2 {
            for b in &frame {
                let c = g.bilinear(&v, b);
                v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
            }
        }
        let nn = g.bilinear(&v, &v);
        if nn > 1e-20 {
            let s = nn.sqrt();
            frame.push(v.into_iter().map(|a| a / s).collect());
        }
    }
    frame
}

/// Flag curvature `K(y, v) = g_y(R(v,y)y, v)/(g_y(y,y)g_y(v,v) − g_y(y,v)²)`.
pub fn flag_curvature(m: &MetricSpec, s: &TangentSample, v: &[f64]) -> Result<f64> {
    let curv = chern_curvature(m, s)?;
    let g = m.fundamental_g(&s.x, &s.y);
    flag_from_parts(&curv, &g, &s.y, v)
}

fn flag_from_parts(curv: &ChernCurvature, g: &Mat<f64>, y: &[f64], v: &[f64]) -> Result<f64> {
    let yy = g.bilinear(y, y);
    let vv = g.bilinear(v, v);
    let yv = g.bilinear(y, v);
    let den = yy * vv - yv * yv;
    if den <= 1e-12 * yy * vv {
        return Err(FinslerError::DegenerateFlag("v is parallel to y".into()));
    }
    let rv = curv.apply(v, y, y);
    Ok(g.bilinear(&rv, v) / den)
}

/// Ricci curvature `Ric(y) = F² Σ K(y, e_a)` over a `g_y`-orthonormal frame
/// completing `y/F`.
pub fn ricci(m: &MetricSpec, s: &TangentSample) -> Result<f64> {
    let curv = chern_curvature(m, s)?;
    let g = m.fundamental_g(&s.x, &s.y);
    Ok(ricci_from_parts(&curv, &g, &s.y))
}

fn ricci_from_parts(curv: &ChernCurvature, g: &Mat<f64>, y: &[f64]) -> f64 {
    let frame = orthonormal_frame(g, Some(y), &[]);
    let f2 = g.bilinear(y, y);
    frame[1..].iter().map(|e| f2 * flag_from_parts(curv, g, y, e).unwrap_or(0.0)).sum()
}

pub fn flag_and_ricci(m: &MetricSpec, s: &TangentSample, v: &[f64]) -> Result<(f64, f64)> {
    let curv = chern_curvature(m, s)?;
    let g = m.fundamental_g(&s.x, &s.y);
    Ok((flag_from_parts(&curv, &g, &s.y, v)?, ricci_from_parts(&curv, &g, &s.y)))
}

/// Distortion `τ = ½ ln det g(x,y) − Φ(x)`.
pub fn tau_g<T: Real>(m: &MetricSpec, mu: &MeasureSpec, x: &[T], y: &[T]) -> Result<T> {
    let det = m.fundamental_g(x, y).det()?;
    Ok(det.ln().scale(0.5) - mu.phi(m, x)?)
}

/// S-curvature: derivative of `τ` along the geodesic through `(x, y)`.
pub fn s_curvature_g<T: Real>(m: &MetricSpec, mu: &MeasureSpec, x: &[T], y: &[T]) -> Result<T> {
    let g = spray_g(m, x, y)?;
    let acc: Vec<T> = g.iter().map(|v| v.scale(-2.0)).collect();
    Ok(tau_g(m, mu, &lift_dir(x, y), &lift_dir(y, &acc))?.d)
}

/// `Ṡ`: derivative of the S-curvature along the geodesic through `(x, y)`.
pub fn s_dot_g<T: Real>(m: &MetricSpec, mu: &MeasureSpec, x: &[T], y: &[T]) -> Result<T> {
    let g = spray_g(m, x, y)?;
    let acc: Vec<T> = g.iter().map(|v| v.scale(-2.0)).collect();
    Ok(s_curvature_g(m, mu, &lift_dir(x, y), &lift_dir(y, &acc))?.d)
}

/// Distortion, S-curvature and its geodesic derivative at a sample.
pub fn distortion_s_curvature(m: &MetricSpec, mu: &MeasureSpec, s: &TangentSample) -> Result<(f64, f64, f64)> {
    s.check()?;
    m.check_point(&s.x)?;
    Ok((tau_g(m, mu, &s.x, &s.y)?, s_curvature_g(m, mu, &s.x, &s.y)?, s_dot_g(m, mu, &s.x, &s.y)?))
}

/// Tolerance for treating the S-curvature as zero.
pub const TOL_S: f64 = 1e-9;

fn weighted_combination(trace: f64, s: f64, s_dot: f64, n_eff: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if n_eff.is_nan() || n_eff < nf {
        return Err(FinslerError::Domain(format!("effective dimension N = {n_eff} is below n = {n}")));
    }
    if n_eff.is_infinite() {
        return Ok(trace + s_dot);
    }
    if n_eff == nf {
        return Ok(if s.abs() > TOL_S { f64::NEG_INFINITY } else { trace + s_dot });
    }
    Ok(trace + s_dot - s * s / (n_eff - nf))
}

/// Weighted Ricci curvature `Ric^N(y)`; `n_eff` may be `f64::INFINITY`.
pub fn weighted_ricci(m: &MetricSpec, mu: &MeasureSpec, n_eff: f64, s: &TangentSample) -> Result<f64> {
    let (_, sc, sd) = distortion_s_curvature(m, mu, s)?;
    let ric = ricci(m, s)?;
    weighted_combination(ric, sc, sd, n_eff, s.y.len())
}

/// `tr_W R_V(V) = Σ g_W(R_V(b_a, V)V, b_a)` over a `g_W`-orthonormal basis.
pub fn trace_w(curv_v: &ChernCurvature, v: &[f64], g_w: &Mat<f64>, basis: &[Vec<f64>]) -> f64 {
    basis.iter().map(|b| g_w.bilinear(&curv_v.apply(b, v, v), b)).sum()
}

/// Mixed weighted Ricci curvature `ᵐRic^N(V, W)`.
pub fn mixed_weighted_ricci(m: &MetricSpec, mu: &MeasureSpec, n_eff: f64, x: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let sv = TangentSample::new(x, v);
    TangentSample::new(x, w).check()?;
    let curv = chern_curvature(m, &sv)?;
    let (_, sc, sd) = distortion_s_curvature(m, mu, &sv)?;
    let g_w = m.fundamental_g(x, w);
    let basis = orthonormal_frame(&g_w, None, &[]);
    weighted_combination(trace_w(&curv, v, &g_w, &basis), sc, sd, n_eff, x.len())
}

/// Mixed Cartan tensor `C^{ij}_k = g^{ia} g^{jb} C_abk`, flat `[(i*n+j)*n+k]`.
pub fn mixed_cartan_g<T: Real>(m: &MetricSpec, x: &[T], y: &[T]) -> Result<Vec<T>> {
    let n = y.len();
    if m.is_riemannian() {
        return Ok(vec![T::zero(); n * n * n]);
    }
    let c = m.cartan_g(x, y);
    let gi = m.fundamental_g(x, y).inverse()?;
    let mut half = vec![T::zero(); n * n * n];
    for i in 0..n {
        for b in 0..n {
            for k in 0..n {
                let mut s = T::zero();
                for a in 0..n {
                    s += gi.get(i, a) * c[(a * n + b) * n + k];
                }
                half[(i * n + b) * n + k] = s;
            }
        }
    }
    let mut out = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = T::zero();
                for b in 0..n {
                    s += gi.get(j, b) * half[(i * n + b) * n + k];
                }
                out[(i * n + j) * n + k] = s;
            }
        }
    }
    Ok(out)
}

fn eval_field(v: &[Expr], x: &[f64]) -> Result<Vec<f64>> {
    let out: Vec<f64> = v.iter().map(|e| e.eval_f64(x, 0.0)).collect();
    if out.iter().all(|a| *a == 0.0) {
        return Err(FinslerError::Domain("reference vector field vanishes".into()));
    }
    Ok(out)
}

/// `div C(V)ʲ = C^{ij}_{k|i}(V) Vᵏ`, the Chern covariant derivative of the
/// tensor field `x ↦ C(x, V(x))` with reference `V`. Differentiating the
/// section rather than the fibre keeps the term: a fibrewise horizontal
/// derivative contracted with `Vᵏ = yᵏ` vanishes identically.
pub fn div_cartan(m: &MetricSpec, x: &[f64], field: &[Expr]) -> Result<Vec<f64>> {
    let n = x.len();
    let v = eval_field(field, x)?;
    if m.is_riemannian() {
        return Ok(vec![0.0; n]);
    }
    m.check_point(x)?;
    let c = mixed_cartan_g(m, x, &v)?;
    let dc: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let xd = lift_axis(x, i);
            let vd: Vec<_> = field.iter().map(|e| e.eval(&xd, crate::dual::Dual::lift(0.0))).collect();
            Ok(mixed_cartan_g(m, &xd, &vd)?.iter().map(|a| a.d).collect())
        })
        .collect::<Result<_>>()?;
    let gamma = chern_g(m, x, &v)?;
    let gm = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
    let cm = |i: usize, j: usize, k: usize| c[(i * n + j) * n + k];
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                let mut d = dc[i][(i * n + j) * n + k];
                for q in 0..n {
                    d += cm(q, j, k) * gm(i, q, i) + cm(i, q, k) * gm(j, q, i) - cm(i, j, q) * gm(q, k, i);
                }
                s += d * v[k];
            }
        }
        *o = s;
    }
    Ok(out)
}

/// `T(V, W) = d[τ(·, V(·))] − d[τ(·, W(·))]` at `x`, as a covector.
pub fn t_difference(m: &MetricSpec, mu: &MeasureSpec, x: &[f64], vf: &[Expr], wf: &[Expr]) -> Result<Vec<f64>> {
    eval_field(vf, x)?;
    eval_field(wf, x)?;
    m.check_point(x)?;
    let n = x.len();
    let grad = |field: &[Expr]| -> Result<Vec<f64>> {
        (0..n)
            .map(|k| {
                let xd = lift_axis(x, k);
                let yd: Vec<_> = field.iter().map(|e| e.eval(&xd, crate::dual::Dual::lift(0.0))).collect();
                Ok(tau_g(m, mu, &xd, &yd)?.d)
            })
            .collect()
    };
    let a = grad(vf)?;
    let b = grad(wf)?;
    Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
}

/// All curvature quantities at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureSample {
    pub connection: ConnectionCoeffs,
    pub curvature: ChernCurvature,
    pub flag: Option<f64>,
    pub ricci: f64,
    pub tau: f64,
    pub s: f64,
    pub s_dot: f64,
    pub weighted_ricci: f64,
}

pub fn curvature_sample(m: &MetricSpec, mu: &MeasureSpec, n_eff: f64, s: &TangentSample, v: Option<&[f64]>) -> Result<CurvatureSample> {
    let connection = spray_connection(m, s)?;
    let curvature = chern_curvature(m, s)?;
    let g = m.fundamental_g(&s.x, &s.y);
    let flag = match v {
        Some(v) => Some(flag_from_parts(&curvature, &g, &s.y, v)?),
        None => None,
    };
    let ric = ricci_from_parts(&curvature, &g, &s.y);
    let (tau, sc, sd) = distortion_s_curvature(m, mu, s)?;
    let weighted_ricci = weighted_combination(ric, sc, sd, n_eff, s.y.len())?;
    Ok(CurvatureSample { connection, curvature, flag, ricci: ric, tau, s: sc, s_dot: sd, weighted_ricci })
}

/// One row of a curvature scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRecord {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `ᵐRic^N(V,W)/F²(V)`.
    pub ratio: f64,
    /// `F(div C(V)) + F*(T(V,W))` with constant fields `V`, `W`.
    pub k0_part: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureScan {
    pub records: Vec<ScanRecord>,
    pub min_ratio: f64,
    pub argmin: usize,
    /// `max(0, −min ratio)`, an estimate of the lower-bound constant `K`.
    pub k_estimate: f64,
    pub k0_part_max: f64,
}

/// Sample `ᵐRic^N(V,W)/F²(V)` over the given points and direction pairs.
pub fn curvature_scan(m: &MetricSpec, mu: &MeasureSpec, n_eff: f64, points: &[Vec<f64>], dirs: &[Vec<f64>]) -> Result<CurvatureScan> {
    let per_point: Vec<Result<Vec<ScanRecord>>> = points
        .par_iter()
        .map(|x| {
            let mut recs = Vec::with_capacity(dirs.len() * dirs.len());
            for v in dirs {
                let sv = TangentSample::new(x, v);
                let curv = chern_curvature(m, &sv)?;
                let (_, sc, sd) = distortion_s_curvature(m, mu, &sv)?;
                let f2 = m.norm(x, v).powi(2);
                let vf: Vec<Expr> = v.iter().map(|a| Expr::constant(*a)).collect();
                let dc = div_cartan(m, x, &vf)?;
                let dc_norm = if dc.iter().all(|a| *a == 0.0) { 0.0 } else { m.norm(x, &dc) };
                for w in dirs {
                    let g_w = m.fundamental_g(x, w);
                    let basis = orthonormal_frame(&g_w, None, &[]);
                    let mric = weighted_combination(trace_w(&curv, v, &g_w, &basis), sc, sd, n_eff, x.len())?;
                    let wf: Vec<Expr> = w.iter().map(|a| Expr::constant(*a)).collect();
                    let t = t_difference(m, mu, x, &vf, &wf)?;
                    let k0 = dc_norm + crate::metric::dual_norm(m, x, &t)?;
                    recs.push(ScanRecord { x: x.clone(), v: v.clone(), w: w.clone(), ratio: mric / f2, k0_part: k0 });
                }
            }
            Ok(recs)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_point {
        records.extend(r?);
    }
    if records.is_empty() {
        return Err(FinslerError::Domain("curvature scan has no samples".into()));
    }
    let mut argmin = 0;
    for (i, r) in records.iter().enumerate() {
        if r.ratio < records[argmin].ratio {
            argmin = i;
        }
    }
    let min_ratio = records[argmin].ratio;
    let k0_part_max = records.iter().map(|r| r.k0_part).fold(0.0, f64::max);
    Ok(CurvatureScan { records, min_ratio, argmin, k_estimate: (-min_ratio).max(0.0), k0_part_max })
}
