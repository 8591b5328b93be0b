//! Nonlinear and linearized differential operators on grid fields: the
//! Finsler gradient, the Hessian with a reference direction, the weighted
//! divergence, the Finsler Laplacian `Δu = div_μ(∇u)` and the linearized
//! Laplacian `Δ^{∇u} f = div_μ(g^{ij}(x, ∇u) ∂_j f ∂_i)`.
//!
//! Whole-field versions (`*_field`) evaluate every node in parallel; the
//! point versions take a frame index and a node of a [`ScalarFieldT`].

use crate::error::{FinslerError, Result};
use crate::geometry::{chern_g, MeasureSpec};
use crate::grid::{GridChart, ScalarFieldT};
use crate::linalg::{norm2, Mat};
use crate::metric::{legendre_inv, MetricSpec};
use rayon::prelude::*;

/// Below this differential norm a node counts as critical: the reference
/// direction is undefined and operators fall back to Euclidean coefficients.
pub const CRITICAL_TOL: f64 = 1e-10;

/// Gradient vectors at every node, with critical nodes flagged (their
/// gradient is the zero vector).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub vecs: Vec<Vec<f64>>,
    pub differentials: Vec<Vec<f64>>,
    pub critical: Vec<bool>,
}

impl GradientField {
    pub fn critical_count(&self) -> usize {
        self.critical.iter().filter(|c| **c).count()
    }
}

fn gradient_from_differential(metric: &MetricSpec, x: &[f64], du: &[f64]) -> Result<(Vec<f64>, bool)> {
    if norm2(du) < CRITICAL_TOL {
        return Ok((vec![0.0; du.len()], true));
    }
    Ok((legendre_inv(metric, x, du)?, false))
}

pub fn gradient_field(metric: &MetricSpec, grid: &GridChart, vals: &[f64], order: usize) -> Result<GradientField> {
    let res: Vec<Result<(Vec<f64>, Vec<f64>, bool)>> = (0..grid.len())
        .into_par_iter()
        .map(|lin| {
            let x = grid.point(lin);
            let du = grid.gradient(vals, lin, order);
            let (g, c) = gradient_from_differential(metric, &x, &du)?;
            Ok((g, du, c))
        })
        .collect();
    let mut vecs = Vec::with_capacity(grid.len());
    let mut differentials = Vec::with_capacity(grid.len());
    let mut critical = Vec::with_capacity(grid.len());
    for r in res {
        let (g, du, c) = r?;
        vecs.push(g);
        differentials.push(du);
        critical.push(c);
    }
    Ok(GradientField { vecs, differentials, critical })
}

/// `Σ_i ∂_i Vⁱ + Vⁱ ∂_iΦ` with stencil derivatives of the nodal components.
fn divergence_at(grid: &GridChart, dphi: &[f64], comp: &dyn Fn(usize, usize) -> f64, lin: usize, order: usize) -> f64 {
    (0..grid.dim()).map(|d| grid.d1(|l| comp(l, d), lin, d, order) + comp(lin, d) * dphi[d]).sum()
}

fn dphi_field(metric: &MetricSpec, measure: &MeasureSpec, grid: &GridChart) -> Result<Vec<Vec<f64>>> {
    (0..grid.len()).into_par_iter().map(|l| measure.dphi(metric, &grid.point(l))).collect()
}

/// Weighted divergence `div_μ V` of a nodal vector field.
pub fn divergence_field(metric: &MetricSpec, measure: &MeasureSpec, grid: &GridChart, v: &[Vec<f64>], order: usize) -> Result<Vec<f64>> {
    let dphi = dphi_field(metric, measure, grid)?;
    Ok((0..grid.len()).into_par_iter().map(|lin| divergence_at(grid, &dphi[lin], &|l, d| v[l][d], lin, order)).collect())
}

/// Euclidean weighted Laplacian `Σ ∂²f + ∂_iΦ ∂_if`, used at critical nodes.
fn plain_laplacian_at(grid: &GridChart, dphi: &[f64], f: &[f64], lin: usize, order: usize) -> f64 {
    (0..grid.dim()).map(|d| grid.d2(|l| f[l], lin, d, order) + dphi[d] * grid.d1(|l| f[l], lin, d, order)).sum()
}

/// Finsler Laplacian `div_μ(∇u)` at every node (critical nodes use the
/// plain weighted Laplacian).
pub fn finsler_laplacian_field(metric: &MetricSpec, measure: &MeasureSpec, grid: &GridChart, u: &[f64], order: usize) -> Result<Vec<f64>> {
    let gf = gradient_field(metric, grid, u, order)?;
    finsler_laplacian_with(metric, measure, grid, &gf, u, order)
}

/// Finsler Laplacian given a precomputed gradient field of `u`.
pub fn finsler_laplacian_with(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    grid: &GridChart,
    gf: &GradientField,
    u: &[f64],
    order: usize,
) -> Result<Vec<f64>> {
    let dphi = dphi_field(metric, measure, grid)?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|lin| {
            if gf.critical[lin] {
                plain_laplacian_at(grid, &dphi[lin], u, lin, order)
            } else {
                divergence_at(grid, &dphi[lin], &|l, d| gf.vecs[l][d], lin, order)
            }
        })
        .collect())
}

/// Inverse fundamental tensor `g^{ij}(x, ∇u)` at every node; identity at
/// critical nodes.
pub fn reference_inverse_metric(metric: &MetricSpec, grid: &GridChart, gf: &GradientField) -> Result<Vec<Mat<f64>>> {
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|lin| {
            if gf.critical[lin] || matches!(metric, MetricSpec::Euclidean { .. }) {
                return Ok(Mat::identity(n));
            }
            metric.fundamental_g(&grid.point(lin), &gf.vecs[lin]).inverse()
        })
        .collect()
}

/// Linearized Laplacian `Δ^{∇u} f` at every node, reference gradient `gf`.
pub fn linearized_laplacian_field(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    grid: &GridChart,
    gf: &GradientField,
    f: &[f64],
    order: usize,
) -> Result<Vec<f64>> {
    let ginv = reference_inverse_metric(metric, grid, gf)?;
    let flux: Vec<Vec<f64>> = (0..grid.len()).into_par_iter().map(|lin| ginv[lin].mul_vec(&grid.gradient(f, lin, order))).collect();
    divergence_field(metric, measure, grid, &flux, order)
}

/// `F²_{∇u}(∇^{∇u} f) = g^{ij}(∇u) ∂_if ∂_jf` at every node.
pub fn reference_norm_sq_field(metric: &MetricSpec, grid: &GridChart, gf: &GradientField, f: &[f64], order: usize) -> Result<Vec<f64>> {
    let ginv = reference_inverse_metric(metric, grid, gf)?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|lin| {
            let df = grid.gradient(f, lin, order);
            ginv[lin].bilinear(&df, &df)
        })
        .collect())
}

/// `(∇^{∇u})² f = ∂²f − Γ^k_ij(x, ∇u) ∂_k f` at one node.
pub fn hessian_ref_at(metric: &MetricSpec, grid: &GridChart, gf: &GradientField, f: &[f64], lin: usize, order: usize) -> Result<Mat<f64>> {
    if gf.critical[lin] {
        return Err(FinslerError::Domain("reference direction vanishes at this node".into()));
    }
    let n = grid.dim();
    let x = grid.point(lin);
    let gamma = chern_g(metric, &x, &gf.vecs[lin])?;
    let df = grid.gradient(f, lin, order);
    let h = grid.hessian(f, lin, order);
    Ok(Mat::from_fn(n, |i, j| h.get(i, j) - (0..n).map(|k| gamma[(k * n + i) * n + j] * df[k]).sum::<f64>()))
}

fn check_frame(u: &ScalarFieldT, k: usize, lin: usize) -> Result<()> {
    if k >= u.n_times() || lin >= u.grid.len() {
        return Err(FinslerError::Domain(format!("no sample at frame {k}, node {lin}")));
    }
    Ok(())
}

/// `∇u` at a node of frame `k`; zero at critical points.
pub fn gradient(metric: &MetricSpec, u: &ScalarFieldT, k: usize, lin: usize) -> Result<Vec<f64>> {
    check_frame(u, k, lin)?;
    let du = u.grid.gradient(u.frame(k), lin, u.order);
    Ok(gradient_from_differential(metric, &u.grid.point(lin), &du)?.0)
}

/// Hessian of `f` with reference direction `∇u`, at a node of frame `k`.
pub fn hessian_ref(metric: &MetricSpec, u: &ScalarFieldT, f: &ScalarFieldT, k: usize, lin: usize) -> Result<Mat<f64>> {
    check_frame(u, k, lin)?;
    let grid = &u.grid;
    let du = grid.gradient(u.frame(k), lin, u.order);
    let (g, c) = gradient_from_differential(metric, &grid.point(lin), &du)?;
    let n = grid.len();
    let mut gf = GradientField { vecs: vec![Vec::new(); n], differentials: vec![Vec::new(); n], critical: vec![true; n] };
    gf.vecs[lin] = g;
    gf.critical[lin] = c;
    hessian_ref_at(metric, grid, &gf, f.frame(k), lin, u.order)
}

/// Weighted divergence of a vector field given as a function of the node.
pub fn divergence(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    grid: &GridChart,
    v: &dyn Fn(usize) -> Vec<f64>,
    lin: usize,
    order: usize,
) -> Result<f64> {
    let dphi = measure.dphi(metric, &grid.point(lin))?;
    Ok(divergence_at(grid, &dphi, &|l, d| v(l)[d], lin, order))
}

/// `Δu` at a node of frame `k`.
pub fn finsler_laplacian(metric: &MetricSpec, measure: &MeasureSpec, u: &ScalarFieldT, k: usize, lin: usize) -> Result<f64> {
    check_frame(u, k, lin)?;
    let grid = &u.grid;
    let vals = u.frame(k);
    let grad =
        |l: usize| -> Result<(Vec<f64>, bool)> { gradient_from_differential(metric, &grid.point(l), &grid.gradient(vals, l, u.order)) };
    let dphi = measure.dphi(metric, &grid.point(lin))?;
    if grad(lin)?.1 {
        return Ok(plain_laplacian_at(grid, &dphi, vals, lin, u.order));
    }
    let v = divergence_at(grid, &dphi, &|l, d| grad(l).map_or(f64::NAN, |(g, _)| g[d]), lin, u.order);
    if v.is_nan() {
        return Err(FinslerError::Numeric { msg: "gradient evaluation failed near node".into(), residual: f64::NAN });
    }
    Ok(v)
}

/// `Δ^{∇u} f` at a node of frame `k`.
pub fn linearized_laplacian(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    u: &ScalarFieldT,
    f: &ScalarFieldT,
    k: usize,
    lin: usize,
) -> Result<f64> {
    check_frame(u, k, lin)?;
    let grid = &u.grid;
    let uv = u.frame(k);
    let fv = f.frame(k);
    let n = grid.dim();
    let flux = |l: usize| -> Vec<f64> {
        let x = grid.point(l);
        let du = grid.gradient(uv, l, u.order);
        let df = grid.gradient(fv, l, u.order);
        match gradient_from_differential(metric, &x, &du) {
            Ok((_, true)) => df,
            Ok((g, false)) => match metric.fundamental_g(&x, &g).solve(&df) {
                Ok(v) => v,
                Err(_) => vec![f64::NAN; n],
            },
            Err(_) => vec![f64::NAN; n],
        }
    };
    let dphi = measure.dphi(metric, &grid.point(lin))?;
    let v = divergence_at(grid, &dphi, &|l, d| flux(l)[d], lin, u.order);
    if v.is_nan() {
        return Err(FinslerError::Numeric { msg: "reference gradient evaluation failed near node".into(), residual: f64::NAN });
    }
    Ok(v)
}
