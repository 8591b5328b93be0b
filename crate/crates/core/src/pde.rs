//! Time stepping for `u_t = Δu + a·u·log u + b·u` on a chart grid.
//!
//! Each step applies the exact reaction flow `w' = a·w + b` in `w = log u`
//! (coefficients frozen at the step midpoint), then the diffusion step. The
//! diffusion operator is the compact divergence-form discretization of
//! `Δ^{∇u} = w⁻¹ ∂_i(w g^{ij}(x, ∇u) ∂_j)` with the reference direction taken
//! from the previous step, so that `Δ^{∇u}u = Δu` at the frozen state.

use crate::dual::{lift_axis, Dual};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::geometry::MeasureSpec;
use crate::grid::{GridChart, ScalarFieldT};
use crate::linalg::{sym_eig_extremes, Mat};
use crate::metric::MetricSpec;
use crate::operators::{finsler_laplacian_field, gradient_field, linearized_laplacian_field, reference_inverse_metric};
use crate::sparse::{bicgstab, Csr};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Reaction coefficients `a(x, t)`, `b(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeCoefficients {
    pub a: Expr,
    pub b: Expr,
}

impl PdeCoefficients {
    pub fn new(a: &str, b: &str) -> Result<Self> {
        Ok(PdeCoefficients { a: Expr::parse(a)?, b: Expr::parse(b)? })
    }

    pub fn zero() -> Self {
        PdeCoefficients { a: Expr::constant(0.0), b: Expr::constant(0.0) }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        PdeCoefficients { a: Expr::constant(a), b: Expr::constant(b) }
    }

    pub fn a_at(&self, x: &[f64], t: f64) -> f64 {
        self.a.eval_f64(x, t)
    }

    pub fn b_at(&self, x: &[f64], t: f64) -> f64 {
        self.b.eval_f64(x, t)
    }

    /// `∂_t a` by forward-mode differentiation.
    pub fn a_t(&self, x: &[f64], t: f64) -> f64 {
        let xd: Vec<Dual<f64>> = x.iter().map(|v| Dual::lift(*v)).collect();
        self.a.eval(&xd, Dual::new(t, 1.0)).d
    }

    pub fn is_constant(&self) -> bool {
        self.a.as_constant().is_some() && self.b.as_constant().is_some()
    }

    pub fn is_time_independent(&self) -> bool {
        !self.a.uses_time() && !self.b.uses_time()
    }
}

/// Differential of a coefficient expression in `x`.
pub fn expr_differential(e: &Expr, x: &[f64], t: f64) -> Vec<f64> {
    (0..x.len()).map(|k| e.eval(&lift_axis(x, k), Dual::lift(t)).d).collect()
}

/// Coefficient bounds measured over a run region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    /// `sup |∂_t a|`
    pub a_t_sup: f64,
    /// `sup F_{∇u}(∇^{∇u} a)`
    pub grad_a_sup: f64,
    /// `sup F_{∇u}(∇^{∇u} b)`
    pub grad_b_sup: f64,
    /// `inf Δ^{∇u} b`
    pub lap_b_inf: f64,
    /// `sup |Δ^{∇u} b|`
    pub lap_b_sup: f64,
    /// `sup (Δ^{∇u} a + a_t)⁺`
    pub lap_a_plus_sup: f64,
}

impl CoefficientBounds {
    fn empty() -> Self {
        CoefficientBounds {
            a_min: f64::INFINITY,
            a_max: f64::NEG_INFINITY,
            b_min: f64::INFINITY,
            b_max: f64::NEG_INFINITY,
            a_t_sup: 0.0,
            grad_a_sup: 0.0,
            grad_b_sup: 0.0,
            lap_b_inf: f64::INFINITY,
            lap_b_sup: 0.0,
            lap_a_plus_sup: 0.0,
        }
    }

    /// Bounds of constant coefficients, where every derivative vanishes.
    pub fn constant(a: f64, b: f64) -> Self {
        CoefficientBounds {
            a_min: a,
            a_max: a,
            b_min: b,
            b_max: b,
            a_t_sup: 0.0,
            grad_a_sup: 0.0,
            grad_b_sup: 0.0,
            lap_b_inf: 0.0,
            lap_b_sup: 0.0,
            lap_a_plus_sup: 0.0,
        }
    }

    pub fn a_sup(&self) -> f64 {
        self.a_min.abs().max(self.a_max.abs())
    }

    pub fn a_plus_sup(&self) -> f64 {
        self.a_max.max(0.0)
    }

    pub fn b_sup(&self) -> f64 {
        self.b_min.abs().max(self.b_max.abs())
    }

    pub fn is_finite(&self) -> bool {
        [
            self.a_min,
            self.a_max,
            self.b_min,
            self.b_max,
            self.a_t_sup,
            self.grad_a_sup,
            self.grad_b_sup,
            self.lap_b_inf,
            self.lap_b_sup,
            self.lap_a_plus_sup,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Measure coefficient bounds over `region` nodes, on every `stride`-th frame.
pub fn measure_bounds(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    coeffs: &PdeCoefficients,
    u: &ScalarFieldT,
    region: &[bool],
    stride: usize,
) -> Result<CoefficientBounds> {
    let grid = &u.grid;
    let mut out = CoefficientBounds::empty();
    let frames: Vec<usize> = (0..u.n_times()).step_by(stride.max(1)).chain(std::iter::once(u.n_times() - 1)).collect();
    let constant = coeffs.is_constant();
    for &k in &frames {
        let t = u.time(k);
        let pts = grid.points();
        let av: Vec<f64> = pts.par_iter().map(|x| coeffs.a_at(x, t)).collect();
        let bv: Vec<f64> = pts.par_iter().map(|x| coeffs.b_at(x, t)).collect();
        let (lap_a, lap_b, ga, gb) = if constant {
            let z = vec![0.0; grid.len()];
            (z.clone(), z.clone(), z.clone(), z)
        } else {
            let gf = gradient_field(metric, grid, u.frame(k), u.order)?;
            let ginv = reference_inverse_metric(metric, grid, &gf)?;
            let la = linearized_laplacian_field(metric, measure, grid, &gf, &av, u.order)?;
            let lb = linearized_laplacian_field(metric, measure, grid, &gf, &bv, u.order)?;
            let norm = |e: &Expr| -> Vec<f64> {
                (0..grid.len())
                    .into_par_iter()
                    .map(|l| {
                        let d = expr_differential(e, &pts[l], t);
                        ginv[l].bilinear(&d, &d).max(0.0).sqrt()
                    })
                    .collect()
            };
            (la, lb, norm(&coeffs.a), norm(&coeffs.b))
        };
        for l in (0..grid.len()).filter(|l| region[*l]) {
            let at = coeffs.a_t(&pts[l], t);
            out.a_min = out.a_min.min(av[l]);
            out.a_max = out.a_max.max(av[l]);
            out.b_min = out.b_min.min(bv[l]);
            out.b_max = out.b_max.max(bv[l]);
            out.a_t_sup = out.a_t_sup.max(at.abs());
            out.grad_a_sup = out.grad_a_sup.max(ga[l]);
            out.grad_b_sup = out.grad_b_sup.max(gb[l]);
            out.lap_b_inf = out.lap_b_inf.min(lap_b[l]);
            out.lap_b_sup = out.lap_b_sup.max(lap_b[l].abs());
            out.lap_a_plus_sup = out.lap_a_plus_sup.max((lap_a[l] + at).max(0.0));
        }
    }
    if !out.is_finite() {
        return Err(FinslerError::Numeric { msg: "coefficient bounds are not finite on the region".into(), residual: f64::NAN });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forward Euler diffusion; subject to a step-size bound.
    Explicit,
    /// Backward Euler diffusion with the reference direction frozen.
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Boundary {
    /// Boundary nodes keep their initial values.
    DirichletPositive,
    /// Zero-flux mirror condition; boundary nodes evolve.
    Reflecting,
    /// Boundary nodes follow a prescribed `u(x, t)`.
    DirichletExact { value: Expr },
}

fn default_floor() -> f64 {
    1e-12
}

fn default_one() -> usize {
    1
}

fn default_linear_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub dt: f64,
    /// Duration of the run, measured from the initial time.
    pub t_final: f64,
    pub scheme: Scheme,
    #[serde(default = "default_floor")]
    pub floor: f64,
    pub boundary: Boundary,
    /// Keep every `save_every`-th step in the output series.
    #[serde(default = "default_one")]
    pub save_every: usize,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
}

impl SolveConfig {
    pub fn new(dt: f64, t_final: f64, scheme: Scheme, boundary: Boundary) -> Self {
        SolveConfig { dt, t_final, scheme, floor: default_floor(), boundary, save_every: 1, linear_tol: default_linear_tol() }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(FinslerError::Config("dt and t_final must be positive".into()));
        }
        let s = self.t_final / self.dt;
        let r = s.round();
        if (s - r).abs() > 1e-6 * s.max(1.0) {
            return Err(FinslerError::Config(format!("t_final {} is not a multiple of dt {}", self.t_final, self.dt)));
        }
        Ok(r as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub series: ScalarFieldT,
    pub steps: usize,
    /// Node values raised to the positivity floor, summed over steps.
    pub floor_hits: usize,
    pub linear_iterations: usize,
    pub max_linear_residual: f64,
    /// Largest stable step of the explicit scheme at the initial state.
    pub stable_dt: Option<f64>,
}

/// `u·log u` with the floor applied and `0·log 0 = 0`.
pub fn u_log_u(u: f64, floor: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        let v = u.max(floor);
        v * v.ln()
    }
}

/// Exact flow of `w' = a·w + b` over `dt`.
pub fn reaction_flow(w: f64, a: f64, b: f64, dt: f64) -> f64 {
    let phi = if (a * dt).abs() > 1e-14 { (a * dt).exp_m1() / a } else { dt };
    w + (a * w + b) * phi
}

fn neighbour(grid: &GridChart, idx: &[usize], shift: &[(usize, isize)], reflect: bool) -> Option<usize> {
    let mut j = idx.to_vec();
    for &(d, s) in shift {
        let c = grid.counts[d] as isize;
        let mut v = j[d] as isize + s;
        if v < 0 || v >= c {
            if !reflect {
                return None;
            }
            v = if v < 0 { -v } else { 2 * (c - 1) - v };
        }
        j[d] = v as usize;
    }
    Some(grid.linear(&j))
}

/// Rows of the compact divergence-form operator `w⁻¹ ∂_i(w g^{ij} ∂_j ·)`
/// with `k = w·g⁻¹` at every node. Rows of nodes without a full stencil are
/// left empty.
pub fn diffusion_rows(grid: &GridChart, k: &[Mat<f64>], w: &[f64], reflect: bool) -> Vec<Vec<(usize, f64)>> {
    let n = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|l| {
            let idx = grid.multi_index(l);
            let mut row = Vec::with_capacity(1 + 2 * n + 4 * n * (n - 1));
            if !reflect && grid.on_boundary(l) {
                return row;
            }
            let nb = |shift: &[(usize, isize)]| neighbour(grid, &idx, shift, reflect).expect("stencil inside grid");
            for d in 0..n {
                let h2 = grid.h(d) * grid.h(d);
                let (p, m) = (nb(&[(d, 1)]), nb(&[(d, -1)]));
                let kp = 0.5 * (k[l].get(d, d) + k[p].get(d, d)) / h2;
                let km = 0.5 * (k[l].get(d, d) + k[m].get(d, d)) / h2;
                row.push((p, kp / w[l]));
                row.push((m, km / w[l]));
                row.push((l, -(kp + km) / w[l]));
                for e in (0..n).filter(|e| *e != d) {
                    let c = 1.0 / (4.0 * grid.h(d) * grid.h(e) * w[l]);
                    let kp = k[p].get(d, e) * c;
                    let km = k[m].get(d, e) * c;
                    row.push((nb(&[(d, 1), (e, 1)]), kp));
                    row.push((nb(&[(d, 1), (e, -1)]), -kp));
                    row.push((nb(&[(d, -1), (e, 1)]), -km));
                    row.push((nb(&[(d, -1), (e, -1)]), km));
                }
            }
            row
        })
        .collect()
}

/// Frozen-coefficient diffusion operator at the state `u`.
pub fn frozen_operator(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    grid: &GridChart,
    u: &[f64],
    reflect: bool,
) -> Result<(Vec<Vec<(usize, f64)>>, Vec<Mat<f64>>)> {
    let gf = gradient_field(metric, grid, u, 2)?;
    let ginv = reference_inverse_metric(metric, grid, &gf)?;
    let w: Vec<f64> =
        (0..grid.len()).into_par_iter().map(|l| measure.phi::<f64>(metric, &grid.point(l)).map(f64::exp)).collect::<Result<_>>()?;
    let k: Vec<Mat<f64>> = ginv.iter().zip(&w).map(|(g, wl)| Mat::from_fn(grid.dim(), |i, j| g.get(i, j) * wl)).collect();
    Ok((diffusion_rows(grid, &k, &w, reflect), ginv))
}

fn apply_rows(rows: &[Vec<(usize, f64)>], u: &[f64]) -> Vec<f64> {
    rows.par_iter().map(|r| r.iter().map(|(c, v)| v * u[*c]).sum()).collect()
}

/// Largest explicit step `1 / (2 λ_max Σ h_d⁻²)` for the given inverse metrics.
pub fn explicit_step_bound(grid: &GridChart, ginv: &[Mat<f64>]) -> f64 {
    let lmax = ginv.iter().map(|g| sym_eig_extremes(g).1).fold(0.0, f64::max);
    let s: f64 = (0..grid.dim()).map(|d| 1.0 / (grid.h(d) * grid.h(d))).sum();
    1.0 / (2.0 * lmax * s)
}

/// Advance `u_t = Δu + a·u·log u + b·u` from the last frame of `u0`.
pub fn solve_log_schrodinger(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    coeffs: &PdeCoefficients,
    u0: &ScalarFieldT,
    cfg: &SolveConfig,
) -> Result<SolveOutcome> {
    let grid = u0.grid.clone();
    let steps = cfg.steps()?;
    let start = u0.time(u0.n_times() - 1);
    let mut u = u0.last().to_vec();
    if u.iter().any(|v| !(*v > 0.0)) {
        return Err(FinslerError::Domain("initial data must be positive".into()));
    }
    let reflect = matches!(cfg.boundary, Boundary::Reflecting);
    let fixed: Vec<bool> = (0..grid.len()).map(|l| !reflect && grid.on_boundary(l)).collect();
    let pts = grid.points();

    let mut stable_dt = None;
    if cfg.scheme == Scheme::Explicit {
        let (_, ginv) = frozen_operator(metric, measure, &grid, &u, reflect)?;
        let bound = explicit_step_bound(&grid, &ginv);
        stable_dt = Some(bound);
        if cfg.dt > bound {
            return Err(FinslerError::Stability(format!("explicit step dt = {} exceeds the bound {bound:.4e}", cfg.dt)));
        }
    }

    let mut frames = vec![u.clone()];
    let mut floor_hits = 0;
    let mut linear_iterations = 0;
    let mut max_linear_residual: f64 = 0.0;
    for step in 0..steps {
        let t = start + step as f64 * cfg.dt;
        let t_next = t + cfg.dt;
        let tm = t + 0.5 * cfg.dt;
        let (rows, _) = frozen_operator(metric, measure, &grid, &u, reflect)?;

        let star: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|l| {
                if fixed[l] {
                    return u[l];
                }
                let w = u[l].max(cfg.floor).ln();
                reaction_flow(w, coeffs.a_at(&pts[l], tm), coeffs.b_at(&pts[l], tm), cfg.dt).exp()
            })
            .collect();
        let boundary_value = |l: usize| -> f64 {
            match &cfg.boundary {
                Boundary::DirichletExact { value } => value.eval_f64(&pts[l], t_next),
                _ => u0.last()[l],
            }
        };

        let mut next = match cfg.scheme {
            Scheme::Explicit => {
                let au = apply_rows(&rows, &star);
                (0..grid.len()).map(|l| if fixed[l] { boundary_value(l) } else { star[l] + cfg.dt * au[l] }).collect()
            }
            Scheme::SemiImplicit => {
                let sys: Vec<Vec<(usize, f64)>> = rows
                    .into_iter()
                    .enumerate()
                    .map(|(l, r)| {
                        if fixed[l] {
                            return vec![(l, 1.0)];
                        }
                        let mut s: Vec<(usize, f64)> = r.into_iter().map(|(c, v)| (c, -cfg.dt * v)).collect();
                        s.push((l, 1.0));
                        s
                    })
                    .collect();
                let a = Csr::from_rows(sys);
                let rhs: Vec<f64> = (0..grid.len()).map(|l| if fixed[l] { boundary_value(l) } else { star[l] }).collect();
                let mut x = rhs.clone();
                let st = bicgstab(&a, &rhs, &mut x, cfg.linear_tol, 2000)?;
                linear_iterations += st.iterations;
                max_linear_residual = max_linear_residual.max(st.residual);
                x
            }
        };
        for v in next.iter_mut() {
            if !v.is_finite() {
                return Err(FinslerError::Numeric { msg: format!("non-finite value at step {}", step + 1), residual: f64::NAN });
            }
            if *v < cfg.floor {
                *v = cfg.floor;
                floor_hits += 1;
            }
        }
        u = next;
        if (step + 1) % cfg.save_every.max(1) == 0 {
            frames.push(u.clone());
        }
    }
    let series = ScalarFieldT::new(grid, start, cfg.dt * cfg.save_every.max(1) as f64, u0.order, frames)?;
    Ok(SolveOutcome { series, steps, floor_hits, linear_iterations, max_linear_residual, stable_dt })
}

/// Pointwise PDE residual `Δu − u_t + a·u·log u + b·u` with stencil operators,
/// maximized over interior nodes, for each frame with a central time difference.
pub fn pde_residual(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    coeffs: &PdeCoefficients,
    u: &ScalarFieldT,
    floor: f64,
) -> Result<Vec<(f64, f64)>> {
    let grid = &u.grid;
    let pts = grid.points();
    (1..u.n_times().saturating_sub(1))
        .map(|k| {
            let t = u.time(k);
            let lap = finsler_laplacian_field(metric, measure, grid, u.frame(k), u.order)?;
            let r = (0..grid.len())
                .into_par_iter()
                .filter(|l| grid.is_interior(*l))
                .map(|l| {
                    let v = u.frame(k)[l];
                    let x = &pts[l];
                    (lap[l] - u.time_derivative(k, l) + coeffs.a_at(x, t) * u_log_u(v, floor) + coeffs.b_at(x, t) * v).abs()
                })
                .reduce(|| 0.0, f64::max);
            Ok((t, r))
        })
        .collect()
}

/// Result of a stationary solve of `Δu + a·u·log u + b·u = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Max-norm residual of the discrete equation at the last iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Newton iteration for the stationary equation with time-independent
/// coefficients; the diffusion coefficients are re-frozen at every iterate.
pub fn solve_stationary(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    coeffs: &PdeCoefficients,
    grid: &GridChart,
    init: &[f64],
    boundary: &Boundary,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryOutcome> {
    if !coeffs.is_time_independent() {
        return Err(FinslerError::Config("stationary solve needs time-independent coefficients".into()));
    }
    let reflect = matches!(boundary, Boundary::Reflecting);
    let fixed: Vec<bool> = (0..grid.len()).map(|l| !reflect && grid.on_boundary(l)).collect();
    let pts = grid.points();
    let av: Vec<f64> = pts.iter().map(|x| coeffs.a_at(x, 0.0)).collect();
    let bv: Vec<f64> = pts.iter().map(|x| coeffs.b_at(x, 0.0)).collect();
    let floor = default_floor();
    let mut u = init.to_vec();
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let (rows, _) = frozen_operator(metric, measure, grid, &u, reflect)?;
        let au = apply_rows(&rows, &u);
        let res: Vec<f64> =
            (0..grid.len()).map(|l| if fixed[l] { 0.0 } else { au[l] + av[l] * u_log_u(u[l], floor) + bv[l] * u[l] }).collect();
        residual = res.iter().fold(0.0, |m, r| m.max(r.abs()));
        if residual < tol {
            return Ok(StationaryOutcome { u, iterations: it, residual, converged: true });
        }
        if it == max_iter {
            break;
        }
        let sys: Vec<Vec<(usize, f64)>> = rows
            .into_iter()
            .enumerate()
            .map(|(l, mut r)| {
                if fixed[l] {
                    return vec![(l, 1.0)];
                }
                r.push((l, av[l] * (u[l].max(floor).ln() + 1.0) + bv[l]));
                r
            })
            .collect();
        let a = Csr::from_rows(sys);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; grid.len()];
        // the linearization is nearly singular when a ≈ 2 hits a Neumann
        // eigenvalue; an inexact step is fine, the outer residual decides
        match bicgstab(&a, &rhs, &mut delta, 1e-13, 5000) {
            Ok(_) => {}
            Err(FinslerError::Numeric { .. }) if delta.iter().all(|d| d.is_finite()) => {}
            Err(e) => return Err(e),
        }
        // damp steps that would leave the positive cone
        let mut lambda: f64 = 1.0;
        while u.iter().zip(&delta).any(|(v, d)| v + lambda * d <= 0.0) && lambda > 1e-6 {
            lambda *= 0.5;
        }
        u.iter_mut().zip(&delta).for_each(|(v, d)| *v += lambda * d);
    }
    Ok(StationaryOutcome { u, iterations: max_iter, residual, converged: false })
}

/// Mollifier `J_ε(s) ∝ exp(−s²/ε²)` on `|s| < ε`, as discrete weights with
/// `Σ J·dt = 1`.
pub fn mollifier_weights(eps: f64, dt: f64) -> Result<Vec<f64>> {
    if !(eps > dt) {
        return Err(FinslerError::Domain(format!("mollification width {eps} must exceed the frame spacing {dt}")));
    }
    let m = ((eps / dt).ceil() as usize).saturating_sub(1);
    let m = if (m as f64 + 1.0) * dt < eps { m + 1 } else { m };
    let raw: Vec<f64> = (0..=2 * m)
        .map(|j| {
            let s = (j as f64 - m as f64) * dt;
            if s.abs() < eps {
                (-(s * s) / (eps * eps)).exp() / eps
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = raw.iter().sum::<f64>() * dt;
    Ok(raw.iter().map(|w| w / mass).collect())
}

/// Time mollification on the shrunken interval of frames at distance
/// greater than `ε` from both ends.
pub fn time_mollify(u: &ScalarFieldT, eps: f64) -> Result<ScalarFieldT> {
    let w = mollifier_weights(eps, u.dt)?;
    let m = w.len() / 2;
    let total = u.n_times();
    let first = (0..total).find(|k| (*k as f64) * u.dt > eps && *k >= m);
    let first = first.ok_or_else(|| FinslerError::Domain("series too short for this mollification width".into()))?;
    let last = total - 1 - first;
    if last < first {
        return Err(FinslerError::Domain("series too short for this mollification width".into()));
    }
    let frames: Vec<Vec<f64>> = (first..=last)
        .map(|k| {
            (0..u.grid.len())
                .into_par_iter()
                .map(|l| w.iter().enumerate().map(|(j, wj)| wj * u.frames[k + j - m][l]).sum::<f64>() * u.dt)
                .collect()
        })
        .collect();
    ScalarFieldT::new(u.grid.clone(), u.time(first), u.dt, u.order, frames)
}

/// Manifest written next to exported frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub grid: GridChart,
    pub t0: f64,
    pub dt: f64,
    pub frames: Vec<String>,
    pub coefficients: PdeCoefficients,
    pub bounds: Option<CoefficientBounds>,
}

/// Write every `stride`-th frame as CSV plus `manifest.json` into `dir`.
pub fn export_series(
    u: &ScalarFieldT,
    dir: &Path,
    stride: usize,
    coeffs: &PdeCoefficients,
    bounds: Option<&CoefficientBounds>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let ks: Vec<usize> = (0..u.n_times()).step_by(stride.max(1)).collect();
    for k in ks {
        let name = format!("frame_{k:05}.csv");
        std::fs::write(dir.join(&name), u.frame_csv(k))?;
        names.push(name);
    }
    let manifest =
        SeriesManifest { grid: u.grid.clone(), t0: u.t0, dt: u.dt, frames: names, coefficients: coeffs.clone(), bounds: bounds.cloned() };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| FinslerError::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}
