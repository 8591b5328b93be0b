//! Pointwise verification of the gradient-estimate chain on computed
//! solutions: the logarithmic identity for `f = log(u/D)`, the evolution
//! inequality for the Harnack quantity `L`, the Li-Yau bound, the Harnack
//! inequality and the a priori bound for the stationary equation.
//!
//! Every check returns a [`MarginReport`] whose records carry
//! `margin = larger side − smaller side`, so a record passes when its margin
//! is at least `−tol`.

use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::geodesics::{forward_distance_with, path_action_with, PathOptions};
use crate::geometry::MeasureSpec;
use crate::grid::{GridChart, ScalarFieldT};
use crate::metric::{dual_norm, MetricSpec};
use crate::operators::{finsler_laplacian_field, gradient_field, linearized_laplacian_field, reference_inverse_metric, CRITICAL_TOL};
use crate::pde::{expr_differential, CoefficientBounds, PdeCoefficients, StationaryOutcome};
use crate::report::{MarginReport, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Constants of the estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    /// Effective dimension `N`.
    pub n_eff: f64,
    /// Lower Ricci bound `−K` used in the evolution inequality.
    pub k: f64,
    /// Lower Ricci bound `−K(2R)` on the doubled ball, used in `B`.
    pub k2r: f64,
    /// Bound on the non-Riemannian tensors.
    pub k0: f64,
    /// The constant `A > sup a⁺`.
    pub a_const: f64,
    /// Upper bound `D ≥ u`.
    pub d: f64,
    /// The constant `E`.
    pub e: f64,
    pub c1: f64,
    pub c2: f64,
    /// Ball radius `R`.
    pub r: f64,
    /// Laplacian comparison constant `C(N, α)`.
    pub c_n_alpha: f64,
    /// Laplacian comparison constant `C₀(K₀, α)`.
    pub c0: f64,
    /// Misalignment.
    pub alpha: f64,
    /// Fixed value of `B` replacing the derived one.
    #[serde(default)]
    pub b_override: Option<f64>,
}

impl EstimateParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |s: &str| Err(FinslerError::Parameter(s.to_string()));
        if !(self.n_eff >= dim as f64) {
            return bad("effective dimension N must be at least the manifold dimension");
        }
        if !(self.k >= 0.0 && self.k2r >= 0.0 && self.k0 >= 0.0) {
            return bad("curvature constants K, K(2R), K0 must be nonnegative");
        }
        if !(self.d > 0.0) {
            return bad("D must be positive");
        }
        if !(self.r > 0.0 && self.c1 > 0.0 && self.c2 > 0.0) {
            return bad("R, C1, C2 must be positive");
        }
        if !(self.alpha >= 1.0) {
            return bad("misalignment must be at least 1");
        }
        if self.b_override.is_some_and(|b| !(b >= 0.0)) {
            return bad("B must be nonnegative");
        }
        if !(self.c_n_alpha > 0.0 && self.c0 >= 0.0) {
            return bad("comparison constants must satisfy C(N,alpha) > 0 and C0 >= 0");
        }
        if ![self.a_const, self.e].iter().all(|v| v.is_finite()) {
            return bad("A and E must be finite");
        }
        Ok(())
    }

    pub fn log_d(&self) -> f64 {
        self.d.ln()
    }

    /// `A − 2K − 2 − |log D|`.
    pub fn curvature_bracket(&self) -> f64 {
        self.a_const - 2.0 * self.k - 2.0 - self.log_d().abs()
    }

    /// `C(N,α)·√(K(2R)/C)·coth(R√(K(2R)/C)) + C₀`, with the `K(2R) → 0`
    /// limit `C/R + C₀`.
    pub fn comparison_term(&self) -> f64 {
        let c = self.c_n_alpha;
        let s = (self.k2r / c).sqrt();
        let main = if s * self.r < 1e-8 { c / self.r } else { c * s / (s * self.r).tanh() };
        main + self.c0
    }

    /// `B` in the form the cutoff argument needs:
    /// `2C₁²α/R² + (C₁/R)[…] + αC₂/R²`.
    pub fn b_proof(&self) -> f64 {
        let r2 = self.r * self.r;
        2.0 * self.c1 * self.c1 * self.alpha / r2 + self.c1 / self.r * self.comparison_term() + self.alpha * self.c2 / r2
    }

    /// `B` used by the bounds: the override if set, else [`Self::b_proof`].
    pub fn b(&self) -> f64 {
        self.b_override.unwrap_or_else(|| self.b_proof())
    }

    /// `B` as displayed with the theorem: `{2C₁²α²/R² − (C₁/R)[…] − αC₂/R²}⁺`.
    pub fn b_statement(&self) -> f64 {
        let r2 = self.r * self.r;
        (2.0 * self.c1 * self.c1 * self.alpha * self.alpha / r2 - self.c1 / self.r * self.comparison_term() - self.alpha * self.c2 / r2)
            .max(0.0)
    }
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// `sup (E − a·log D)⁺` over the measured range of `a`.
pub fn e_minus_a_log_d(e: f64, bounds: &CoefficientBounds, log_d: f64) -> f64 {
    pos(e - bounds.a_min * log_d).max(pos(e - bounds.a_max * log_d))
}

/// The two case bounds for `L` and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiYauBound {
    pub case1: f64,
    pub case2: f64,
    pub total: f64,
}

/// Upper bound for `L(x, t)` on `B_p(R)`: sum of the case-1 and case-2
/// bounds, with `B` in the proof form.
pub fn li_yau_rhs(p: &EstimateParams, bounds: &CoefficientBounds, t: f64) -> Result<LiYauBound> {
    let a_plus = bounds.a_plus_sup();
    if !(p.a_const > a_plus) {
        return Err(FinslerError::Parameter(format!("A = {} must exceed sup a+ = {a_plus} on the ball (A > a+)", p.a_const)));
    }
    let n = p.n_eff;
    let b = p.b();
    let cut = n * p.c1 * p.c1 / (p.r * p.r);
    let em = e_minus_a_log_d(p.e, bounds, p.log_d());
    let q = p.curvature_bracket();
    let case1 = 4.0
        * n
        * (1.0 + t * (a_plus + b + cut + 2.0 * em / n) + 0.5 * t * (-pos(q) + bounds.lap_a_plus_sup / (4.0 * (p.a_const - a_plus))));
    let case2 = 4.0 * n * (b * t + 1.0 + a_plus * t + cut * t + 0.5 * t * (-pos(-q))) + 8.0 * t * em;
    Ok(LiYauBound { case1, case2, total: case1 + case2 })
}

/// Right side of the displayed theorem inequality, without the factor `t`.
pub fn li_yau_statement_rhs(p: &EstimateParams, bounds: &CoefficientBounds, t: f64) -> f64 {
    let a_plus = bounds.a_plus_sup();
    let n = p.n_eff;
    let em = e_minus_a_log_d(p.e, bounds, p.log_d());
    4.0 * n
        * (1.0 / t
            + (a_plus + p.b_statement() + n * p.c1 * p.c1 / (p.r * p.r) + 2.0 * em / n)
            + 0.5 * (-pos(p.curvature_bracket()) + bounds.lap_a_plus_sup / (4.0 * (p.a_const - a_plus))))
}

/// Worst case over the measured coefficient ranges of the composite
/// quantity that must be nonnegative for `E` to be admissible.
pub fn e_composite(e: f64, bounds: &CoefficientBounds, d: f64, a_const: f64, n_eff: f64) -> f64 {
    let ld = d.ln();
    let mut worst = f64::INFINITY;
    for b in [bounds.b_min, bounds.b_max] {
        // quadratic in a: c2 a² + c1 a + c0
        let c2 = 2.0 * ld * ld / n_eff - ld;
        let c1 = -4.0 * e * ld / n_eff + 2.0 * e + b - a_const * ld;
        let c0 = 2.0 * e * e / n_eff - a_const * b;
        let g = |a: f64| c2 * a * a + c1 * a + c0;
        let mut m = g(bounds.a_min).min(g(bounds.a_max));
        if c2 > 0.0 {
            let v = -c1 / (2.0 * c2);
            if v > bounds.a_min && v < bounds.a_max {
                m = m.min(g(v));
            }
        }
        worst = worst.min(m);
    }
    worst - 2.0 * bounds.a_t_sup * ld.abs() + 2.0 * bounds.lap_b_inf
        - bounds.grad_b_sup * bounds.grad_b_sup
        - (1.0 + ld.abs()) * bounds.grad_a_sup * bounds.grad_a_sup
}

/// All three admissibility conditions on `E`.
pub fn e_feasible(e: f64, bounds: &CoefficientBounds, d: f64, a_const: f64, n_eff: f64) -> bool {
    let ld = d.ln();
    e + bounds.b_min >= 0.0 && e - (bounds.a_min * ld).max(bounds.a_max * ld) >= 0.0 && e_composite(e, bounds, d, a_const, n_eff) >= 0.0
}

/// Smallest admissible `E` on the grid `{0} ∪ {10⁻⁶·1.25ᵏ}`.
pub fn choose_e(bounds: &CoefficientBounds, d: f64, a_const: f64, n_eff: f64) -> Result<f64> {
    if !bounds.is_finite() || !(d > 0.0) {
        return Err(FinslerError::Parameter("E search needs finite bounds and D > 0".into()));
    }
    let mut limit = 1e6;
    let mut e = 0.0;
    for _ in 0..20 {
        while e <= limit {
            if e_feasible(e, bounds, d, a_const, n_eff) {
                return Ok(e);
            }
            e = if e == 0.0 { 1e-6 } else { e * 1.25 };
        }
        limit *= 3.0;
    }
    Err(FinslerError::Infeasible(format!("no admissible E up to {limit:.3e}")))
}

/// `E` used for the stationary equation with `a = A = 2`, `D = 1`:
/// `√N sup|Δ^{∇u}V| + √(N/2) sup F(∇^{∇u}V) + sup|V|`.
pub fn stationary_e(bounds: &CoefficientBounds, n_eff: f64) -> f64 {
    n_eff.sqrt() * bounds.lap_b_sup + (n_eff / 2.0).sqrt() * bounds.grad_b_sup + bounds.b_sup()
}

/// Which nodes and frames a scan visits.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanOptions {
    pub region: Vec<bool>,
    pub frame_stride: usize,
}

impl ScanOptions {
    /// Interior nodes of the grid, every frame.
    pub fn interior(grid: &GridChart) -> Self {
        ScanOptions { region: (0..grid.len()).map(|l| grid.is_interior(l)).collect(), frame_stride: 1 }
    }

    pub fn restricted(mut self, mask: &[bool]) -> Self {
        self.region.iter_mut().zip(mask).for_each(|(r, m)| *r &= *m);
        self
    }
}

/// Nodes `x` with forward distance `d(p, x) < radius`.
pub fn ball_mask(metric: &MetricSpec, grid: &GridChart, p: &[f64], radius: f64, opts: &PathOptions) -> Result<Vec<bool>> {
    (0..grid.len()).into_par_iter().map(|l| Ok(forward_distance_with(metric, p, &grid.point(l), opts)?.length < radius)).collect()
}

/// A computed solution with its equation data.
#[derive(Clone, Copy, Debug)]
pub struct Evolution<'a> {
    pub metric: &'a MetricSpec,
    pub measure: &'a MeasureSpec,
    pub coeffs: &'a PdeCoefficients,
    pub u: &'a ScalarFieldT,
    /// Start time of the solution; estimates use `t − origin`.
    pub origin: f64,
}

impl<'a> Evolution<'a> {
    /// Estimate time of frame `k`.
    pub fn t(&self, k: usize) -> f64 {
        self.u.time(k) - self.origin
    }

    fn check_times(&self) -> Result<()> {
        if !(self.t(0) >= 0.0) || self.u.n_times() < 3 {
            return Err(FinslerError::Domain("the series must start at or after its origin and hold at least three frames".into()));
        }
        if self.u.frames.iter().flatten().any(|v| !(*v > 0.0)) {
            return Err(FinslerError::Domain("the solution must be positive".into()));
        }
        Ok(())
    }

    /// `f_t` at an interior frame, central differences of `log u`.
    pub fn f_t(&self, k: usize, l: usize) -> f64 {
        let u = self.u;
        (u.frames[k + 1][l].ln() - u.frames[k - 1][l].ln()) / (2.0 * u.dt)
    }

    fn log_frame(&self, k: usize) -> Vec<f64> {
        self.u.frames[k].iter().map(|v| v.ln()).collect()
    }

    /// `F²(∇f)` at every node of frame `k`.
    pub fn grad_f_sq(&self, k: usize) -> Result<Vec<f64>> {
        let grid = &self.u.grid;
        let lf = self.log_frame(k);
        (0..grid.len())
            .into_par_iter()
            .map(|l| Ok(dual_norm(self.metric, &grid.point(l), &grid.gradient(&lf, l, self.u.order))?.powi(2)))
            .collect()
    }

    /// `L = t[F²(∇f) + (A+a)f + 2(E+b) − 2f_t]` at every node of an
    /// interior frame `k`.
    pub fn l_field(&self, p: &EstimateParams, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k + 1 >= self.u.n_times() {
            return Err(FinslerError::Domain(format!("L needs a central time difference; frame {k} is at the end of the series")));
        }
        let grid = &self.u.grid;
        let t = self.t(k);
        let tu = self.u.time(k);
        let g2 = self.grad_f_sq(k)?;
        let ld = p.log_d();
        Ok((0..grid.len())
            .into_par_iter()
            .map(|l| {
                let x = grid.point(l);
                let f = self.u.frames[k][l].ln() - ld;
                let a = self.coeffs.a_at(&x, tu);
                let b = self.coeffs.b_at(&x, tu);
                t * (g2[l] + (p.a_const + a) * f + 2.0 * (p.e + b) - 2.0 * self.f_t(k, l))
            })
            .collect())
    }

    /// `L(x, t)` at a grid node and a stored time.
    pub fn quantity_l(&self, p: &EstimateParams, x: &[f64], t: f64) -> Result<f64> {
        let l = self.u.grid.node_at(x).ok_or_else(|| FinslerError::Domain("x is not a grid node".into()))?;
        let s = (t + self.origin - self.u.t0) / self.u.dt;
        let k = s.round();
        if (s - k).abs() > 1e-9 || k < 0.0 {
            return Err(FinslerError::Domain("t is not a stored time".into()));
        }
        if !(t > 0.0) {
            return Err(FinslerError::Domain("L needs t > 0".into()));
        }
        Ok(self.l_field(p, k as usize)?[l])
    }

    fn frames(&self, lo: usize, hi_excl: usize, stride: usize) -> Vec<usize> {
        (lo..hi_excl).step_by(stride.max(1)).collect()
    }
}

/// Residual of `Δf = f_t − af − a log D − b − F²(∇f)` on the scan region.
/// Records carry `|residual|` against zero; the report passes when the
/// largest residual is within `tol`.
pub fn check_lemma32(ev: &Evolution, d: f64, tol: f64, opts: &ScanOptions) -> Result<MarginReport> {
    ev.check_times()?;
    let grid = &ev.u.grid;
    let ld = d.ln();
    let mut rep = MarginReport::new("lemma32", tol);
    let frames = ev.frames(1, ev.u.n_times().saturating_sub(1), opts.frame_stride);
    for k in frames {
        let tu = ev.u.time(k);
        let f: Vec<f64> = ev.u.frames[k].iter().map(|v| v.ln() - ld).collect();
        let lap = finsler_laplacian_field(ev.metric, ev.measure, grid, &f, ev.u.order)?;
        let g2 = ev.grad_f_sq(k)?;
        let rows: Vec<(Vec<f64>, f64)> = (0..grid.len())
            .into_par_iter()
            .filter(|l| opts.region[*l])
            .map(|l| {
                let x = grid.point(l);
                let a = ev.coeffs.a_at(&x, tu);
                let b = ev.coeffs.b_at(&x, tu);
                let rhs = ev.f_t(k, l) - a * f[l] - a * ld - b - g2[l];
                (x, (lap[l] - rhs).abs())
            })
            .collect();
        for (x, r) in rows {
            rep.push(&x, ev.t(k), r, 0.0);
        }
    }
    rep.finalize();
    rep.value("max_residual", -rep.min_margin);
    Ok(rep)
}

/// Evolution inequality for `L`: margin `[Δ^{∇u}L − L_t] − RHS`, points
/// with `L ≤ 0` or a critical `u` excluded.
pub fn check_evolution_inequality(ev: &Evolution, p: &EstimateParams, tol: f64, opts: &ScanOptions) -> Result<MarginReport> {
    ev.check_times()?;
    p.validate(ev.u.grid.dim())?;
    let grid = &ev.u.grid;
    let u = ev.u;
    let mut rep = MarginReport::new("evolution", tol);
    let n = p.n_eff;
    let ld = p.log_d();
    let q = p.curvature_bracket();
    let m = u.n_times();
    if m < 5 {
        return Err(FinslerError::Domain("the evolution inequality needs at least five frames".into()));
    }
    let frames = ev.frames(2, m - 2, opts.frame_stride);
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; m];
    for k in frames {
        for j in [k - 1, k, k + 1] {
            if cache[j].is_none() {
                cache[j] = Some(ev.l_field(p, j)?);
            }
        }
        let (lm, l0, lp) = (cache[k - 1].as_ref().unwrap(), cache[k].as_ref().unwrap(), cache[k + 1].as_ref().unwrap());
        let t = ev.t(k);
        let tu = u.time(k);
        let gf = gradient_field(ev.metric, grid, u.frame(k), u.order)?;
        let lap_l = linearized_laplacian_field(ev.metric, ev.measure, grid, &gf, l0, u.order)?;
        let a_vals: Vec<f64> = grid.points().iter().map(|x| ev.coeffs.a_at(x, tu)).collect();
        let lap_a = if ev.coeffs.a.as_constant().is_some() {
            vec![0.0; grid.len()]
        } else {
            linearized_laplacian_field(ev.metric, ev.measure, grid, &gf, &a_vals, u.order)?
        };
        let g2 = ev.grad_f_sq(k)?;
        let rows: Vec<Option<(Vec<f64>, f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .filter(|l| opts.region[*l])
            .map(|l| {
                let big_l = l0[l];
                if gf.critical[l] || !(big_l > 0.0) {
                    return None;
                }
                let x = grid.point(l);
                let uv = u.frames[k][l];
                let a = a_vals[l];
                let a_t = ev.coeffs.a_t(&x, tu);
                let f = uv.ln() - ld;
                let h = g2[l] / big_l;
                let el = p.e - a * ld;
                let grad_f: Vec<f64> = gf.vecs[l].iter().map(|v| v / uv).collect();
                let dl = grid.gradient(l0, l, u.order);
                let inner: f64 = dl.iter().zip(&grad_f).map(|(p, q)| p * q).sum();
                let l_t = (lp[l] - lm[l]) / (2.0 * u.dt);
                let larger = lap_l[l] - l_t;
                let one_ht = 1.0 + h * t;
                let smaller = t
                    * (q * h * big_l + one_ht * one_ht * big_l * big_l / (2.0 * n * t * t) - 2.0 * one_ht * el * big_l / (n * t))
                    + t * f * (one_ht * (a - p.a_const) * big_l / (n * t) + lap_a[l] + a_t + 2.0 * (p.a_const - a) * el / n)
                    - big_l / t
                    - a * big_l
                    - 2.0 * inner;
                Some((x, smaller, larger))
            })
            .collect();
        let mut skipped = 0;
        for r in rows {
            match r {
                Some((x, s, g)) => rep.push(&x, t, s, g),
                None => skipped += 1,
            }
        }
        rep.exclude(skipped);
    }
    rep.value("K", p.k);
    rep.value("curvature_bracket", q);
    rep.finalize();
    Ok(rep)
}

/// Li-Yau bound `L(x, t) ≤ li_yau_rhs(t)` on the scan region.
/// Hypothesis violations are listed in `hypotheses`; the report is then
/// marked accordingly but still evaluated.
pub fn check_li_yau(
    ev: &Evolution,
    p: &EstimateParams,
    bounds: &CoefficientBounds,
    tol: f64,
    opts: &ScanOptions,
    hypotheses: &[String],
) -> Result<MarginReport> {
    ev.check_times()?;
    p.validate(ev.u.grid.dim())?;
    let grid = &ev.u.grid;
    let u = ev.u;
    let mut rep = MarginReport::new("liyau", tol);
    let mut worst_statement = f64::NEG_INFINITY;
    let frames = ev.frames(1, u.n_times().saturating_sub(1), opts.frame_stride);
    for k in frames {
        let t = ev.t(k);
        let bound = li_yau_rhs(p, bounds, t)?;
        let stmt_rhs = li_yau_statement_rhs(p, bounds, t);
        let lf = ev.l_field(p, k)?;
        let tu = u.time(k);
        let lu = ev.log_frame(k);
        for l in (0..grid.len()).filter(|l| opts.region[*l]) {
            let du = grid.gradient(&lu, l, u.order);
            if crate::linalg::norm2(&du) * u.frames[k][l] < CRITICAL_TOL || !(lf[l] > 0.0) {
                rep.exclude(1);
                continue;
            }
            let x = grid.point(l);
            rep.push(&x, t, lf[l], bound.total);
            let stmt_lhs = lf[l] / t - 2.0 * (p.e + ev.coeffs.b_at(&x, tu));
            worst_statement = worst_statement.max(stmt_lhs - stmt_rhs);
        }
    }
    rep.value("B_proof", p.b_proof());
    rep.value("B_statement", p.b_statement());
    rep.value("statement_form_max_excess", worst_statement);
    rep.finalize();
    if !hypotheses.is_empty() {
        for h in hypotheses {
            rep.note(h.clone());
        }
        rep.status = Status::HypothesesNotMet;
    }
    Ok(rep)
}

/// `T = 4N[B + NC₁²/R² + 2E/N + ½(−[−2K − 2 − |log D|]⁺)]`.
pub fn harnack_t(p: &EstimateParams) -> f64 {
    let n = p.n_eff;
    let bracket = -2.0 * p.k - 2.0 - p.log_d().abs();
    4.0 * n * (p.b() + n * p.c1 * p.c1 / (p.r * p.r) + 2.0 * p.e / n + 0.5 * (-pos(-bracket)))
}

/// Space-time sample pair: node and frame of each point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnackPair {
    pub x1: usize,
    pub k1: usize,
    pub x2: usize,
    pub k2: usize,
}

/// `log` of the Harnack right side given the path energy `∫F²(γ̇)`.
pub fn harnack_log_rhs(ev: &Evolution, p: &EstimateParams, pair: &HarnackPair, path_energy: f64) -> f64 {
    let (t1, t2) = (ev.t(pair.k1), ev.t(pair.k2));
    let tau = t2 - t1;
    let action = if tau > 0.0 {
        path_energy / (2.0 * tau)
    } else if path_energy == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    ev.u.frames[pair.k2][pair.x2].ln() + 2.0 * p.n_eff * (t2 / t1).ln() + tau * harnack_t(p) + action
}

/// Draw pairs in the region with `t₂` the stored time nearest to `2t₁`.
pub fn sample_harnack_pairs(ev: &Evolution, region: &[bool], count: usize, seed: u64) -> Result<Vec<HarnackPair>> {
    let nodes: Vec<usize> = (0..region.len()).filter(|l| region[*l]).collect();
    if nodes.is_empty() {
        return Err(FinslerError::Domain("no nodes in the Harnack region".into()));
    }
    let m = ev.u.n_times();
    let t_last = ev.t(m - 1);
    let k_of = |t: f64| ((t + ev.origin - ev.u.t0) / ev.u.dt).round();
    let eligible: Vec<usize> = (0..m).filter(|k| ev.t(*k) > 0.0 && 2.0 * ev.t(*k) <= t_last + 1e-12).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x1 = nodes[rng.gen_range(0..nodes.len())];
            let x2 = nodes[rng.gen_range(0..nodes.len())];
            let (k1, k2) = if eligible.is_empty() {
                // doubling is out of range: pair the first positive and last frames
                (if ev.t(0) > 0.0 { 0 } else { 1 }, m - 1)
            } else {
                let k1 = eligible[rng.gen_range(0..eligible.len())];
                (k1, (k_of(2.0 * ev.t(k1)) as usize).min(m - 1))
            };
            Ok(HarnackPair { x1, k1, x2, k2 })
        })
        .collect()
}

/// Harnack inequality at the given pairs (equation without the `a` term).
pub fn check_harnack(
    ev: &Evolution,
    p: &EstimateParams,
    pairs: &[HarnackPair],
    tol: f64,
    path: &PathOptions,
) -> Result<(MarginReport, Vec<Vec<Vec<f64>>>)> {
    ev.check_times()?;
    p.validate(ev.u.grid.dim())?;
    if ev.coeffs.a.as_constant() != Some(0.0) {
        return Err(FinslerError::NotApplicable("the Harnack inequality applies to equations with a = 0".into()));
    }
    let grid = &ev.u.grid;
    let mut rep = MarginReport::new("harnack", tol);
    let mut paths = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if pair.k1 > pair.k2 {
            return Err(FinslerError::Domain("Harnack pairs need t1 <= t2".into()));
        }
        let (x1, x2) = (grid.point(pair.x1), grid.point(pair.x2));
        let tau = ev.t(pair.k2) - ev.t(pair.k1);
        let (energy, nodes) = if pair.x1 == pair.x2 {
            (0.0, vec![x2.clone(), x1.clone()])
        } else if tau > 0.0 {
            let (_, opt) = path_action_with(ev.metric, &x2, &x1, tau, path)?;
            (opt.energy, opt.nodes)
        } else {
            (f64::INFINITY, vec![x2.clone(), x1.clone()])
        };
        let lhs = ev.u.frames[pair.k1][pair.x1].ln();
        rep.push(&x1, ev.t(pair.k1), lhs, harnack_log_rhs(ev, p, pair, energy));
        paths.push(nodes);
    }
    rep.value("T", harnack_t(p));
    rep.finalize();
    Ok((rep, paths))
}

/// For `x₁ = x₂` and `T ≥ 0`, whether `log rhs` is nonincreasing in `t₁`
/// over all stored `t₁ ≤ t₂`.
pub fn harnack_monotone_in_t1(ev: &Evolution, p: &EstimateParams, node: usize, k2: usize) -> bool {
    let vals: Vec<f64> = (0..=k2).map(|k1| harnack_log_rhs(ev, p, &HarnackPair { x1: node, k1, x2: node, k2 }, 0.0)).collect();
    vals.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

/// A priori bound `u ≤ exp(2N + 2√N sup|Δ^{∇u}V| + √(2N) sup F(∇^{∇u}V) + 2 sup|V|)`
/// for a stationary solution of `Δu + 2u log u + Vu = 0`.
pub fn check_apriori(
    metric: &MetricSpec,
    measure: &MeasureSpec,
    v: &Expr,
    n_eff: f64,
    grid: &GridChart,
    sol: &StationaryOutcome,
    order: usize,
) -> Result<MarginReport> {
    let gf = gradient_field(metric, grid, &sol.u, order)?;
    let ginv = reference_inverse_metric(metric, grid, &gf)?;
    let pts = grid.points();
    let vv: Vec<f64> = pts.iter().map(|x| v.eval_f64(x, 0.0)).collect();
    let lap = linearized_laplacian_field(metric, measure, grid, &gf, &vv, order)?;
    let region: Vec<usize> = (0..grid.len()).filter(|l| !grid.on_boundary(*l)).collect();
    let mut lap_sup: f64 = 0.0;
    let mut grad_sup: f64 = 0.0;
    let mut v_sup: f64 = 0.0;
    for &l in &region {
        let dv = expr_differential(v, &pts[l], 0.0);
        lap_sup = lap_sup.max(lap[l].abs());
        grad_sup = grad_sup.max(ginv[l].bilinear(&dv, &dv).max(0.0).sqrt());
        v_sup = v_sup.max(vv[l].abs());
    }
    let n = n_eff;
    let log_bound = 2.0 * n + 2.0 * n.sqrt() * lap_sup + (2.0 * n).sqrt() * grad_sup + 2.0 * v_sup;
    let bound = log_bound.exp();
    let mut rep = MarginReport::new("apriori", 0.0);
    for &l in &region {
        rep.push(&pts[l], 0.0, sol.u[l], bound);
    }
    rep.value("bound", bound);
    rep.value("log_bound", log_bound);
    rep.value("sup_abs_lap_v", lap_sup);
    rep.value("sup_grad_v", grad_sup);
    rep.value("sup_abs_v", v_sup);
    rep.value("stationary_residual", sol.residual);
    rep.finalize();
    if !sol.converged {
        rep.note(format!("stationary solve did not converge (residual {:.3e})", sol.residual));
        rep.status = Status::Inconclusive;
    }
    Ok(rep)
}
