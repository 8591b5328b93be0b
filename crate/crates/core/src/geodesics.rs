//! Geodesics, forward distances, the Harnack path action and the radial
//! cutoff function.
//!
//! Distances and actions are computed by direct minimization over
//! piecewise-linear paths: with nodes `z₀ … z_m` and segments
//! `Δ_k = z_{k+1} − z_k`, the discrete energy is `m Σ F(z̄_k, Δ_k)²`
//! (midpoint rule for `∫₀¹ F(γ̇)² ds`) and the length is `Σ F(z̄_k, Δ_k)`.

use crate::dual::{lift, Dual, Real};
use crate::error::{FinslerError, Result};
use crate::geometry::spray_g;
use crate::grid::GridChart;
use crate::metric::{legendre, CoordBox, MetricSpec, TangentSample};
use crate::operators::GradientField;
use crate::report::MarginReport;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct PathPoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPath {
    pub points: Vec<PathPoint>,
    /// Integration stopped early on leaving the chart.
    pub truncated: bool,
}

impl GeodesicPath {
    /// Largest relative deviation of `F(x(s), ẋ(s))` from its initial value.
    pub fn speed_drift(&self, metric: &MetricSpec) -> f64 {
        let f0 = metric.norm(&self.points[0].x, &self.points[0].y);
        self.points.iter().map(|p| (metric.norm(&p.x, &p.y) - f0).abs() / f0).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.x.len());
        let mut out = String::from("s");
        for i in 1..=n {
            out += &format!(",x{i}");
        }
        for i in 1..=n {
            out += &format!(",y{i}");
        }
        out.push('\n');
        for p in &self.points {
            out += &format!("{}", p.s);
            for v in p.x.iter().chain(&p.y) {
                out += &format!(",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn geodesic_rhs(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = spray_g(metric, x, y)?;
    Ok((y.to_vec(), g.iter().map(|v| -2.0 * v).collect()))
}

fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + k * q).collect()
}

/// Integrate `ẍ + 2G(x, ẋ) = 0` with classical RK4.
pub fn integrate_geodesic(metric: &MetricSpec, x0: &[f64], y0: &[f64], smax: f64, ds: f64) -> Result<GeodesicPath> {
    integrate_geodesic_in(metric, x0, y0, smax, ds, None)
}

/// As [`integrate_geodesic`], truncating when the path leaves `chart` or the
/// metric stops being admissible.
pub fn integrate_geodesic_in(
    metric: &MetricSpec,
    x0: &[f64],
    y0: &[f64],
    smax: f64,
    ds: f64,
    chart: Option<&CoordBox>,
) -> Result<GeodesicPath> {
    TangentSample::new(x0, y0).check()?;
    metric.check_point(x0)?;
    if !(ds > 0.0) || !(smax >= 0.0) {
        return Err(FinslerError::Domain("geodesic step and length must be positive".into()));
    }
    let steps = (smax / ds).round().max(1.0) as usize;
    let h = smax / steps as f64;
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut points = vec![PathPoint { s: 0.0, x: x.clone(), y: y.clone() }];
    let inside = |p: &[f64]| chart.is_none_or(|c| c.contains(p)) && metric.check_point(p).is_ok();
    for k in 0..steps {
        let (k1x, k1y) = geodesic_rhs(metric, &x, &y)?;
        let (k2x, k2y) = geodesic_rhs(metric, &axpy(&x, 0.5 * h, &k1x), &axpy(&y, 0.5 * h, &k1y))?;
        let (k3x, k3y) = geodesic_rhs(metric, &axpy(&x, 0.5 * h, &k2x), &axpy(&y, 0.5 * h, &k2y))?;
        let (k4x, k4y) = geodesic_rhs(metric, &axpy(&x, h, &k3x), &axpy(&y, h, &k3y))?;
        let nx: Vec<f64> = (0..x.len()).map(|i| x[i] + h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])).collect();
        let ny: Vec<f64> = (0..y.len()).map(|i| y[i] + h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i])).collect();
        if !inside(&nx) {
            return Ok(GeodesicPath { points, truncated: true });
        }
        x = nx;
        y = ny;
        points.push(PathPoint { s: (k + 1) as f64 * h, x: x.clone(), y: y.clone() });
    }
    Ok(GeodesicPath { points, truncated: false })
}

/// Settings for the path optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOptions {
    /// Number of interior control points.
    pub control_points: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this value.
    pub grad_tol: f64,
    /// Control points are clamped into this box.
    pub bounds: Option<CoordBox>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions { control_points: 20, restarts: 8, seed: 0, max_iter: 4000, grad_tol: 1e-11, bounds: None }
    }
}

/// Result of a path optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOptimum {
    /// Discrete energy `m Σ F²` of the best path.
    pub energy: f64,
    /// Length `Σ F` of the best path.
    pub length: f64,
    pub nodes: Vec<Vec<f64>>,
    pub converged: bool,
    /// Energy after each accepted iteration of the winning restart.
    pub history: Vec<f64>,
}

impl PathOptimum {
    /// `F`-unit tangent of the last segment.
    pub fn end_direction(&self, metric: &MetricSpec) -> Vec<f64> {
        let m = self.nodes.len();
        let (a, b) = (&self.nodes[m - 2], &self.nodes[m - 1]);
        let d: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
        let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        let f = metric.norm(&mid, &d);
        d.into_iter().map(|v| v / f).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.nodes.first().map_or(0, Vec::len);
        let mut out: String = (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for p in &self.nodes {
            out += &p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            out.push('\n');
        }
        out
    }
}

fn segment_norm<T: Real>(metric: &MetricSpec, a: &[T], b: &[T]) -> T {
    let d: Vec<T> = b.iter().zip(a).map(|(p, q)| *p - *q).collect();
    if d.iter().all(|v| v.re() == 0.0) {
        return T::zero();
    }
    let mid: Vec<T> = a.iter().zip(b).map(|(p, q)| (*p + *q).scale(0.5)).collect();
    metric.norm(&mid, &d)
}

fn path_energy(metric: &MetricSpec, nodes: &[Vec<f64>]) -> f64 {
    let m = (nodes.len() - 1) as f64;
    m * nodes.windows(2).map(|w| segment_norm(metric, &w[0], &w[1]).powi(2)).sum::<f64>()
}

fn path_length(metric: &MetricSpec, nodes: &[Vec<f64>]) -> f64 {
    nodes.windows(2).map(|w| segment_norm(metric, &w[0], &w[1])).sum()
}

/// Gradient of the energy with respect to the interior nodes.
fn energy_gradient(metric: &MetricSpec, nodes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = nodes[0].len();
    let segs = nodes.len() - 1;
    let m = segs as f64;
    let mut grad = vec![vec![0.0; n]; nodes.len()];
    for k in 0..segs {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        for d in 0..n {
            for (end, node) in [(0usize, k), (1usize, k + 1)] {
                if node == 0 || node == segs {
                    continue;
                }
                let mut ad: Vec<Dual<f64>> = lift(a);
                let mut bd: Vec<Dual<f64>> = lift(b);
                if end == 0 {
                    ad[d].d = 1.0;
                } else {
                    bd[d].d = 1.0;
                }
                let f = segment_norm(metric, &ad, &bd);
                grad[node][d] += m * 2.0 * f.v * f.d;
            }
        }
    }
    grad
}

fn clamp(nodes: &mut [Vec<f64>], bounds: &Option<CoordBox>) {
    if let Some(b) = bounds {
        let last = nodes.len() - 1;
        for p in nodes[1..last].iter_mut() {
            for (d, v) in p.iter_mut().enumerate() {
                *v = v.clamp(b.lo[d], b.hi[d]);
            }
        }
    }
}

/// Monotone gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking.
fn descend(metric: &MetricSpec, mut nodes: Vec<Vec<f64>>, opts: &PathOptions) -> (Vec<Vec<f64>>, f64, bool, Vec<f64>) {
    let last = nodes.len() - 1;
    let mut e = path_energy(metric, &nodes);
    let mut history = vec![e];
    let mut g = energy_gradient(metric, &nodes);
    let gnorm = |g: &[Vec<f64>]| g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let scale: f64 = nodes[0].iter().zip(&nodes[last]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt().max(1e-3);
    let mut step = 1.0 / (nodes.len() as f64 * 4.0);
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let gn = gnorm(&g);
        if gn < opts.grad_tol * scale.max(1.0) {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = nodes.clone();
            for k in 1..last {
                for d in 0..cand[k].len() {
                    cand[k][d] -= t * g[k][d];
                }
            }
            clamp(&mut cand, &opts.bounds);
            if cand.iter().any(|p| metric.check_point(p).is_err()) {
                t *= 0.5;
                continue;
            }
            let ec = path_energy(metric, &cand);
            if ec <= e - 1e-4 * t * gn * gn || (ec < e && t < 1e-12) {
                accepted = Some((cand, ec));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ec)) = accepted else {
            converged = true;
            break;
        };
        let gc = energy_gradient(metric, &cand);
        // Barzilai-Borwein step for the next trial
        let mut sy = 0.0;
        let mut ss = 0.0;
        for k in 1..last {
            for d in 0..cand[k].len() {
                let s = cand[k][d] - nodes[k][d];
                let yv = gc[k][d] - g[k][d];
                sy += s * yv;
                ss += s * s;
            }
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e3) } else { t * 2.0 };
        let rel = (e - ec) / e.max(1e-300);
        nodes = cand;
        e = ec;
        g = gc;
        history.push(e);
        if rel < 1e-15 {
            converged = true;
            break;
        }
    }
    (nodes, e, converged, history)
}

fn initial_path(from: &[f64], to: &[f64], segments: usize, restart: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = from.len();
    let chord: f64 = from.iter().zip(to).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(restart as u64));
    let bump: Vec<f64> =
        (0..n).map(|_| if restart == 0 { 0.0 } else { 0.2 * chord * Distribution::<f64>::sample(&StandardNormal, &mut rng) }).collect();
    (0..=segments)
        .map(|k| {
            let s = k as f64 / segments as f64;
            let w = (std::f64::consts::PI * s).sin();
            (0..n).map(|d| from[d] + s * (to[d] - from[d]) + w * bump[d]).collect()
        })
        .collect()
}

/// Minimize the discrete energy over paths `from → to` with seeded restarts
/// (restart 0 starts on the chord); the minimum over restarts is returned.
pub fn minimize_energy(metric: &MetricSpec, from: &[f64], to: &[f64], opts: &PathOptions) -> Result<PathOptimum> {
    metric.check_point(from)?;
    metric.check_point(to)?;
    if from.len() != to.len() || from.len() != metric.dim() {
        return Err(FinslerError::Domain("endpoint dimensions do not match the metric".into()));
    }
    let segments = opts.control_points + 1;
    let runs: Vec<(Vec<Vec<f64>>, f64, bool, Vec<f64>)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut init = initial_path(from, to, segments, r, opts.seed);
            clamp(&mut init, &opts.bounds);
            if init.iter().any(|p| metric.check_point(p).is_err()) {
                init = initial_path(from, to, segments, 0, opts.seed);
            }
            descend(metric, init, opts)
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    let (nodes, energy, converged, history) = runs.into_iter().nth(best).expect("at least one restart");
    let length = path_length(metric, &nodes);
    Ok(PathOptimum { energy, length, nodes, converged, history })
}

/// Forward distance `d(p, x)` with full optimizer output. The reported
/// length is the smaller of the optimized path and the straight chord;
/// constant-coefficient metrics use the chord directly.
pub fn forward_distance_with(metric: &MetricSpec, p: &[f64], x: &[f64], opts: &PathOptions) -> Result<PathOptimum> {
    if p == x {
        return Ok(PathOptimum { energy: 0.0, length: 0.0, nodes: vec![p.to_vec(), x.to_vec()], converged: true, history: vec![0.0] });
    }
    if metric.has_constant_coefficients() {
        metric.check_point(p)?;
        let nodes = vec![p.to_vec(), x.to_vec()];
        let length = path_length(metric, &nodes);
        return Ok(PathOptimum { energy: length * length, length, nodes, converged: true, history: vec![length * length] });
    }
    let mut best = minimize_energy(metric, p, x, opts)?;
    let chord = initial_path(p, x, opts.control_points + 1, 0, 0);
    let chord_len = path_length(metric, &chord);
    if chord_len < best.length {
        best.length = chord_len;
    }
    Ok(best)
}

pub fn forward_distance(metric: &MetricSpec, p: &[f64], x: &[f64], n_restarts: usize) -> Result<f64> {
    Ok(forward_distance_with(metric, p, x, &PathOptions { restarts: n_restarts, ..Default::default() })?.length)
}

/// Harnack action `S(x₁, x₂, τ) = inf (1/2τ) ∫₀¹ F²(γ̇) ds` over forward
/// paths from `x2` to `x1`.
pub fn path_action_with(metric: &MetricSpec, x2: &[f64], x1: &[f64], tau: f64, opts: &PathOptions) -> Result<(f64, PathOptimum)> {
    if !(tau > 0.0) {
        return Err(FinslerError::Domain("action time tau must be positive".into()));
    }
    if x1 == x2 {
        let opt = PathOptimum { energy: 0.0, length: 0.0, nodes: vec![x2.to_vec(), x1.to_vec()], converged: true, history: vec![0.0] };
        return Ok((0.0, opt));
    }
    let opt = minimize_energy(metric, x2, x1, opts)?;
    Ok((opt.energy / (2.0 * tau), opt))
}

pub fn path_action(metric: &MetricSpec, x2: &[f64], x1: &[f64], tau: f64, n_restarts: usize) -> Result<f64> {
    Ok(path_action_with(metric, x2, x1, tau, &PathOptions { restarts: n_restarts, ..Default::default() })?.0)
}

/// Radial cutoff profile `φ̃`: 1 on `[0,1]`, 0 on `[2,∞)`, and the quintic
/// smoothstep `1 − (10s³ − 15s⁴ + 6s⁵)`, `s = r − 1`, in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    /// `sup −φ̃′/√φ̃`.
    pub c1: f64,
    /// `sup (−φ̃″)⁺`.
    pub c2: f64,
}

impl CutoffProfile {
    pub fn quintic() -> Self {
        let samples = 200_000;
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        for k in 1..samples {
            let r = 1.0 + k as f64 / samples as f64;
            let v = Self::value(r);
            if v > 0.0 {
                c1 = c1.max(-Self::derivative(r) / v.sqrt());
            }
            c2 = c2.max(-Self::second_derivative(r));
        }
        // sampling is a lower estimate; pad by the sample spacing
        CutoffProfile { c1: c1 * (1.0 + 1e-4), c2: c2 * (1.0 + 1e-4) }
    }

    pub fn value(r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            let s = r - 1.0;
            // rounding near s = 1 can dip below zero
            (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)).clamp(0.0, 1.0)
        }
    }

    pub fn derivative(r: f64) -> f64 {
        if r <= 1.0 || r >= 2.0 {
            0.0
        } else {
            let s = r - 1.0;
            -30.0 * s * s * (1.0 - s) * (1.0 - s)
        }
    }

    pub fn second_derivative(r: f64) -> f64 {
        if r <= 1.0 || r >= 2.0 {
            0.0
        } else {
            let s = r - 1.0;
            -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
        }
    }
}

/// Cutoff `φ(x) = φ̃(d(p,x)/R)` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffField {
    pub center: Vec<f64>,
    pub radius: f64,
    pub profile: CutoffProfile,
    pub distance: Vec<f64>,
    pub values: Vec<f64>,
    /// `dr` at each node (zero at the center).
    pub dr: Vec<Vec<f64>>,
}

/// Build the cutoff and scan `F²_{∇u}(∇^{∇u}φ)/φ ≤ αC₁²/R²` at every node
/// with `φ > 1e-8`, using the reference gradient field `gf`.
pub fn build_cutoff(
    metric: &MetricSpec,
    grid: &GridChart,
    gf: &GradientField,
    p: &[f64],
    radius: f64,
    alpha: f64,
    opts: &PathOptions,
) -> Result<(CutoffField, MarginReport)> {
    if !(radius > 0.0) {
        return Err(FinslerError::Domain("cutoff radius must be positive".into()));
    }
    let profile = CutoffProfile::quintic();
    let res: Vec<Result<(f64, Vec<f64>)>> = (0..grid.len())
        .into_par_iter()
        .map(|lin| {
            let x = grid.point(lin);
            if x.as_slice() == p {
                return Ok((0.0, vec![0.0; x.len()]));
            }
            let opt = forward_distance_with(metric, p, &x, opts)?;
            let dir = opt.end_direction(metric);
            let dr = legendre(metric, &TangentSample::new(&x, &dir))?;
            Ok((opt.length, dr))
        })
        .collect();
    let mut distance = Vec::with_capacity(grid.len());
    let mut dr = Vec::with_capacity(grid.len());
    for r in res {
        let (d, v) = r?;
        distance.push(d);
        dr.push(v);
    }
    if (0..grid.len()).any(|l| grid.on_boundary(l) && distance[l] < 2.0 * radius) {
        return Err(FinslerError::Domain("the ball B_p(2R) leaves the grid chart".into()));
    }
    let values: Vec<f64> = distance.iter().map(|d| CutoffProfile::value(d / radius)).collect();
    let bound = alpha * profile.c1 * profile.c1 / (radius * radius);
    let mut report = MarginReport::new("cutoff-gradient", 1e-12 * bound.max(1.0));
    let ginv = crate::operators::reference_inverse_metric(metric, grid, gf)?;
    for lin in 0..grid.len() {
        let phi = values[lin];
        if phi <= 1e-8 {
            continue;
        }
        let r = distance[lin] / radius;
        let coeff = CutoffProfile::derivative(r) / radius;
        let dphi: Vec<f64> = dr[lin].iter().map(|v| coeff * v).collect();
        let lhs = ginv[lin].bilinear(&dphi, &dphi) / phi;
        report.push(&grid.point(lin), 0.0, lhs, bound);
    }
    report.value("C1", profile.c1);
    report.value("C2", profile.c2);
    report.value("alpha", alpha);
    report.value("R", radius);
    report.finalize();
    Ok((CutoffField { center: p.to_vec(), radius, profile, distance, values, dr }, report))
}
