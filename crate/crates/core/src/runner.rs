//! Scenario execution: solve, resolve the estimate constants, run the
//! requested checks and write the output tree
//!
//! ```text
//! <out>/summary.json          deterministic run summary
//! <out>/timings.json          wall-clock timings
//! <out>/checks/<name>.csv     per-point records
//! <out>/checks/<name>_by_time.csv, <name>_ray.csv
//! <out>/fields/               solution frames and derived fields
//! <out>/paths/                minimizing paths of the Harnack pairs
//! <out>/counterexamples/<name>/  reproduction bundle of a failed check
//! ```

use crate::error::{FinslerError, Result};
use crate::geodesics::{forward_distance_with, CutoffProfile, PathOptions};
use crate::geometry::{curvature_scan, CurvatureScan};
use crate::grid::{GridChart, ScalarFieldT};
use crate::harness::{
    ball_mask, check_apriori, check_evolution_inequality, check_harnack, check_lemma32, check_li_yau, choose_e, harnack_monotone_in_t1,
    sample_harnack_pairs, EstimateParams, Evolution, ScanOptions,
};
use crate::metric::{misalignment, sample_directions, CoordBox};
use crate::pde::{export_series, measure_bounds, solve_log_schrodinger, solve_stationary, CoefficientBounds, StationaryOutcome};
use crate::report::{MarginRecord, MarginReport, Status};
use crate::scenario::{CheckKind, Scenario, Setting};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const TOOL: &str = "finsler-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status: all requested checks passed or were expected to fail.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit status for an error that aborted a run.
pub fn exit_code_for(err: &FinslerError) -> i32 {
    match err {
        FinslerError::Numeric { .. } | FinslerError::Stability(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Command-line overrides of scenario settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub checks: Option<Vec<CheckKind>>,
    pub refine: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub status: Status,
    pub pass: bool,
    pub expected_fail: bool,
    pub min_margin: Option<f64>,
    pub argmin_x: Vec<f64>,
    pub argmin_t: Option<f64>,
    pub tol: f64,
    pub evaluated: usize,
    pub excluded: usize,
    pub values: BTreeMap<String, Option<f64>>,
    pub notes: Vec<String>,
    /// Record file relative to the output directory.
    pub records: Option<String>,
    pub counterexample: Option<String>,
}

impl CheckSummary {
    /// Whether this check lets the run succeed.
    pub fn acceptable(&self) -> bool {
        self.status == Status::Pass || self.expected_fail
    }

    fn from_report(rep: &MarginReport, expected_fail: bool) -> Self {
        CheckSummary {
            name: rep.name.clone(),
            status: rep.status,
            pass: rep.pass,
            expected_fail,
            min_margin: finite(rep.min_margin),
            argmin_x: rep.argmin_x.clone(),
            argmin_t: finite(rep.argmin_t),
            tol: rep.tol,
            evaluated: rep.evaluated,
            excluded: rep.excluded,
            values: rep.values.iter().map(|(k, v)| (k.clone(), finite(*v))).collect(),
            notes: rep.notes.clone(),
            records: Some(format!("checks/{}.csv", rep.name)),
            counterexample: None,
        }
    }

    fn not_applicable(kind: CheckKind, reason: String, expected_fail: bool) -> Self {
        CheckSummary {
            name: kind.name().to_string(),
            status: Status::NotApplicable,
            pass: false,
            expected_fail,
            min_margin: None,
            argmin_x: Vec::new(),
            argmin_t: None,
            tol: 0.0,
            evaluated: 0,
            excluded: 0,
            values: BTreeMap::new(),
            notes: vec![reason],
            records: None,
            counterexample: None,
        }
    }

    pub fn line(&self) -> String {
        let margin = self.min_margin.map_or("-".to_string(), |m| format!("{m:.4e}"));
        let tag = if self.expected_fail && self.status != Status::Pass { " (expected)" } else { "" };
        format!(
            "{:<16} {:<18} min margin {:>12}  tol {:.2e}  evaluated {}  excluded {}{tag}",
            self.name,
            self.status.as_str(),
            margin,
            self.tol,
            self.evaluated,
            self.excluded
        )
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    /// The scenario as run, with command-line overrides applied.
    pub scenario: Scenario,
    pub refine: u32,
    pub params: Option<EstimateParams>,
    /// How each estimate constant was obtained.
    pub provenance: BTreeMap<String, String>,
    pub derived: BTreeMap<String, Option<f64>>,
    pub coefficient_bounds: Option<CoefficientBounds>,
    pub tol_ineq: Option<f64>,
    pub hypotheses_violated: Vec<String>,
    pub checks: Vec<CheckSummary>,
    pub ok: bool,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.ok {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub out_dir: PathBuf,
}

fn io(e: std::io::Error, what: &Path) -> FinslerError {
    FinslerError::Io(format!("{}: {e}", what.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|e| io(e, p))?;
    }
    std::fs::write(path, text).map_err(|e| io(e, path))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary types serialize");
    s.push('\n');
    s
}

/// `x1,…,xn,value` rows of a nodal field.
pub fn field_csv(grid: &GridChart, vals: &[f64]) -> String {
    let mut s = String::new();
    let head: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(s, "{},value", head.join(","));
    for (l, v) in vals.iter().enumerate() {
        for c in grid.point(l) {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{v}");
    }
    s
}

/// Minimum margin and extreme sides per time level.
pub fn margin_by_time(records: &[MarginRecord]) -> String {
    let mut by_t: BTreeMap<u64, (f64, f64, f64, f64, usize)> = BTreeMap::new();
    for r in records {
        // nonnegative times order like their bit patterns
        let key = if r.t >= 0.0 { r.t.to_bits() } else { 0 };
        let e = by_t.entry(key).or_insert((r.t, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0));
        e.1 = e.1.min(r.margin);
        e.2 = e.2.max(r.lhs);
        e.3 = e.3.max(r.rhs);
        e.4 += 1;
    }
    let mut s = String::from("t,min_margin,max_lhs,max_rhs,count\n");
    for (t, m, l, r, c) in by_t.values() {
        let _ = writeln!(s, "{t:e},{m:e},{l:e},{r:e},{c}");
    }
    s
}

/// Records at time `t` on the ray through `center` along the first axis.
pub fn ray_profile(records: &[MarginRecord], center: &[f64], t: f64) -> String {
    let mut rows: Vec<&MarginRecord> =
        records.iter().filter(|r| (r.t - t).abs() < 1e-12 && r.x.iter().zip(center).skip(1).all(|(a, b)| (a - b).abs() < 1e-9)).collect();
    rows.sort_by(|a, b| a.x[0].total_cmp(&b.x[0]));
    let mut s = String::from("x1,lhs,rhs,margin\n");
    for r in rows {
        let _ = writeln!(s, "{:e},{:e},{:e},{:e}", r.x[0], r.lhs, r.rhs, r.margin);
    }
    s
}

/// Everything computed before the checks run.
struct Context {
    scenario: Scenario,
    series: Option<ScalarFieldT>,
    stationary: Option<StationaryOutcome>,
    center: Vec<f64>,
    path_opts: PathOptions,
    ball_r: Vec<bool>,
    ball_2r: Vec<bool>,
    scan: Option<CurvatureScan>,
    bounds: Option<CoefficientBounds>,
}

/// Solve on `grid` with step `dt`; the duration is cut to a whole number
/// of steps.
fn solve_series(s: &Scenario, grid: &GridChart, dt: f64) -> Result<ScalarFieldT> {
    let ev = s.evolution.as_ref().expect("validated");
    let mut cfg = ev.solve_config();
    cfg.dt = dt;
    cfg.t_final = (ev.t_final / dt + 1e-9).floor() * dt;
    let init = &s.initial;
    let u0 = ScalarFieldT::sample(grid, |x, t| init.eval_f64(x, t), ev.t0, dt, 1, ev.order)?;
    Ok(solve_log_schrodinger(&s.metric, &s.measure, &s.coefficients, &u0, &cfg)?.series)
}

/// Sample points of the grid box inside the forward ball `B_p(radius)`.
fn scan_points(s: &Scenario, center: &[f64], radius: f64, opts: &PathOptions) -> Result<Vec<Vec<f64>>> {
    let bx = CoordBox::new(&s.grid.lo, &s.grid.hi);
    let mut pts = Vec::new();
    for x in bx.sample_points(s.scan.points_per_axis.max(2)) {
        if forward_distance_with(&s.metric, center, &x, opts)?.length < radius {
            pts.push(x);
        }
    }
    if pts.is_empty() {
        pts.push(center.to_vec());
    }
    Ok(pts)
}

fn n_eff_of(s: &Scenario) -> f64 {
    s.estimate.n_eff.value().unwrap_or(s.metric.dim() as f64)
}

fn needs_scan(s: &Scenario) -> bool {
    let e = &s.estimate;
    s.checks.contains(&CheckKind::CurvatureScan)
        || s.checks.contains(&CheckKind::Liyau)
        || [e.k, e.k2r, e.k0].iter().any(|v| v.value().is_none())
        || (e.c0.value().is_none() && e.k0.value().is_none())
}

fn prepare(s: Scenario, timings: &mut BTreeMap<String, f64>) -> Result<Context> {
    let center = s.center();
    s.metric.check_point(&center)?;
    let path_opts = PathOptions { seed: s.seed, bounds: Some(CoordBox::new(&s.grid.lo, &s.grid.hi)), ..PathOptions::default() };
    let radius = s.estimate.radius;

    let clock = Instant::now();
    let series = if s.checks.iter().any(|c| c.needs_evolution()) {
        let ev = s.evolution.as_ref().expect("validated");
        Some(solve_series(&s, &s.grid, ev.dt)?)
    } else {
        None
    };
    let stationary = if s.checks.contains(&CheckKind::Apriori) {
        let st = s.stationary.as_ref().expect("validated");
        if s.coefficients.a.as_constant() != Some(2.0) {
            return Err(FinslerError::Parameter(
                "the a priori bound concerns Δu + 2u log u + Vu = 0: coefficient a must be the constant 2".into(),
            ));
        }
        let init: Vec<f64> = s.grid.points().iter().map(|x| s.initial.eval_f64(x, 0.0)).collect();
        Some(solve_stationary(&s.metric, &s.measure, &s.coefficients, &s.grid, &init, &st.boundary, st.tol, st.max_iter)?)
    } else {
        None
    };
    timings.insert("solve".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let ball_r = ball_mask(&s.metric, &s.grid, &center, radius, &path_opts)?;
    let ball_2r = ball_mask(&s.metric, &s.grid, &center, 2.0 * radius, &path_opts)?;
    timings.insert("balls".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let scan = if needs_scan(&s) {
        let pts = scan_points(&s, &center, 2.0 * radius, &path_opts)?;
        let dirs = sample_directions(s.metric.dim(), s.scan.directions);
        Some(curvature_scan(&s.metric, &s.measure, n_eff_of(&s), &pts, &dirs)?)
    } else {
        None
    };
    timings.insert("curvature_scan".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let bounds = if let Some(u) = &series {
        Some(measure_bounds(&s.metric, &s.measure, &s.coefficients, u, &ball_2r, 1)?)
    } else if let Some(st) = &stationary {
        let u = ScalarFieldT::stationary(&s.grid, st.u.clone(), s.stationary.as_ref().map_or(2, |v| v.order))?;
        Some(measure_bounds(&s.metric, &s.measure, &s.coefficients, &u, &ball_2r, 1)?)
    } else {
        None
    };
    timings.insert("bounds".into(), clock.elapsed().as_secs_f64());
    Ok(Context { scenario: s, series, stationary, center, path_opts, ball_r, ball_2r, scan, bounds })
}

fn resolve(setting: Setting, name: &str, prov: &mut BTreeMap<String, String>, auto: impl FnOnce() -> Result<(f64, String)>) -> Result<f64> {
    match setting.value() {
        Some(v) => {
            prov.insert(name.into(), "explicit".into());
            Ok(v)
        }
        None => {
            let (v, how) = auto()?;
            prov.insert(name.into(), how);
            Ok(v)
        }
    }
}

/// Replace every `"auto"` constant by a measured or derived value.
fn resolve_auto_params(ctx: &Context) -> Result<(EstimateParams, BTreeMap<String, String>)> {
    let s = &ctx.scenario;
    let e = &s.estimate;
    let mut prov = BTreeMap::new();
    let scan_k = || {
        ctx.scan
            .as_ref()
            .map(|c| (c.k_estimate, "measured: curvature scan over the doubled ball".to_string()))
            .ok_or_else(|| FinslerError::Config("no curvature scan".into()))
    };
    let n_eff = resolve(e.n_eff, "n_eff", &mut prov, || Ok((s.metric.dim() as f64, "manifold dimension".into())))?;
    let d = resolve(e.d, "d", &mut prov, || {
        let max = match (&ctx.series, &ctx.stationary) {
            (Some(u), _) => u.max_abs(),
            (None, Some(st)) => st.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            _ => return Ok((1.0, "default: no solution computed".into())),
        };
        Ok((max, "measured: max u over the run".into()))
    })?;
    let alpha = resolve(e.alpha, "alpha", &mut prov, || {
        Ok((misalignment(&s.metric, &CoordBox::new(&s.grid.lo, &s.grid.hi), 16)?, "measured: misalignment over the grid box".into()))
    })?;
    let k = resolve(e.k, "k", &mut prov, scan_k)?;
    let k2r = resolve(e.k2r, "k2r", &mut prov, scan_k)?;
    let k0 = resolve(e.k0, "k0", &mut prov, || {
        ctx.scan
            .as_ref()
            .map(|c| (c.k0_part_max, "measured: curvature scan over the doubled ball".to_string()))
            .ok_or_else(|| FinslerError::Config("no curvature scan".into()))
    })?;
    let bounds = ctx.bounds.clone().unwrap_or_else(|| CoefficientBounds::constant(0.0, 0.0));
    let a_const = resolve(e.a_const, "a_const", &mut prov, || {
        let v = (bounds.a_plus_sup() + 1.0).max(2.0 * k + 2.0 + d.ln().abs());
        Ok((v, "derived: max(sup a+ + 1, 2K + 2 + |log D|)".into()))
    })?;
    let e_val = resolve(e.e, "e", &mut prov, || {
        Ok((choose_e(&bounds, d, a_const, n_eff)?, "derived: smallest admissible E on the search grid".into()))
    })?;
    let profile = CutoffProfile::quintic();
    let c1 = resolve(e.c1, "c1", &mut prov, || Ok((profile.c1, "derived: quintic cutoff profile".into())))?;
    let c2 = resolve(e.c2, "c2", &mut prov, || Ok((profile.c2, "derived: quintic cutoff profile".into())))?;
    let c_n_alpha = resolve(e.c_n_alpha, "c_n_alpha", &mut prov, || Ok((n_eff * alpha, "placeholder: N times alpha".into())))?;
    let c0 = resolve(e.c0, "c0", &mut prov, || Ok((k0, "placeholder: K0".into())))?;
    let b_override = e.b.value();
    prov.insert("b".into(), if b_override.is_some() { "explicit".into() } else { "derived: all-plus form".into() });
    let p = EstimateParams { n_eff, k, k2r, k0, a_const, d, e: e_val, c1, c2, r: e.radius, c_n_alpha, c0, alpha, b_override };
    p.validate(s.metric.dim())?;
    if !(a_const > bounds.a_plus_sup()) {
        return Err(FinslerError::Parameter(format!(
            "A = {a_const} must exceed sup a+ = {} on the doubled ball (A > a+)",
            bounds.a_plus_sup()
        )));
    }
    Ok((p, prov))
}

fn hypotheses(ctx: &Context, p: &EstimateParams) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(u) = &ctx.series {
        let sup = u
            .frames
            .iter()
            .flat_map(|f| f.iter().zip(&ctx.ball_2r).filter(|(_, m)| **m).map(|(v, _)| *v))
            .fold(f64::NEG_INFINITY, f64::max);
        if sup > p.d * (1.0 + 1e-12) {
            out.push(format!("sup u = {sup:.6e} on the doubled ball exceeds D = {:.6e}", p.d));
        }
    }
    if let Some(scan) = &ctx.scan {
        let tol = ctx.scenario.scan.tol;
        if scan.min_ratio < -p.k2r - tol {
            out.push(format!("measured weighted Ricci ratio {:.6e} is below -K(2R) = {:.6e}", scan.min_ratio, -p.k2r));
        }
        if scan.min_ratio < -p.k - tol {
            out.push(format!("measured weighted Ricci ratio {:.6e} is below -K = {:.6e}", scan.min_ratio, -p.k));
        }
        if scan.k0_part_max > p.k0 + tol {
            out.push(format!("measured non-Riemannian part {:.6e} exceeds K0 = {:.6e}", scan.k0_part_max, p.k0));
        }
    }
    out
}

fn evolution_of<'a>(ctx: &'a Context, u: &'a ScalarFieldT) -> Evolution<'a> {
    let s = &ctx.scenario;
    Evolution {
        metric: &s.metric,
        measure: &s.measure,
        coeffs: &s.coefficients,
        u,
        origin: s.evolution.as_ref().map_or(0.0, |e| e.time_origin),
    }
}

fn scan_options(ctx: &Context, grid: &GridChart, mask: &[bool]) -> ScanOptions {
    let stride = ctx.scenario.evolution.as_ref().map_or(1, |e| e.frame_stride);
    ScanOptions { frame_stride: stride, ..ScanOptions::interior(grid).restricted(mask) }
}

/// Lemma residual on the run and on its coarse companion (`h → 2h`,
/// `dt → 4dt`); passes when the residual drops by at least 3.5 or is at
/// roundoff level.
fn lemma_check(ctx: &Context, p: &EstimateParams, fine_residual: f64) -> Result<MarginReport> {
    let s = &ctx.scenario;
    let u = ctx.series.as_ref().expect("time series");
    let ev = evolution_of(ctx, u);
    let opts = scan_options(ctx, &u.grid, &ctx.ball_r);
    let mut notes = Vec::new();
    let coarse_residual = match s.grid.coarsen() {
        Ok(cg) => {
            let dt = s.evolution.as_ref().expect("validated").dt * 4.0;
            let cu = solve_series(s, &cg, dt)?;
            let cmask = ball_mask(&s.metric, &cg, &ctx.center, s.estimate.radius, &ctx.path_opts)?;
            let copts = ScanOptions { frame_stride: 1, ..ScanOptions::interior(&cg).restricted(&cmask) };
            let cev = evolution_of(ctx, &cu);
            Some(check_lemma32(&cev, p.d, 0.0, &copts)?.values["max_residual"])
        }
        Err(e) => {
            notes.push(format!("no coarse companion: {e}"));
            None
        }
    };
    let tol = coarse_residual.map_or(1e-10, |c| (c / 3.5).max(1e-10));
    let mut rep = check_lemma32(&ev, p.d, tol, &opts)?;
    rep.value("max_residual", fine_residual);
    if let Some(c) = coarse_residual {
        rep.value("coarse_residual", c);
        rep.value("refinement_ratio", c / fine_residual);
    } else {
        rep.status = Status::Inconclusive;
    }
    for n in notes {
        rep.note(n);
    }
    Ok(rep)
}

fn curvature_report(ctx: &Context, p: &EstimateParams) -> Result<MarginReport> {
    let scan = ctx.scan.as_ref().ok_or_else(|| FinslerError::Config("no curvature scan".into()))?;
    let mut rep = MarginReport::new("curvature-scan", ctx.scenario.scan.tol);
    for r in &scan.records {
        rep.push(&r.x, 0.0, -p.k2r, r.ratio);
    }
    rep.value("min_ratio", scan.min_ratio);
    rep.value("k_estimate", scan.k_estimate);
    rep.value("k0_part_max", scan.k0_part_max);
    rep.finalize();
    Ok(rep)
}

fn scan_csv(scan: &CurvatureScan) -> String {
    let mut s = String::new();
    let n = scan.records.first().map_or(0, |r| r.x.len());
    let cols: Vec<String> = ["x", "v", "w"].iter().flat_map(|p| (1..=n).map(move |i| format!("{p}{i}"))).collect();
    let _ = writeln!(s, "{},ratio,k0_part", cols.join(","));
    for r in &scan.records {
        for c in r.x.iter().chain(&r.v).chain(&r.w) {
            let _ = write!(s, "{c:e},");
        }
        let _ = writeln!(s, "{:e},{:e}", r.ratio, r.k0_part);
    }
    s
}

/// Write a reproduction bundle for a failed check.
fn counterexample(out: &Path, ctx: &Context, p: &EstimateParams, rep: &MarginReport) -> Result<String> {
    let rel = format!("counterexamples/{}", rep.name);
    let dir = out.join(&rel);
    let mut scenario = ctx.scenario.clone();
    scenario.output = None;
    scenario.checks = CheckKind::ALL.into_iter().filter(|c| c.name() == rep.name).collect();
    write(&dir.join("scenario.json"), &scenario.to_json())?;
    write(&dir.join("params.json"), &json(p))?;
    let mut worst = rep.clone();
    worst.records.sort_by(|a, b| a.margin.total_cmp(&b.margin));
    worst.records.truncate(20);
    write(&dir.join("worst.csv"), &worst.to_csv())?;
    if let (Some(u), Some(t)) = (&ctx.series, finite(rep.argmin_t)) {
        let origin = ctx.scenario.evolution.as_ref().map_or(0.0, |e| e.time_origin);
        let k = (((t + origin - u.t0) / u.dt).round().max(0.0) as usize).min(u.n_times() - 1);
        write(&dir.join("frame.csv"), &u.frame_csv(k))?;
    }
    let cmd = format!("{TOOL} run scenario.json --seed {} --checks {}\n", ctx.scenario.seed, rep.name);
    write(&dir.join("reproduce.txt"), &cmd)?;
    Ok(rel)
}

fn dump_diagnostic(out: &Path, s: &Scenario, err: &FinslerError) {
    #[derive(Serialize)]
    struct Diagnostic<'a> {
        error: String,
        scenario: &'a Scenario,
    }
    let _ = write(&out.join("diagnostic.json"), &json(&Diagnostic { error: err.to_string(), scenario: s }));
}

/// Run a scenario and write its output tree.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let mut s = scenario.refined(opts.refine);
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(c) = &opts.checks {
        s.checks = c.clone();
    }
    let out = opts.out.clone().or_else(|| s.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    s.output = None;
    s.validate()?;
    std::fs::create_dir_all(&out).map_err(|e| io(e, &out))?;
    match run_in(s.clone(), opts.refine, &out) {
        Ok(summary) => Ok(RunOutcome { summary, out_dir: out }),
        Err(e) => {
            if matches!(e, FinslerError::Numeric { .. } | FinslerError::Stability(_)) {
                dump_diagnostic(&out, &s, &e);
            }
            Err(e)
        }
    }
}

fn run_in(s: Scenario, refine: u32, out: &Path) -> Result<RunSummary> {
    let total = Instant::now();
    let mut timings = BTreeMap::new();
    let ctx = prepare(s, &mut timings)?;
    let s = &ctx.scenario;
    let (p, provenance) = resolve_auto_params(&ctx)?;
    let violated = hypotheses(&ctx, &p);

    let mut derived = BTreeMap::new();
    derived.insert("B_proof".to_string(), finite(p.b_proof()));
    derived.insert("B_statement".to_string(), finite(p.b_statement()));
    derived.insert("B".to_string(), finite(p.b()));
    derived.insert("curvature_bracket".to_string(), finite(p.curvature_bracket()));

    // inequality tolerance tied to the measured discretization error
    let mut fine_residual = None;
    let mut tol_ineq = None;
    if let Some(u) = &ctx.series {
        let ev = evolution_of(&ctx, u);
        let r = check_lemma32(&ev, p.d, 0.0, &scan_options(&ctx, &u.grid, &ctx.ball_r))?.values["max_residual"];
        fine_residual = Some(r);
        tol_ineq = Some(10.0 * r);
    }

    if let Some(u) = &ctx.series {
        let ev = s.evolution.as_ref().expect("validated");
        export_series(u, &out.join("fields/u"), ev.field_stride, &s.coefficients, ctx.bounds.as_ref())?;
        let evo = evolution_of(&ctx, u);
        let last = u.n_times().saturating_sub(2);
        if last >= 1 {
            write(&out.join("fields/l_last.csv"), &field_csv(&u.grid, &evo.l_field(&p, last)?))?;
        }
        let mask: Vec<f64> = ctx.ball_r.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
        write(&out.join("fields/ball.csv"), &field_csv(&u.grid, &mask))?;
    }
    if let Some(st) = &ctx.stationary {
        write(&out.join("fields/stationary.csv"), &field_csv(&s.grid, &st.u))?;
    }
    if let Some(scan) = &ctx.scan {
        write(&out.join("fields/curvature_scan.csv"), &scan_csv(scan))?;
    }

    let mut checks = Vec::new();
    for kind in &s.checks {
        let clock = Instant::now();
        let expected = s.expected_fail.contains(kind);
        let tol = tol_ineq.unwrap_or(0.0);
        let result: Result<MarginReport> = match kind {
            CheckKind::Lemma32 => lemma_check(&ctx, &p, fine_residual.expect("time series")),
            CheckKind::Evolution => {
                let u = ctx.series.as_ref().expect("time series");
                check_evolution_inequality(&evolution_of(&ctx, u), &p, tol, &scan_options(&ctx, &u.grid, &ctx.ball_r))
            }
            CheckKind::Liyau => {
                let u = ctx.series.as_ref().expect("time series");
                let bounds = ctx.bounds.as_ref().expect("bounds with a series");
                check_li_yau(&evolution_of(&ctx, u), &p, bounds, tol, &scan_options(&ctx, &u.grid, &ctx.ball_r), &violated)
            }
            CheckKind::Harnack => {
                let u = ctx.series.as_ref().expect("time series");
                let ev = evolution_of(&ctx, u);
                let region = scan_options(&ctx, &u.grid, &ctx.ball_r).region;
                sample_harnack_pairs(&ev, &region, s.harnack_pairs, s.seed).and_then(|pairs| {
                    let (mut rep, paths) = check_harnack(&ev, &p, &pairs, tol, &ctx.path_opts)?;
                    for (i, nodes) in paths.iter().enumerate() {
                        let mut csv = String::new();
                        let head: Vec<String> = (1..=s.metric.dim()).map(|i| format!("x{i}")).collect();
                        let _ = writeln!(csv, "{}", head.join(","));
                        for x in nodes {
                            let row: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
                            let _ = writeln!(csv, "{}", row.join(","));
                        }
                        write(&out.join(format!("paths/harnack_{i:02}.csv")), &csv)?;
                    }
                    if let Some(first) = pairs.first() {
                        let mono = harnack_monotone_in_t1(&ev, &p, first.x1, u.n_times() - 1);
                        rep.value("monotone_in_t1", if mono { 1.0 } else { 0.0 });
                    }
                    Ok(rep)
                })
            }
            CheckKind::Apriori => {
                let st = ctx.stationary.as_ref().expect("stationary solve");
                let order = s.stationary.as_ref().map_or(2, |v| v.order);
                check_apriori(&s.metric, &s.measure, &s.coefficients.b, p.n_eff, &s.grid, st, order).map(|mut rep| {
                    let mask = &ctx.ball_r;
                    rep.records.retain(|r| s.grid.node_at(&r.x).is_some_and(|l| mask[l]));
                    let converged = st.converged;
                    rep.finalize();
                    if !converged {
                        rep.status = Status::Inconclusive;
                    }
                    rep
                })
            }
            CheckKind::CurvatureScan => curvature_report(&ctx, &p),
        };
        timings.insert(format!("check_{}", kind.name()), clock.elapsed().as_secs_f64());
        let summary = match result {
            Ok(rep) => {
                write(&out.join(format!("checks/{}.csv", rep.name)), &rep.to_csv())?;
                write(&out.join(format!("checks/{}_by_time.csv", rep.name)), &margin_by_time(&rep.records))?;
                if let Some(t) = finite(rep.argmin_t) {
                    write(&out.join(format!("checks/{}_ray.csv", rep.name)), &ray_profile(&rep.records, &ctx.center, t))?;
                }
                let mut cs = CheckSummary::from_report(&rep, expected);
                if rep.status == Status::Fail || rep.status == Status::HypothesesNotMet && !rep.pass {
                    cs.counterexample = Some(counterexample(out, &ctx, &p, &rep)?);
                }
                cs
            }
            Err(FinslerError::NotApplicable(m)) => CheckSummary::not_applicable(*kind, m, expected),
            Err(e) => return Err(e),
        };
        checks.push(summary);
    }

    let ok = checks.iter().all(|c| c.acceptable());
    let summary = RunSummary {
        tool: TOOL.into(),
        version: VERSION.into(),
        scenario: s.clone(),
        refine,
        params: Some(p),
        provenance,
        derived,
        coefficient_bounds: ctx.bounds.clone(),
        tol_ineq,
        hypotheses_violated: violated,
        checks,
        ok,
    };
    write(&out.join("summary.json"), &json(&summary))?;
    timings.insert("total".into(), total.elapsed().as_secs_f64());
    write(&out.join("timings.json"), &json(&timings))?;
    Ok(summary)
}

/// Curvature scan of a scenario's doubled ball, written to the output
/// directory.
pub fn scan_curvature(scenario: &Scenario, out: Option<PathBuf>) -> Result<(CurvatureScan, PathBuf)> {
    let s = scenario;
    let center = s.center();
    s.metric.check_point(&center)?;
    let opts = PathOptions { seed: s.seed, bounds: Some(CoordBox::new(&s.grid.lo, &s.grid.hi)), ..PathOptions::default() };
    let pts = scan_points(s, &center, 2.0 * s.estimate.radius, &opts)?;
    let dirs = sample_directions(s.metric.dim(), s.scan.directions);
    let scan = curvature_scan(&s.metric, &s.measure, n_eff_of(s), &pts, &dirs)?;
    let out = out.or_else(|| s.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    write(&out.join("curvature_scan.csv"), &scan_csv(&scan))?;
    #[derive(Serialize)]
    struct ScanSummary {
        points: usize,
        directions: usize,
        min_ratio: f64,
        k_estimate: f64,
        k0_part_max: f64,
    }
    let summary = ScanSummary {
        points: pts.len(),
        directions: dirs.len(),
        min_ratio: scan.min_ratio,
        k_estimate: scan.k_estimate,
        k0_part_max: scan.k0_part_max,
    };
    write(&out.join("curvature_scan.json"), &json(&summary))?;
    Ok((scan, out))
}

/// A check re-summarized from its record file.
#[derive(Clone, Debug, PartialEq)]
pub struct Resummary {
    pub check: CheckSummary,
    pub recomputed_min: Option<f64>,
    pub recomputed_pass: Option<bool>,
    /// The stored pass flag agrees with the records.
    pub consistent: bool,
}

/// Re-read `summary.json` and every record file under `dir` and recompute
/// each pass flag.
pub fn resummarize(dir: &Path) -> Result<(RunSummary, Vec<Resummary>)> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io(e, &path))?;
    let summary: RunSummary =
        serde_json::from_str(&text).map_err(|e| FinslerError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    let mut out = Vec::new();
    for c in &summary.checks {
        let (min, pass) = match &c.records {
            Some(rel) => {
                let p = dir.join(rel);
                let text = std::fs::read_to_string(&p).map_err(|e| io(e, &p))?;
                let recs = MarginReport::records_from_csv(&text)?;
                let min = recs.iter().map(|r| if r.margin.is_nan() { f64::NEG_INFINITY } else { r.margin }).fold(f64::INFINITY, f64::min);
                (finite(min), Some(!recs.is_empty() && min >= -c.tol))
            }
            None => (None, None),
        };
        let consistent = pass.is_none_or(|p| p == c.pass);
        out.push(Resummary { check: c.clone(), recomputed_min: min, recomputed_pass: pass, consistent });
    }
    Ok((summary, out))
}
