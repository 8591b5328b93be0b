//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use finsler_core::expr::Expr;
use finsler_core::geodesics::{forward_distance, path_action};
use finsler_core::geometry::{chern_g, flag_curvature, tau_g, weighted_ricci, MeasureSpec};
use finsler_core::grid::{GridChart, ScalarFieldT};
use finsler_core::linalg::Mat;
use finsler_core::metric::{cartan_tensor, fundamental_tensor, legendre, legendre_inv, MetricSpec, TangentSample};
use finsler_core::pde::{solve_log_schrodinger, Boundary, PdeCoefficients, Scheme, SolveConfig};
use finsler_core::report::Status;
use finsler_core::runner::{run_scenario, RunOptions, RunSummary};
use finsler_core::scenario::{CheckKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

/// Written straight to stdout so the line shows even when output is captured.
fn report(n: usize, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn randers_curved() -> MetricSpec {
    MetricSpec::randers(&[&["1 + 0.2*x1^2", "0.1*x2"], &["0.1*x2", "1 + 0.1*sin(x1)"]], &["0.3*sin(x2)", "0.2*x1"]).unwrap()
}

fn riemannian_curved() -> MetricSpec {
    MetricSpec::riemannian(&[&["1 + x1^2", "0.3*x1*x2"], &["0.3*x1*x2", "2 + sin(x2)"]]).unwrap()
}

fn families() -> Vec<MetricSpec> {
    vec![MetricSpec::euclidean(2), riemannian_curved(), MetricSpec::randers_flat(&[0.5, 0.0]), randers_curved()]
}

fn samples(seed: u64, count: usize) -> Vec<([f64; 2], [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r: f64 = rng.gen_range(0.3..2.0);
            (x, [r * th.cos(), r * th.sin()])
        })
        .collect()
}

#[test]
fn criterion_1_metric_kernel_suite() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for m in families() {
        for (x, y) in samples(1, 200) {
            let s = TangentSample::new(&x, &y);
            let f = m.norm(&x, &y);
            let g = fundamental_tensor(&m, &s).unwrap();
            let c = cartan_tensor(&m, &s).unwrap();
            // positive homogeneity
            worst = worst.max((m.norm(&x, &[2.5 * y[0], 2.5 * y[1]]) - 2.5 * f).abs());
            // Euler: g_y(y, y) = F², C(y, ·, ·) = 0
            worst = worst.max((g.bilinear(&y, &y) - f * f).abs());
            let cy = c.contract_first(&y);
            worst = worst.max(cy.a.iter().map(|v| v.abs()).fold(0.0, f64::max));
            // Legendre roundtrip
            let xi = legendre(&m, &s).unwrap();
            let back = legendre_inv(&m, &x, &xi).unwrap();
            worst = worst.max((back[0] - y[0]).abs().max((back[1] - y[1]).abs()));
            if m.is_riemannian() {
                let g2 = fundamental_tensor(&m, &TangentSample::new(&x, &[-y[1], 0.3 * y[0]])).unwrap();
                worst = worst.max(g.a.iter().zip(&g2.a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            worst = worst.max(c.get(i, j, k).abs());
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && secs < 10.0;
    report(1, ok, &format!("max identity residual {worst:.2e}, {secs:.2} s"));
    assert!(ok);
}

fn fd_fundamental(m: &MetricSpec, x: &[f64], y: &[f64]) -> Mat<f64> {
    let h = 1e-4;
    Mat::from_fn(2, |i, j| {
        let at = |si: f64, sj: f64| {
            let mut z = y.to_vec();
            z[i] += si * h;
            z[j] += sj * h;
            0.5 * m.norm(x, &z).powi(2)
        };
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
    })
}

/// Central difference of the fundamental tensor along `y^k`, halved.
fn fd_cartan(m: &MetricSpec, x: &[f64], y: &[f64], k: usize) -> Mat<f64> {
    let h = 1e-4;
    let (mut p, mut q) = (y.to_vec(), y.to_vec());
    p[k] += h;
    q[k] -= h;
    let (gp, gq) = (fundamental_tensor(m, &TangentSample::new(x, &p)).unwrap(), fundamental_tensor(m, &TangentSample::new(x, &q)).unwrap());
    Mat::from_fn(2, |i, j| 0.25 * (gp.get(i, j) - gq.get(i, j)) / h)
}

fn christoffel_fd(m: &MetricSpec, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    let g = |p: &[f64]| m.fundamental_g(p, &[1.0, 0.0]);
    let dg: Vec<Mat<f64>> = (0..2)
        .map(|k| {
            let (mut p, mut q) = (x.to_vec(), x.to_vec());
            p[k] += h;
            q[k] -= h;
            let (gp, gq) = (g(&p), g(&q));
            Mat::from_fn(2, |a, b| (gp.get(a, b) - gq.get(a, b)) / (2.0 * h))
        })
        .collect();
    let gi = g(x).inverse().unwrap();
    let mut out = vec![0.0; 8];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                out[(k * 2 + i) * 2 + j] = (0..2).map(|l| 0.5 * gi.get(k, l) * (dg[i].get(l, j) + dg[j].get(l, i) - dg[l].get(i, j))).sum();
            }
        }
    }
    out
}

#[test]
fn criterion_2_oracle_equivalence() {
    let mut tensor_err: f64 = 0.0;
    for m in [randers_curved(), MetricSpec::randers_flat(&[0.5, 0.0]), riemannian_curved()] {
        for (x, y) in samples(2, 30) {
            let s = TangentSample::new(&x, &y);
            let g = fundamental_tensor(&m, &s).unwrap();
            let fd = fd_fundamental(&m, &x, &y);
            tensor_err = tensor_err.max(g.a.iter().zip(&fd.a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
            let c = cartan_tensor(&m, &s).unwrap();
            for k in 0..2 {
                let fc = fd_cartan(&m, &x, &y, k);
                for i in 0..2 {
                    for j in 0..2 {
                        tensor_err = tensor_err.max((c.get(i, j, k) - fc.get(i, j)).abs());
                    }
                }
            }
        }
    }
    let m = riemannian_curved();
    let mut chern_err: f64 = 0.0;
    for (x, y) in samples(3, 30) {
        let gam = chern_g(&m, &x, &y).unwrap();
        let oracle = christoffel_fd(&m, &x);
        chern_err = chern_err.max(gam.iter().zip(&oracle).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
    }
    let sphere = MetricSpec::stereographic_sphere(2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut flag_err: f64 = 0.0;
    for _ in 0..30 {
        let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        flag_err = flag_err.max((flag_curvature(&sphere, &TangentSample::new(&x, &y), &v).unwrap() - 1.0).abs());
    }
    let ok = tensor_err <= 1e-5 && chern_err <= 1e-6 && flag_err <= 1e-4;
    report(2, ok, &format!("tensors {tensor_err:.2e}, chern {chern_err:.2e}, sphere flag {flag_err:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_3_bakry_emery() {
    let e = MetricSpec::euclidean(2);
    let mu = MeasureSpec::custom("exp(-(x1^2 + x2^2))").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, mut worst, mut oracle_gap): (f64, f64, f64) = (1e-3, 0.0, 0.0);
    for _ in 0..100 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let ric = weighted_ricci(&e, &mu, f64::INFINITY, &TangentSample::new(&x, &y)).unwrap();
        // straight lines are geodesics: second difference of τ along them
        let t = |k: f64| tau_g::<f64>(&e, &mu, &[x[0] + k * y[0], x[1] + k * y[1]], &y).unwrap();
        let fd = (t(h) - 2.0 * t(0.0) + t(-h)) / (h * h);
        worst = worst.max((ric - 2.0 * e.norm(&x, &y).powi(2)).abs());
        oracle_gap = oracle_gap.max((ric - fd).abs());
    }
    let ok = worst <= 1e-5 && oracle_gap <= 1e-5;
    report(3, ok, &format!("|Ric_inf - 2F^2| {worst:.2e}, vs tau differences {oracle_gap:.2e}, 100 samples"));
    assert!(ok);
}

fn heat_kernel(x: &[f64], t: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).recip() * (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)).exp()
}

/// Max relative error against the heat kernel after 0.5 time units from t = 2.
fn heat_error(count: usize, dt: f64) -> (f64, f64, usize) {
    let grid = GridChart::uniform(2, -4.0, 4.0, count).unwrap();
    let u0 = ScalarFieldT::sample(&grid, heat_kernel, 2.0, dt, 1, 2).unwrap();
    let bc = Boundary::DirichletExact { value: Expr::parse("(4*pi*t)^(-1) * exp(-(x1^2 + x2^2)/(4*t))").unwrap() };
    let cfg = SolveConfig::new(dt, 0.5, Scheme::SemiImplicit, bc);
    let start = Instant::now();
    let u = solve_log_schrodinger(&MetricSpec::euclidean(2), &MeasureSpec::Lebesgue, &PdeCoefficients::zero(), &u0, &cfg).unwrap().series;
    let secs = start.elapsed().as_secs_f64();
    let k = u.n_times() - 1;
    let err = (0..grid.len())
        .map(|l| {
            let want = heat_kernel(&grid.point(l), u.time(k));
            (u.frame(k)[l] - want).abs() / want
        })
        .fold(0.0, f64::max);
    (err, secs, k)
}

#[test]
fn criterion_4_pde_order() {
    let (coarse, _, _) = heat_error(33, 0.004);
    let (fine, secs, steps) = heat_error(65, 0.001);
    let ratio = coarse / fine;
    let grid = GridChart::uniform(2, 0.0, 1.0, 9).unwrap();
    let (a, b, c): (f64, f64, f64) = (-0.8, 0.3, 1.7);
    let u0 = ScalarFieldT::sample(&grid, |_, _| c, 0.0, 0.002, 1, 2).unwrap();
    let cfg = SolveConfig::new(0.002, 1.0, Scheme::SemiImplicit, Boundary::Reflecting);
    let out =
        solve_log_schrodinger(&MetricSpec::euclidean(2), &MeasureSpec::Lebesgue, &PdeCoefficients::constant(a, b), &u0, &cfg).unwrap();
    // w = log u solves w' = a w + b exactly
    let w = -b / a + (c.ln() + b / a) * a.exp();
    let ode_err = out.series.last().iter().map(|v| (v.ln() - w).abs()).fold(0.0, f64::max);
    let ok = (3.5..=4.5).contains(&ratio) && ode_err <= 1e-8 && secs < 60.0 && steps == 500;
    report(4, ok, &format!("ratio {ratio:.3}, ODE error {ode_err:.2e}, 65^2 x {steps} steps in {secs:.1} s"));
    assert!(ok);
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run_bundled(name: &str, checks: Option<Vec<CheckKind>>) -> RunSummary {
    let s = Scenario::load(&scenario_path(name)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { out: Some(dir.path().to_path_buf()), seed: None, checks, refine: 0 };
    run_scenario(&s, &opts).unwrap().summary
}

static EUCLID: OnceLock<RunSummary> = OnceLock::new();
static RANDERS: OnceLock<RunSummary> = OnceLock::new();

fn euclid_run() -> &'static RunSummary {
    EUCLID.get_or_init(|| run_bundled("gaussian-euclid.cfg", None))
}

fn randers_run() -> &'static RunSummary {
    RANDERS.get_or_init(|| run_bundled("randers-flat.cfg", None))
}

fn check<'a>(s: &'a RunSummary, name: &str) -> &'a finsler_core::runner::CheckSummary {
    s.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("{name} missing from {}", s.scenario.name))
}

#[test]
fn criterion_5_lemma_residual_refinement() {
    let ratio = |s: &RunSummary| check(s, "lemma32").values.get("refinement_ratio").copied().flatten().unwrap_or(f64::NAN);
    let (e, r) = (ratio(euclid_run()), ratio(randers_run()));
    let ok = (3.5..=4.5).contains(&e) && (3.5..=4.5).contains(&r);
    report(5, ok, &format!("residual ratio euclidean {e:.3}, randers {r:.3}"));
    assert!(ok);
}

#[test]
fn criterion_6_inequality_scans() {
    let mut lines = Vec::new();
    let mut ok = true;
    for s in [euclid_run(), randers_run()] {
        let tol = s.tol_ineq.expect("lemma residual measured");
        for name in ["evolution", "liyau", "harnack"] {
            let c = check(s, name);
            let m = c.min_margin.unwrap_or(f64::NEG_INFINITY);
            let good = c.status == Status::Pass && m >= -tol;
            ok &= good;
            lines.push(format!("{}/{name} {m:.2e}", s.scenario.name));
        }
        let pairs = check(s, "harnack").evaluated;
        ok &= pairs >= 10;
    }
    for name in ["apriori-zero.cfg", "apriori-constant.cfg"] {
        let s = run_bundled(name, None);
        let c = check(&s, "apriori");
        ok &= c.status == Status::Pass;
        lines.push(format!("{}/apriori {:.2e}", s.scenario.name, c.min_margin.unwrap_or(f64::NAN)));
    }
    report(6, ok, &lines.join(", "));
    assert!(ok);
}

/// `(d(0,e₁), d(e₁,0))` for the Randers metric with β = 0.5·dx¹.
fn randers_half_distances() -> (f64, f64) {
    let m = MetricSpec::randers_flat(&[0.5, 0.0]);
    (forward_distance(&m, &[0.0, 0.0], &[1.0, 0.0], 8).unwrap(), forward_distance(&m, &[1.0, 0.0], &[0.0, 0.0], 8).unwrap())
}

fn euclidean_action_error() -> f64 {
    let e = MetricSpec::euclidean(2);
    let (x2, x1, tau): ([f64; 2], [f64; 2], f64) = ([0.5, -0.5], [-1.0, 1.5], 0.7);
    let want = ((x1[0] - x2[0]).powi(2) + (x1[1] - x2[1]).powi(2)) / (2.0 * tau);
    (path_action(&e, &x2, &x1, tau, 4).unwrap() - want).abs()
}

#[test]
fn criterion_7_action_and_distance() {
    let action_err = euclidean_action_error();
    let (there, back) = randers_half_distances();
    // with F = |y| + β(y), travelling along β costs 1.5 and against it 0.5,
    // so the stated direction d(0,e₁) < d(e₁,0) cannot hold
    let literal = there < back;
    let ok = action_err <= 1e-5 && literal;
    report(
        7,
        ok,
        &format!(
            "action error {action_err:.2e}; d(0,e1) = {there:.6}, d(e1,0) = {back:.6}, stated order d(0,e1) < d(e1,0) {}",
            if literal { "holds" } else { "does not hold" }
        ),
    );
    // the attainable parts: exact action and a witnessed asymmetry
    assert!(action_err <= 1e-5);
    assert!((there - 1.5).abs() < 1e-4 && (back - 0.5).abs() < 1e-4);
}

#[test]
#[ignore = "stated order is reversed for F = |y| + 0.5 dx1: d(0,e1) = 1.5 > d(e1,0) = 0.5"]
fn criterion_7_stated_asymmetry_direction() {
    let (there, back) = randers_half_distances();
    assert!(there < back, "d(0,e1) = {there}, d(e1,0) = {back}");
}

#[test]
fn criterion_8_determinism() {
    let s = Scenario::load(&scenario_path("gaussian-euclid.cfg")).unwrap();
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            seed: Some(19),
            checks: Some(vec![CheckKind::Liyau, CheckKind::Harnack]),
            refine: 0,
        };
        run_scenario(&s, &opts).unwrap();
        std::fs::read(dir.path().join("summary.json")).unwrap()
    };
    let (a, b) = (read(), read());
    let ok = a == b;
    report(8, ok, &format!("two seeded runs, summaries {} ({} bytes)", if ok { "byte-identical" } else { "differ" }, a.len()));
    assert!(ok);
}
