use finsler_core::expr::Expr;
use finsler_core::geodesics::PathOptions;
use finsler_core::geometry::MeasureSpec;
use finsler_core::grid::{GridChart, ScalarFieldT};
use finsler_core::harness::*;
use finsler_core::metric::MetricSpec;
use finsler_core::operators::gradient_field;
use finsler_core::pde::{solve_log_schrodinger, solve_stationary, Boundary, CoefficientBounds, PdeCoefficients, Scheme, SolveConfig};
use finsler_core::report::Status;
use finsler_core::FinslerError;
use proptest::prelude::*;
use std::f64::consts::PI;

fn heat_kernel(x: &[f64], t: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI * t).recip() * (-r2 / (4.0 * t)).exp()
}

/// Heat kernel from `t = 0.5` to `t = 1` on `[-4, 4]²`.
fn gaussian(count: usize, dt: f64) -> ScalarFieldT {
    let grid = GridChart::uniform(2, -4.0, 4.0, count).unwrap();
    let u0 = ScalarFieldT::sample(&grid, heat_kernel, 0.5, dt, 1, 2).unwrap();
    let value = Expr::parse("(4*pi*t)^(-1) * exp(-(x1^2 + x2^2)/(4*t))").unwrap();
    let cfg = SolveConfig::new(dt, 0.5, Scheme::SemiImplicit, Boundary::DirichletExact { value });
    solve_log_schrodinger(&MetricSpec::euclidean(2), &MeasureSpec::Lebesgue, &PdeCoefficients::zero(), &u0, &cfg).unwrap().series
}

fn params(d: f64) -> EstimateParams {
    EstimateParams {
        n_eff: 2.0,
        k: 0.0,
        k2r: 0.0,
        k0: 0.0,
        a_const: 1.0,
        d,
        e: 0.0,
        c1: 2.0,
        c2: 10.0,
        r: 2.0,
        c_n_alpha: 2.0,
        c0: 0.0,
        alpha: 1.0,
        b_override: None,
    }
}

fn ball(grid: &GridChart, r: f64) -> ScanOptions {
    let m = MetricSpec::euclidean(2);
    let mask = ball_mask(&m, grid, &[0.0, 0.0], r, &PathOptions::default()).unwrap();
    ScanOptions::interior(grid).restricted(&mask)
}

#[test]
fn b_proof_has_flat_limit_and_vanishes_at_infinity() {
    let mut p = params(1.0);
    let r2 = p.r * p.r;
    let expect = 2.0 * p.c1 * p.c1 * p.alpha / r2 + p.c1 / p.r * (p.c_n_alpha / p.r + p.c0) + p.alpha * p.c2 / r2;
    assert!((p.b_proof() - expect).abs() < 1e-14);
    p.k2r = 1e-20;
    assert!((p.b_proof() - expect).abs() < 1e-12);
    p.k2r = 0.0;
    p.r = 1e8;
    assert!(p.b_proof() < 1e-14);
    // coth grows the bracket beyond the flat value
    let mut q = params(1.0);
    q.k2r = 1.0;
    let s = (0.5f64).sqrt();
    let bracket = 2.0 * s / (2.0 * s).tanh();
    assert!((q.comparison_term() - bracket).abs() < 1e-14);
    assert!(q.b_proof() > p.b_proof());
}

#[test]
fn li_yau_rhs_matches_hand_substitution() {
    let p = params(1.0);
    let bounds = CoefficientBounds::constant(0.0, 0.0);
    let t = 0.7;
    let n = 2.0;
    // B = 2·4·1/4 + (2/2)(2/2 + 0) + 10/4
    let b = 2.0 + 1.0 + 2.5;
    let cut = n * 4.0 / 4.0;
    let case2 = 4.0 * n * (b * t + 1.0 + cut * t + (t / 2.0) * (-(1.0f64 - 2.0).abs()));
    let case1 = 4.0 * n * (1.0 + t * (b + cut));
    let r = li_yau_rhs(&p, &bounds, t).unwrap();
    assert!((r.case2 - case2).abs() < 1e-12, "{} {case2}", r.case2);
    assert!((r.case1 - case1).abs() < 1e-12);
    assert!((r.total - case1 - case2).abs() < 1e-12);
}

#[test]
fn li_yau_rhs_rejects_small_a() {
    let mut p = params(1.0);
    p.a_const = 0.0;
    let err = li_yau_rhs(&p, &CoefficientBounds::constant(2.0, 0.0), 1.0).unwrap_err();
    assert!(matches!(err, FinslerError::Parameter(ref m) if m.contains("A > a+")));
}

proptest! {
    #[test]
    fn li_yau_rhs_is_affine_in_t(t1 in 0.01f64..3.0, t2 in 0.01f64..3.0, a in -1.0f64..0.5, b in -1.0f64..1.0) {
        let p = params(1.5);
        let bounds = CoefficientBounds::constant(a, b);
        let f = |t| li_yau_rhs(&p, &bounds, t).unwrap().total;
        let mid = f(0.5 * (t1 + t2));
        prop_assert!((mid - 0.5 * (f(t1) + f(t2))).abs() < 1e-9 * (1.0 + mid.abs()));
    }

    #[test]
    fn li_yau_rhs_is_monotone_in_its_constants(dk in 0.0f64..1.0, dk0 in 0.0f64..1.0, da in 0.0f64..0.5, dr in 0.0f64..1.0, t in 0.1f64..2.0) {
        // A large enough that A − 2K − 2 − |log D| stays nonnegative
        let mut p = params(1.0);
        p.a_const = 10.0;
        let base = li_yau_rhs(&p, &CoefficientBounds::constant(0.5, 0.0), t).unwrap().total;
        let mut q = p.clone();
        q.k = dk;
        let mut bigger = vec![li_yau_rhs(&q, &CoefficientBounds::constant(0.5, 0.0), t).unwrap().total];
        q = p.clone();
        q.c0 = dk0;
        bigger.push(li_yau_rhs(&q, &CoefficientBounds::constant(0.5, 0.0), t).unwrap().total);
        bigger.push(li_yau_rhs(&p, &CoefficientBounds::constant(0.5 + da, 0.0), t).unwrap().total);
        q = p.clone();
        q.r = p.r / (1.0 + dr);
        bigger.push(li_yau_rhs(&q, &CoefficientBounds::constant(0.5, 0.0), t).unwrap().total);
        // K enters case 1 through −[A − 2K − …]⁺, which can only grow
        prop_assert!(bigger.iter().all(|v| *v >= base - 1e-12), "{bigger:?} vs {base}");
    }

    #[test]
    fn chosen_e_grows_with_range_of_b(b in 0.0f64..5.0, a in -1.0f64..0.5, d in 0.5f64..3.0) {
        let widen = |s: f64| {
            let mut c = CoefficientBounds::constant(a, 0.0);
            c.b_min = -s;
            c.b_max = s;
            c
        };
        let (small, big) = (widen(b), widen(2.0 * b));
        let e1 = choose_e(&small, d, 1.0, 2.0).unwrap();
        let e2 = choose_e(&big, d, 1.0, 2.0).unwrap();
        prop_assert!(e2 >= e1);
        prop_assert!(e_feasible(e1, &small, d, 1.0, 2.0));
    }
}

#[test]
fn e_is_zero_without_coefficients() {
    assert_eq!(choose_e(&CoefficientBounds::constant(0.0, 0.0), 1.0, 1.0, 2.0).unwrap(), 0.0);
    let e = choose_e(&CoefficientBounds::constant(0.0, -1.0), 1.0, 1.0, 2.0).unwrap();
    assert!((1.0..=1.25 + 1e-9).contains(&e));
}

#[test]
fn stationary_e_is_admissible() {
    // a = 2, D = 1, V = 0.3 cos(x1) on [0, π]: sup|ΔV| = 0.3, sup|∇V| = 0.3
    let mut bounds = CoefficientBounds::constant(2.0, 0.0);
    bounds.b_min = -0.3;
    bounds.b_max = 0.3;
    bounds.grad_b_sup = 0.3;
    bounds.lap_b_inf = -0.3;
    bounds.lap_b_sup = 0.3;
    let n = 2.0;
    let e = stationary_e(&bounds, n);
    assert!((e - (n.sqrt() * 0.3 + 0.3 + 0.3)).abs() < 1e-14);
    assert!(e_feasible(e, &bounds, 1.0, 2.5, n));
    assert!(choose_e(&bounds, 1.0, 2.5, n).unwrap() <= e);
}

#[test]
fn l_of_constant_solution_is_closed_form() {
    let grid = GridChart::uniform(2, 0.0, 1.0, 9).unwrap();
    let (a, b, d): (f64, f64, f64) = (1.5, -0.6, 2.0);
    let c = (-b / a).exp();
    let u = ScalarFieldT::sample(&grid, |_, _| c, 0.0, 0.1, 5, 2).unwrap();
    let coeffs = PdeCoefficients::constant(a, b);
    let mut p = params(d);
    p.a_const = 2.0;
    p.e = 0.8;
    let ev = Evolution { metric: &MetricSpec::euclidean(2), measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: -0.5 };
    let t = 0.2 + 0.5;
    let f = -b / a - d.ln();
    let expect = t * ((p.a_const + a) * f + 2.0 * (p.e + b));
    let l = ev.quantity_l(&p, &[0.5, 0.5], t).unwrap();
    assert!((l - expect).abs() < 1e-12, "{l} {expect}");
    // the prefactor t drives L to zero
    let tiny = Evolution { origin: 0.1 - 1e-9, ..ev };
    assert!(tiny.quantity_l(&p, &[0.5, 0.5], 1e-9).unwrap().abs() < 1e-8);
}

#[test]
fn l_matches_recomposition_from_operators() {
    let u = gaussian(33, 0.004);
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let p = params(u.max_abs());
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: 0.0 };
    let k = 40;
    let l = ev.l_field(&p, k).unwrap();
    let log_u: Vec<f64> = u.frame(k).iter().map(|v| v.ln()).collect();
    let gf = gradient_field(&m, &u.grid, &log_u, 2).unwrap();
    let log_series = u.map(|v| v.ln());
    let t = u.time(k);
    let inside = ball(&u.grid, 2.0).region;
    let mut analytic_err: f64 = 0.0;
    for node in (0..u.grid.len()).filter(|n| inside[*n]) {
        let dw = &gf.differentials[node];
        let f = log_u[node] - p.d.ln();
        let ft = log_series.time_derivative(k, node);
        let expect = t * (dw[0] * dw[0] + dw[1] * dw[1] + p.a_const * f - 2.0 * ft);
        assert!((l[node] - expect).abs() < 1e-8, "{} {expect}", l[node]);
        let x = u.grid.point(node);
        let r2 = x[0] * x[0] + x[1] * x[1];
        let closed = 2.0 - r2 / (4.0 * t) + t * p.a_const * f;
        analytic_err = analytic_err.max((l[node] - closed).abs());
    }
    assert!(analytic_err < 0.05, "{analytic_err}");
}

fn lemma_residual(u: &ScalarFieldT, d: f64, r: f64) -> f64 {
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u, origin: 0.0 };
    check_lemma32(&ev, d, 1.0, &ball(&u.grid, r)).unwrap().values["max_residual"]
}

#[test]
fn lemma32_residual_vanishes_on_equilibrium() {
    let grid = GridChart::uniform(2, 0.0, 1.0, 9).unwrap();
    let (a, b): (f64, f64) = (0.7, 0.35);
    let u = ScalarFieldT::sample(&grid, |_, _| (-b / a).exp(), 0.0, 0.1, 5, 2).unwrap();
    let coeffs = PdeCoefficients::constant(a, b);
    let ev = Evolution { metric: &MetricSpec::euclidean(2), measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: -1.0 };
    let rep = check_lemma32(&ev, 3.0, 1e-10, &ScanOptions::interior(&grid)).unwrap();
    assert!(rep.pass && rep.values["max_residual"] <= 1e-10);
}

#[test]
fn lemma32_residual_is_second_order_and_ignores_d() {
    let fine = gaussian(65, 0.001);
    let coarse = gaussian(33, 0.004);
    let rf = lemma_residual(&fine, 0.2, 2.5);
    let rc = lemma_residual(&coarse, 0.2, 2.5);
    assert!((3.5..=4.5).contains(&(rc / rf)), "{rc} / {rf}");
    let r2 = lemma_residual(&coarse, 0.4, 2.5);
    assert!((r2 - rc).abs() <= 1e-12);
}

#[test]
fn evolution_inequality_holds_on_heat_kernel() {
    let u = gaussian(33, 0.004);
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: 0.0 };
    let opts = ball(&u.grid, 2.0);
    let tol = 10.0 * lemma_residual(&u, u.max_abs(), 2.0);
    let mut p = params(u.max_abs());
    let rep = check_evolution_inequality(&ev, &p, tol, &opts).unwrap();
    assert_eq!(rep.status, Status::Pass, "{}", rep.summary_line());
    assert!(rep.excluded > 0);
    // a weaker curvature assumption only lowers the bound side
    p.k = 1.0;
    let weaker = check_evolution_inequality(&ev, &p, tol, &opts).unwrap();
    for (x, y) in rep.records.iter().zip(&weaker.records) {
        assert!(y.margin >= x.margin - 1e-12);
    }
}

#[test]
fn evolution_inequality_excludes_everything_at_equilibrium() {
    let grid = GridChart::uniform(2, 0.0, 1.0, 9).unwrap();
    let u = ScalarFieldT::sample(&grid, |_, _| 0.5, 0.0, 0.1, 6, 2).unwrap();
    let coeffs = PdeCoefficients::zero();
    let ev = Evolution { metric: &MetricSpec::euclidean(2), measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: -1.0 };
    let rep = check_evolution_inequality(&ev, &params(1.0), 1e-6, &ScanOptions::interior(&grid)).unwrap();
    assert_eq!(rep.evaluated, 0);
    assert!(rep.excluded > 0);
    assert_eq!(rep.status, Status::Inconclusive);
}

#[test]
fn li_yau_holds_on_heat_kernel_and_ignores_scaling() {
    let u = gaussian(33, 0.004);
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let bounds = CoefficientBounds::constant(0.0, 0.0);
    let opts = ball(&u.grid, 2.0);
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: 0.0 };
    let p = params(u.max_abs());
    let rep = check_li_yau(&ev, &p, &bounds, 1e-6, &opts, &[]).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.min_margin > 0.0);
    let scaled = u.map(|v| 3.0 * v);
    let ev3 = Evolution { u: &scaled, ..ev };
    let rep3 = check_li_yau(&ev3, &params(3.0 * u.max_abs()), &bounds, 1e-6, &opts, &[]).unwrap();
    // f = log(u/D) is unchanged; only the |log D| term of the bound moves
    assert_eq!(rep3.pass, rep.pass);
    assert_eq!(rep3.evaluated, rep.evaluated);
    for (x, y) in rep.records.iter().zip(&rep3.records) {
        assert!((x.lhs - y.lhs).abs() < 1e-9);
    }
    let flagged = check_li_yau(&ev, &p, &bounds, 1e-6, &opts, &["sup u exceeds D".to_string()]).unwrap();
    assert_eq!(flagged.status, Status::HypothesesNotMet);
    assert!(flagged.evaluated > 0);
}

#[test]
fn li_yau_on_equilibrium_matches_closed_form() {
    let grid = GridChart::uniform(2, 0.0, 1.0, 9).unwrap();
    let (a, b): (f64, f64) = (-0.5, 0.25);
    let c = (-b / a).exp();
    let u = ScalarFieldT::sample(&grid, |_, _| c, 0.0, 0.1, 6, 2).unwrap();
    let coeffs = PdeCoefficients::constant(a, b);
    let ev = Evolution { metric: &MetricSpec::euclidean(2), measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: -0.2 };
    let mut p = params(c);
    p.e = 1.0;
    let bounds = CoefficientBounds::constant(a, b);
    let rep = check_li_yau(&ev, &p, &bounds, 1e-9, &ScanOptions { region: vec![true; grid.len()], frame_stride: 1 }, &[]).unwrap();
    for r in &rep.records {
        let lhs = r.t * ((p.a_const + a) * 0.0 + 2.0 * (p.e + b));
        assert!((r.lhs - lhs).abs() < 1e-12);
        assert!(r.margin > 0.0);
    }
}

#[test]
fn harnack_degenerate_pair_and_applicability() {
    let u = gaussian(17, 0.01);
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: 0.0 };
    let p = params(u.max_abs());
    let pair = HarnackPair { x1: 100, k1: 10, x2: 100, k2: 10 };
    let (rep, _) = check_harnack(&ev, &p, &[pair], 1e-12, &PathOptions::default()).unwrap();
    assert!(rep.min_margin.abs() < 1e-15 && rep.pass);
    let with_a = PdeCoefficients::constant(0.1, 0.0);
    let bad = Evolution { coeffs: &with_a, ..ev };
    assert!(matches!(check_harnack(&bad, &p, &[pair], 0.0, &PathOptions::default()), Err(FinslerError::NotApplicable(_))));
}

#[test]
fn harnack_holds_on_heat_kernel_pairs() {
    let u = gaussian(33, 0.004);
    let coeffs = PdeCoefficients::zero();
    let m = MetricSpec::euclidean(2);
    let ev = Evolution { metric: &m, measure: &MeasureSpec::Lebesgue, coeffs: &coeffs, u: &u, origin: 0.0 };
    let p = params(u.max_abs());
    let opts = ball(&u.grid, 2.0);
    let pairs = sample_harnack_pairs(&ev, &opts.region, 10, 7).unwrap();
    for q in &pairs {
        assert!((ev.t(q.k2) - 2.0 * ev.t(q.k1)).abs() < 1e-9);
    }
    let (rep, paths) = check_harnack(&ev, &p, &pairs, 1e-6, &PathOptions::default()).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(rep.min_margin > 0.0);
    assert_eq!(paths.len(), 10);
    assert!(harnack_t(&p) >= 0.0);
    assert!(harnack_monotone_in_t1(&ev, &p, pairs[0].x1, u.n_times() - 1));
}

#[test]
fn apriori_bound_for_constant_potentials() {
    let grid = GridChart::uniform(2, 0.0, PI, 17).unwrap();
    let m = MetricSpec::euclidean(2);
    for c in [0.0f64, 0.4, -0.3] {
        let coeffs = PdeCoefficients::constant(2.0, c);
        let sol =
            solve_stationary(&m, &MeasureSpec::Lebesgue, &coeffs, &grid, &vec![1.0; grid.len()], &Boundary::Reflecting, 1e-10, 50).unwrap();
        let rep = check_apriori(&m, &MeasureSpec::Lebesgue, &Expr::constant(c), 2.0, &grid, &sol, 2).unwrap();
        assert!((rep.values["log_bound"] - (4.0 + 2.0 * c.abs())).abs() < 1e-12);
        assert_eq!(rep.status, Status::Pass);
        assert!(rep.min_margin > 0.0);
    }
}

#[test]
fn apriori_bound_for_cosine_potential() {
    let grid = GridChart::uniform(2, 0.0, PI, 33).unwrap();
    let m = MetricSpec::euclidean(2);
    let coeffs = PdeCoefficients::new("2", "0.1*cos(x1)").unwrap();
    let init: Vec<f64> = grid.points().iter().map(|x| (-0.05 * x[0].cos()).exp()).collect();
    let sol = solve_stationary(&m, &MeasureSpec::Lebesgue, &coeffs, &grid, &init, &Boundary::Reflecting, 1e-10, 50).unwrap();
    let rep = check_apriori(&m, &MeasureSpec::Lebesgue, &coeffs.b, 2.0, &grid, &sol, 2).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!((rep.values["sup_abs_v"] - 0.1).abs() < 0.01);
    let mut unconverged = sol.clone();
    unconverged.converged = false;
    let rep = check_apriori(&m, &MeasureSpec::Lebesgue, &coeffs.b, 2.0, &grid, &unconverged, 2).unwrap();
    assert_eq!(rep.status, Status::Inconclusive);
}
