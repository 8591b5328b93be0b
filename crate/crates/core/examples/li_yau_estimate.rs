//! Evolution inequality and Li-Yau bound for the heat kernel, checked on a
//! geodesic ball around the origin.

use finsler_core::expr::Expr;
use finsler_core::geodesics::PathOptions;
use finsler_core::geometry::MeasureSpec;
use finsler_core::grid::{GridChart, ScalarFieldT};
use finsler_core::harness::{ball_mask, check_evolution_inequality, check_li_yau, harnack_t, EstimateParams, Evolution, ScanOptions};
use finsler_core::metric::MetricSpec;
use finsler_core::pde::{solve_log_schrodinger, Boundary, CoefficientBounds, PdeCoefficients, Scheme, SolveConfig};

fn kernel(x: &[f64], t: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).recip() * (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)).exp()
}

fn main() -> finsler_core::Result<()> {
    let m = MetricSpec::euclidean(2);
    let mu = MeasureSpec::Lebesgue;
    let coeffs = PdeCoefficients::zero();
    let grid = GridChart::uniform(2, -4.0, 4.0, 33)?;
    let u0 = ScalarFieldT::sample(&grid, kernel, 0.5, 0.004, 1, 2)?;
    let bc = Boundary::DirichletExact { value: Expr::parse("(4*pi*t)^(-1) * exp(-(x1^2 + x2^2)/(4*t))")? };
    let u = solve_log_schrodinger(&m, &mu, &coeffs, &u0, &SolveConfig::new(0.004, 0.5, Scheme::SemiImplicit, bc))?.series;

    // time is measured from the kernel's singular time
    let ev = Evolution { metric: &m, measure: &mu, coeffs: &coeffs, u: &u, origin: 0.0 };
    let p = EstimateParams {
        n_eff: 2.0,
        k: 0.0,
        k2r: 0.0,
        k0: 0.0,
        a_const: 0.5,
        d: u.max_abs(),
        e: 0.0,
        c1: 2.0,
        c2: 10.0,
        r: 1.5,
        c_n_alpha: 2.0,
        c0: 0.0,
        alpha: 1.0,
        b_override: None,
    };
    let mask = ball_mask(&m, &grid, &[0.0, 0.0], p.r, &PathOptions::default())?;
    let opts = ScanOptions::interior(&grid).restricted(&mask);
    let evo = check_evolution_inequality(&ev, &p, 1e-6, &opts)?;
    println!("{}", evo.summary_line());
    let ly = check_li_yau(&ev, &p, &CoefficientBounds::constant(0.0, 0.0), 1e-6, &opts, &[])?;
    println!("{}", ly.summary_line());
    println!("B = {:.4}, Harnack exponent T = {:.4}", p.b(), harnack_t(&p));
    Ok(())
}
