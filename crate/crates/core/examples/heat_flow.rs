//! Semi-implicit solve of the logarithmic Schrodinger flow with a = b = 0
//! (the heat equation) against the Euclidean heat kernel.

use finsler_core::expr::Expr;
use finsler_core::geometry::MeasureSpec;
use finsler_core::grid::{GridChart, ScalarFieldT};
use finsler_core::metric::MetricSpec;
use finsler_core::pde::{solve_log_schrodinger, Boundary, PdeCoefficients, Scheme, SolveConfig};

fn kernel(x: &[f64], t: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).recip() * (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)).exp()
}

fn main() -> finsler_core::Result<()> {
    let value = Expr::parse("(4*pi*t)^(-1) * exp(-(x1^2 + x2^2)/(4*t))")?;
    for (count, dt) in [(33, 0.004), (65, 0.001)] {
        let grid = GridChart::uniform(2, -4.0, 4.0, count)?;
        let u0 = ScalarFieldT::sample(&grid, kernel, 2.0, dt, 1, 2)?;
        let cfg = SolveConfig::new(dt, 0.5, Scheme::SemiImplicit, Boundary::DirichletExact { value: value.clone() });
        let out = solve_log_schrodinger(&MetricSpec::euclidean(2), &MeasureSpec::Lebesgue, &PdeCoefficients::zero(), &u0, &cfg)?;
        let u = &out.series;
        let k = u.n_times() - 1;
        let err = (0..grid.len())
            .map(|l| {
                let e = kernel(&grid.point(l), u.time(k));
                (u.frame(k)[l] - e).abs() / e
            })
            .fold(0.0, f64::max);
        println!("{count}x{count}, dt {dt}: {k} steps, max relative error {err:.3e}");
    }
    Ok(())
}
