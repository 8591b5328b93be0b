//! Finsler gradient, Laplacian and linearized Laplacian of a sampled field
//! on a Randers plane with the Busemann-Hausdorff measure.

use finsler_core::geometry::MeasureSpec;
use finsler_core::grid::GridChart;
use finsler_core::metric::{dual_norm, MetricSpec};
use finsler_core::operators::{finsler_laplacian_with, gradient_field, linearized_laplacian_field};

fn main() -> finsler_core::Result<()> {
    let m = MetricSpec::randers(&[&["1 + 0.2*x1^2", "0"], &["0", "1"]], &["0.3*sin(x2)", "0.2*x1"])?;
    let mu = MeasureSpec::BusemannHausdorff;
    let grid = GridChart::uniform(2, -1.0, 1.0, 41)?;
    let u: Vec<f64> = grid.points().iter().map(|x| (x[0] + 0.3 * x[1]).exp()).collect();
    let gf = gradient_field(&m, &grid, &u, 2)?;
    let lap = finsler_laplacian_with(&m, &mu, &grid, &gf, &u, 2)?;
    let lin = linearized_laplacian_field(&m, &mu, &grid, &gf, &u, 2)?;
    let node = grid.nearest_node(&[0.25, -0.5]);
    let x = grid.point(node);
    println!("x              = ({:.3}, {:.3})", x[0], x[1]);
    println!("grad u         = ({:.6}, {:.6})", gf.vecs[node][0], gf.vecs[node][1]);
    println!("F(grad u)      = {:.10}", m.norm(&x, &gf.vecs[node]));
    println!("F*(du)         = {:.10}", dual_norm(&m, &x, &gf.differentials[node])?);
    println!("Laplacian      = {:.8}", lap[node]);
    println!("linearized     = {:.8}", lin[node]);
    println!("critical nodes = {}", gf.critical_count());
    Ok(())
}
