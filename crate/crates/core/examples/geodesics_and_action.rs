//! Geodesic shooting, forward distances and the Harnack path action on a
//! Randers plane.

use finsler_core::geodesics::{forward_distance, integrate_geodesic, path_action_with, PathOptions};
use finsler_core::metric::MetricSpec;

fn main() -> finsler_core::Result<()> {
    let m = MetricSpec::randers(&[&["1 + 0.2*x1^2", "0.1*x2"], &["0.1*x2", "1 + 0.1*sin(x1)"]], &["0.3*sin(x2)", "0.2*x1"])?;
    let path = integrate_geodesic(&m, &[0.1, -0.2], &[0.6, 0.3], 10.0, 0.01)?;
    let end = &path.points.last().expect("non-empty path").x;
    println!("geodesic end ({:.5}, {:.5}), speed drift {:.2e}", end[0], end[1], path.speed_drift(&m));

    let flat = MetricSpec::randers_flat(&[0.5, 0.0]);
    println!("d(0, e1) = {:.6}", forward_distance(&flat, &[0.0, 0.0], &[1.0, 0.0], 8)?);
    println!("d(e1, 0) = {:.6}", forward_distance(&flat, &[1.0, 0.0], &[0.0, 0.0], 8)?);

    let (a, b) = ([0.6, -0.3], [-0.5, 0.4]);
    let there = forward_distance(&m, &a, &b, 8)?;
    let back = forward_distance(&m, &b, &a, 8)?;
    println!("curved: d(a, b) = {there:.6}, d(b, a) = {back:.6}");
    let (s, opt) = path_action_with(&m, &a, &b, 0.8, &PathOptions::default())?;
    println!("action S = {s:.6}, d^2/(2 tau) = {:.6}, converged {}", there * there / 1.6, opt.converged);
    print!("{}", opt.to_csv());
    Ok(())
}
