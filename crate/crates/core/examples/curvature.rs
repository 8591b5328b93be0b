//! Flag curvature of the round sphere chart and weighted Ricci curvature of
//! a Gaussian-weighted Euclidean plane.

use finsler_core::geometry::{distortion_s_curvature, flag_curvature, ricci, weighted_ricci, MeasureSpec};
use finsler_core::metric::{MetricSpec, TangentSample};

fn main() -> finsler_core::Result<()> {
    let sphere = MetricSpec::stereographic_sphere(2);
    let s = TangentSample::new(&[0.4, -0.3], &[1.0, 0.2]);
    println!("sphere K(y, v) = {:.8}", flag_curvature(&sphere, &s, &[0.0, 1.0])?);
    println!("sphere Ric(y)  = {:.8}  F(y)^2 = {:.8}", ricci(&sphere, &s)?, sphere.norm(&s.x, &s.y).powi(2));

    let flat = MetricSpec::euclidean(2);
    let gauss = MeasureSpec::custom("exp(-(x1^2 + x2^2))")?;
    let s = TangentSample::new(&[0.7, 0.1], &[0.6, -0.8]);
    let (tau, sc, sdot) = distortion_s_curvature(&flat, &gauss, &s)?;
    println!("tau = {tau:.6}  S = {sc:.6}  S' = {sdot:.6}");
    for n in [3.0, 10.0, f64::INFINITY] {
        println!("Ric^{n} = {:.6}", weighted_ricci(&flat, &gauss, n, &s)?);
    }

    let randers = MetricSpec::randers(&[&["1 + 0.2*x1^2", "0"], &["0", "1"]], &["0.3*sin(x2)", "0"])?;
    let s = TangentSample::new(&[0.2, 0.5], &[1.0, 0.0]);
    println!("randers Ric^4 with Busemann-Hausdorff measure = {:.6}", weighted_ricci(&randers, &MeasureSpec::BusemannHausdorff, 4.0, &s)?);
    Ok(())
}
