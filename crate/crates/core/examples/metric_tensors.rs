//! Fundamental tensor, Cartan tensor and Legendre transform of a Randers
//! metric at one tangent vector.

use finsler_core::metric::{
    cartan_tensor, dual_norm, fundamental_tensor, legendre, legendre_inv, misalignment, CoordBox, MetricSpec, TangentSample,
};

fn main() -> finsler_core::Result<()> {
    let m = MetricSpec::randers(&[&["1 + 0.2*x1^2", "0"], &["0", "1"]], &["0.3", "0.1*x2"])?;
    let s = TangentSample::new(&[0.5, -0.2], &[1.0, 0.4]);
    println!("F       = {:.6}", m.norm(&s.x, &s.y));
    let g = fundamental_tensor(&m, &s)?;
    println!("g_ij    = [[{:.6}, {:.6}], [{:.6}, {:.6}]]", g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1));
    let c = cartan_tensor(&m, &s)?;
    println!("C_111   = {:.6}", c.get(0, 0, 0));
    let xi = legendre(&m, &s)?;
    println!("L(y)    = ({:.6}, {:.6})", xi[0], xi[1]);
    let back = legendre_inv(&m, &s.x, &xi)?;
    println!("L^-1    = ({:.6}, {:.6})", back[0], back[1]);
    println!("F*(L(y)) = {:.6}", dual_norm(&m, &s.x, &xi)?);
    let region = CoordBox::new(&[-1.0, -1.0], &[1.0, 1.0]);
    println!("alpha on [-1,1]^2 = {:.6}", misalignment(&m, &region, 32)?);
    Ok(())
}
