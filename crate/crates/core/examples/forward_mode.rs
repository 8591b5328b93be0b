//! Nested dual numbers: first and second derivatives of a Finsler norm along
//! a direction, compared with central differences.

use finsler_core::dual::{Dual, Real};
use finsler_core::metric::MetricSpec;

fn main() {
    let m = MetricSpec::randers_flat(&[0.4, -0.2]);
    let (x, y, v) = ([0.0, 0.0], [1.0, 0.5], [0.3, 1.0]);
    // F(y + s v) with a second-order jet in s
    let jet: Vec<Dual<Dual<f64>>> = (0..2).map(|i| Dual::new(Dual::new(y[i], v[i]), Dual::new(v[i], 0.0))).collect();
    let xs: Vec<Dual<Dual<f64>>> = x.iter().map(|&c| Dual::<Dual<f64>>::cst(c)).collect();
    let f = m.norm(&xs, &jet);
    let h = 1e-4;
    let at = |s: f64| m.norm(&x, &[y[0] + s * v[0], y[1] + s * v[1]]);
    println!("F          = {:.10}", f.re());
    println!("dF/ds      = {:.10}  fd {:.10}", f.v.d, (at(h) - at(-h)) / (2.0 * h));
    println!("d2F/ds2    = {:.10}  fd {:.10}", f.d.d, (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h));
}
