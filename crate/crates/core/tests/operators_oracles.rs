#![allow(clippy::needless_range_loop)]

use finsler_core::geometry::{s_curvature_g, MeasureSpec};
use finsler_core::grid::{GridChart, ScalarFieldT};
use finsler_core::linalg::Mat;
use finsler_core::metric::{dual_norm, legendre_inv, MetricSpec};
use finsler_core::operators::{
    divergence, divergence_field, finsler_laplacian, finsler_laplacian_field, finsler_laplacian_with, gradient, gradient_field,
    hessian_ref, hessian_ref_at, linearized_laplacian, linearized_laplacian_field, reference_norm_sq_field,
};
use proptest::prelude::*;

fn randers_curved() -> MetricSpec {
    MetricSpec::randers(&[&["1 + 0.2*x1^2", "0.1*x2"], &["0.1*x2", "1 + 0.1*sin(x1)"]], &["0.3*sin(x2)", "0.2*x1"]).unwrap()
}

fn riemannian_curved() -> MetricSpec {
    MetricSpec::riemannian(&[&["1 + x1^2", "0.3*x1*x2"], &["0.3*x1*x2", "2 + sin(x2)"]]).unwrap()
}

fn sample(grid: &GridChart, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    grid.points().iter().map(|x| f(x)).collect()
}

/// Nodes inside the box `|x|_∞ ≤ r`, clear of one-sided stencils.
fn inner(grid: &GridChart, r: f64) -> Vec<usize> {
    (0..grid.len()).filter(|&l| grid.depth(l) >= 3 && grid.point(l).iter().all(|c| c.abs() <= r + 1e-12)).collect()
}

fn max_over(nodes: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    nodes.iter().map(|&l| f(l).abs()).fold(0.0, f64::max)
}

/// `max_{F(y)=1} ξ(y)` over a fine circle of directions.
fn sphere_max(metric: &MetricSpec, x: &[f64], xi: &[f64]) -> f64 {
    (0..20_000)
        .map(|k| {
            let th = k as f64 * std::f64::consts::TAU / 20_000.0;
            let y = [th.cos(), th.sin()];
            (xi[0] * y[0] + xi[1] * y[1]) / metric.norm(x, &y)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn euclidean_gradient_of_coordinate() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let gf = gradient_field(&MetricSpec::euclidean(2), &grid, &sample(&grid, |x| x[0]), 2).unwrap();
    for v in &gf.vecs {
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }
}

#[test]
fn flat_field_has_zero_gradient() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let gf = gradient_field(&randers_curved(), &grid, &vec![2.5; grid.len()], 2).unwrap();
    assert_eq!(gf.critical_count(), grid.len());
    assert!(gf.vecs.iter().all(|v| v.iter().all(|c| *c == 0.0)));
}

#[test]
fn randers_gradient_norm_matches_sphere_maximum() {
    let m = MetricSpec::randers_flat(&[0.3, -0.2]);
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let u = ScalarFieldT::sample(&grid, |x, _| x[0] + 2.0 * x[1], 0.0, 1.0, 1, 2).unwrap();
    let lin = grid.nearest_node(&[0.25, -0.5]);
    let x = grid.point(lin);
    let g = gradient(&m, &u, 0, lin).unwrap();
    let oracle = sphere_max(&m, &x, &[1.0, 2.0]);
    assert!((m.norm(&x, &g) - oracle).abs() < 1e-3, "{} vs {oracle}", m.norm(&x, &g));
}

#[test]
fn gradient_norm_is_dual_norm_on_curved_randers() {
    let m = randers_curved();
    let grid = GridChart::uniform(2, -1.0, 1.0, 17).unwrap();
    let vals = sample(&grid, |x| (x[0] + 0.3 * x[1] + 0.2 * x[0] * x[1]).exp());
    let gf = gradient_field(&m, &grid, &vals, 2).unwrap();
    for lin in 0..grid.len() {
        let x = grid.point(lin);
        let want = dual_norm(&m, &x, &gf.differentials[lin]).unwrap();
        assert!((m.norm(&x, &gf.vecs[lin]) - want).abs() < 1e-8);
    }
}

#[test]
fn log_rescaling_keeps_reference_tensor() {
    let m = randers_curved();
    let grid = GridChart::uniform(2, -1.0, 1.0, 17).unwrap();
    let u = sample(&grid, |x| (x[0] + 0.3 * x[1]).exp() + 0.5);
    let gu = gradient_field(&m, &grid, &u, 2).unwrap();
    for lin in 0..grid.len() {
        let x = grid.point(lin);
        // d log(u/D) = du/u
        let df: Vec<f64> = gu.differentials[lin].iter().map(|c| c / u[lin]).collect();
        let gf = legendre_inv(&m, &x, &df).unwrap();
        let (a, b) = (m.fundamental_g(&x, &gu.vecs[lin]), m.fundamental_g(&x, &gf));
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn euclidean_hessian_is_plain_second_derivative() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 11).unwrap();
    let quad = |x: &[f64], _: f64| 1.5 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1] + x[0];
    let u = ScalarFieldT::sample(&grid, quad, 0.0, 1.0, 1, 2).unwrap();
    let h = hessian_ref(&MetricSpec::euclidean(2), &u, &u, 0, grid.nearest_node(&[0.2, 0.4])).unwrap();
    let want = [[3.0, -1.0], [-1.0, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((h.get(i, j) - want[i][j]).abs() < 1e-10);
        }
    }
}

#[test]
fn hessian_is_symmetric_on_randers() {
    let m = randers_curved();
    let grid = GridChart::uniform(2, -1.0, 1.0, 17).unwrap();
    let u = sample(&grid, |x| x[0] + 0.5 * x[1] + 0.3 * x[0] * x[0]);
    let f = sample(&grid, |x| (x[0] * x[1]).sin() + x[1] * x[1]);
    let gf = gradient_field(&m, &grid, &u, 2).unwrap();
    for lin in inner(&grid, 0.8) {
        let h = hessian_ref_at(&m, &grid, &gf, &f, lin, 2).unwrap();
        assert!((h.get(0, 1) - h.get(1, 0)).abs() < 1e-12);
    }
}

#[test]
fn hessian_on_degenerate_reference_is_a_domain_error() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let c = vec![1.0; grid.len()];
    let gf = gradient_field(&randers_curved(), &grid, &c, 2).unwrap();
    assert!(hessian_ref_at(&randers_curved(), &grid, &gf, &c, 40, 2).is_err());
}

/// Levi-Civita symbols `Γ^k_ij` from central differences of `g(x)`.
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
fn riemannian_hessian_matches_christoffel_formula() {
    let m = riemannian_curved();
    let grid = GridChart::uniform(2, -1.0, 1.0, 21).unwrap();
    // quadratics are differentiated exactly by the stencil
    let u = sample(&grid, |x| x[0] - 0.4 * x[1] + 0.1 * x[0] * x[1]);
    let f = sample(&grid, |x| x[0] * x[0] + 0.5 * x[0] * x[1] - 2.0 * x[1] * x[1] + x[1]);
    let gf = gradient_field(&m, &grid, &u, 2).unwrap();
    for lin in inner(&grid, 0.7) {
        let x = grid.point(lin);
        let df = [2.0 * x[0] + 0.5 * x[1], 0.5 * x[0] - 4.0 * x[1] + 1.0];
        let d2 = [[2.0, 0.5], [0.5, -4.0]];
        let gam = christoffel_fd(&m, &x);
        let h = hessian_ref_at(&m, &grid, &gf, &f, lin, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = d2[i][j] - (0..2).map(|k| gam[(k * 2 + i) * 2 + j] * df[k]).sum::<f64>();
                assert!((h.get(i, j) - want).abs() < 1e-5, "{} vs {want}", h.get(i, j));
            }
        }
    }
}

#[test]
fn divergence_of_coordinate_field_is_one() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let e = MetricSpec::euclidean(2);
    let pts = grid.points();
    let v = |l: usize| vec![pts[l][0], 0.0];
    for lin in inner(&grid, 1.0) {
        assert!((divergence(&e, &MeasureSpec::Lebesgue, &grid, &v, lin, 2).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gaussian_density_divergence_of_constant_field() {
    let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
    let e = MetricSpec::euclidean(2);
    let mu = MeasureSpec::custom("exp(-(x1^2 + x2^2))").unwrap();
    let v = vec![vec![1.0, 0.0]; grid.len()];
    let d = divergence_field(&e, &mu, &grid, &v, 2).unwrap();
    for lin in 0..grid.len() {
        assert!((d[lin] + 2.0 * grid.point(lin)[0]).abs() < 1e-9, "{}", d[lin]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn divergence_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u32..100) {
        let grid = GridChart::uniform(2, -1.0, 1.0, 9).unwrap();
        let m = randers_curved();
        let mu = MeasureSpec::BusemannHausdorff;
        let s = seed as f64 * 0.1;
        let v: Vec<Vec<f64>> = grid.points().iter().map(|x| vec![(x[0] + s).sin(), x[0] * x[1]]).collect();
        let w: Vec<Vec<f64>> = grid.points().iter().map(|x| vec![x[1] * x[1], (s * x[0]).cos()]).collect();
        let c: Vec<Vec<f64>> = v.iter().zip(&w).map(|(p, q)| vec![a * p[0] + b * q[0], a * p[1] + b * q[1]]).collect();
        let (dv, dw, dc) = (
            divergence_field(&m, &mu, &grid, &v, 2).unwrap(),
            divergence_field(&m, &mu, &grid, &w, 2).unwrap(),
            divergence_field(&m, &mu, &grid, &c, 2).unwrap(),
        );
        for l in 0..grid.len() {
            prop_assert!((dc[l] - a * dv[l] - b * dw[l]).abs() < 1e-12 * (1.0 + dc[l].abs()) * 10.0);
        }
    }

    #[test]
    fn linearized_laplacian_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = GridChart::uniform(2, -1.0, 1.0, 13).unwrap();
        let m = randers_curved();
        let mu = MeasureSpec::BusemannHausdorff;
        let gf = gradient_field(&m, &grid, &sample(&grid, |x| x[0] + 0.5 * x[1]), 2).unwrap();
        let f = sample(&grid, |x| (x[0] * x[1]).sin());
        let g = sample(&grid, |x| x[0] * x[0] - x[1]);
        let c: Vec<f64> = f.iter().zip(&g).map(|(p, q)| a * p + b * q).collect();
        let lf = linearized_laplacian_field(&m, &mu, &grid, &gf, &f, 2).unwrap();
        let lg = linearized_laplacian_field(&m, &mu, &grid, &gf, &g, 2).unwrap();
        let lc = linearized_laplacian_field(&m, &mu, &grid, &gf, &c, 2).unwrap();
        for l in 0..grid.len() {
            prop_assert!((lc[l] - a * lf[l] - b * lg[l]).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_norm_is_dual_norm(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
        prop_assume!(c0.abs() + c1.abs() > 0.1);
        let m = MetricSpec::randers_flat(&[0.4, 0.2]);
        let grid = GridChart::uniform(2, -1.0, 1.0, 7).unwrap();
        let gf = gradient_field(&m, &grid, &sample(&grid, |x| c0 * x[0] + c1 * x[1]), 2).unwrap();
        let x = grid.point(10);
        prop_assert!((m.norm(&x, &gf.vecs[10]) - dual_norm(&m, &x, &[c0, c1]).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn euclidean_laplacian_of_square_norm() {
    let grid = GridChart::uniform(3, -1.0, 1.0, 7).unwrap();
    let u = ScalarFieldT::sample(&grid, |x, _| x.iter().map(|c| c * c).sum(), 0.0, 1.0, 1, 2).unwrap();
    let e = MetricSpec::euclidean(3);
    for lin in inner(&grid, 1.0) {
        assert!((finsler_laplacian(&e, &MeasureSpec::Lebesgue, &u, 0, lin).unwrap() - 6.0).abs() < 1e-9);
    }
}

/// Largest `|Δu − (tr_{∇u} ∇²u − S(∇u))|` over the inner box.
fn trace_identity_residual(count: usize) -> f64 {
    let m = randers_curved();
    let mu = MeasureSpec::BusemannHausdorff;
    let grid = GridChart::uniform(2, -1.0, 1.0, count).unwrap();
    let u = sample(&grid, |x| (x[0] + 0.3 * x[1] + 0.2 * x[0] * x[1]).exp());
    let gf = gradient_field(&m, &grid, &u, 2).unwrap();
    let lap = finsler_laplacian_with(&m, &mu, &grid, &gf, &u, 2).unwrap();
    max_over(&inner(&grid, 0.5), |l| {
        let x = grid.point(l);
        let h = hessian_ref_at(&m, &grid, &gf, &u, l, 2).unwrap();
        let gi = m.fundamental_g(&x, &gf.vecs[l]).inverse().unwrap();
        let tr: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| gi.get(i, j) * h.get(i, j)).sum();
        let s = s_curvature_g(&m, &mu, &x, &gf.vecs[l]).unwrap();
        lap[l] - (tr - s)
    })
}

#[test]
fn trace_identity_converges_at_second_order() {
    let (coarse, fine) = (trace_identity_residual(21), trace_identity_residual(41));
    let ratio = coarse / fine;
    assert!(coarse < 0.1 && (3.0..5.5).contains(&ratio), "{coarse} {fine} {ratio}");
}

/// `|∫φΔu dμ + ∫dφ(∇u) dμ|` for a bump `φ` supported in the unit disc.
fn weak_form_gap(count: usize) -> f64 {
    let m = randers_curved();
    let mu = MeasureSpec::BusemannHausdorff;
    let grid = GridChart::uniform(2, -1.5, 1.5, count).unwrap();
    let u = sample(&grid, |x| (x[0] + 0.3 * x[1] + 0.2 * x[0] * x[1]).exp());
    let gf = gradient_field(&m, &grid, &u, 2).unwrap();
    let lap = finsler_laplacian_with(&m, &mu, &grid, &gf, &u, 2).unwrap();
    let integrand: Vec<f64> = (0..grid.len())
        .map(|l| {
            let x = grid.point(l);
            let s = 1.0 - x[0] * x[0] - x[1] * x[1];
            if s <= 0.0 {
                return 0.0;
            }
            let phi = s.powi(4);
            let dphi = [-8.0 * x[0] * s.powi(3), -8.0 * x[1] * s.powi(3)];
            let sigma = mu.sigma(&m, &x).unwrap();
            (phi * lap[l] + dphi[0] * gf.vecs[l][0] + dphi[1] * gf.vecs[l][1]) * sigma
        })
        .collect();
    grid.integrate(&integrand).abs()
}

#[test]
fn weak_form_gap_converges_at_second_order() {
    let (coarse, fine) = (weak_form_gap(31), weak_form_gap(61));
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

#[test]
fn linearized_along_itself_is_finsler_laplacian() {
    let m = randers_curved();
    let mu = MeasureSpec::BusemannHausdorff;
    let grid = GridChart::uniform(2, -1.0, 1.0, 17).unwrap();
    let u = ScalarFieldT::sample(&grid, |x, _| (x[0] + 0.3 * x[1]).exp(), 0.0, 1.0, 1, 2).unwrap();
    let gf = gradient_field(&m, &grid, u.frame(0), 2).unwrap();
    let lin = linearized_laplacian_field(&m, &mu, &grid, &gf, u.frame(0), 2).unwrap();
    let lap = finsler_laplacian_with(&m, &mu, &grid, &gf, u.frame(0), 2).unwrap();
    for l in 0..grid.len() {
        assert!((lin[l] - lap[l]).abs() < 1e-10, "{} {}", lin[l], lap[l]);
    }
    let node = grid.nearest_node(&[0.3, -0.2]);
    let a = linearized_laplacian(&m, &mu, &u, &u, 0, node).unwrap();
    assert!((a - finsler_laplacian(&m, &mu, &u, 0, node).unwrap()).abs() < 1e-10);
}

#[test]
fn riemannian_linearized_ignores_reference() {
    let m = riemannian_curved();
    let mu = MeasureSpec::custom("1 + 0.2*x1^2").unwrap();
    let grid = GridChart::uniform(2, -1.0, 1.0, 17).unwrap();
    let f = sample(&grid, |x| (x[0] * x[1]).sin() + x[1]);
    let g1 = gradient_field(&m, &grid, &sample(&grid, |x| x[0] + 0.1 * x[1]), 2).unwrap();
    let g2 = gradient_field(&m, &grid, &sample(&grid, |x| -x[1] + x[0] * x[0]), 2).unwrap();
    let a = linearized_laplacian_field(&m, &mu, &grid, &g1, &f, 2).unwrap();
    let b = linearized_laplacian_field(&m, &mu, &grid, &g2, &f, 2).unwrap();
    let lap = finsler_laplacian_field(&m, &mu, &grid, &f, 2).unwrap();
    for l in inner(&grid, 1.0) {
        assert!((a[l] - b[l]).abs() < 1e-10 && (a[l] - lap[l]).abs() < 1e-9);
    }
}

/// Largest `|Δ^{∇u} e^f − e^f (Δ^{∇u} f + F²_{∇u}(∇f))|` for `f = log u`.
fn exponential_identity_residual(count: usize) -> f64 {
    let m = randers_curved();
    let mu = MeasureSpec::BusemannHausdorff;
    let grid = GridChart::uniform(2, -1.0, 1.0, count).unwrap();
    let u = sample(&grid, |x| 2.0 + (x[0] - 0.5 * x[1]).sin());
    let f: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let gf = gradient_field(&m, &grid, &u, 2).unwrap();
    let lu = linearized_laplacian_field(&m, &mu, &grid, &gf, &u, 2).unwrap();
    let lf = linearized_laplacian_field(&m, &mu, &grid, &gf, &f, 2).unwrap();
    let nsq = reference_norm_sq_field(&m, &grid, &gf, &f, 2).unwrap();
    max_over(&inner(&grid, 0.5), |l| lu[l] - u[l] * (lf[l] + nsq[l]))
}

#[test]
fn exponential_identity_converges_at_second_order() {
    let (coarse, fine) = (exponential_identity_residual(21), exponential_identity_residual(41));
    assert!((3.0..5.5).contains(&(coarse / fine)), "{coarse} {fine}");
}
