//! Tensor-product coordinate grids, finite-difference stencils and sampled
//! space-time scalar fields.

use crate::error::{FinslerError, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Uniform tensor grid on a coordinate box. Node `(i₀, i₁, …)` has linear
/// index `i₀ + c₀(i₁ + c₁(i₂ + …))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridChart {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
    /// Width in cells of the layer excluded from verification scans.
    #[serde(default = "default_layer")]
    pub boundary_layer: usize,
}

fn default_layer() -> usize {
    2
}

impl GridChart {
    pub fn new(lo: &[f64], hi: &[f64], counts: &[usize], boundary_layer: usize) -> Result<Self> {
        let g = GridChart { lo: lo.to_vec(), hi: hi.to_vec(), counts: counts.to_vec(), boundary_layer };
        g.validate()?;
        Ok(g)
    }

    /// Square/cubic grid with `count` points per axis on `[lo, hi]ⁿ`.
    pub fn uniform(n: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(&vec![lo; n], &vec![hi; n], &vec![count; n], default_layer())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lo.len();
        if n == 0 || self.hi.len() != n || self.counts.len() != n {
            return Err(FinslerError::Config("grid lo/hi/counts must have equal nonzero length".into()));
        }
        for d in 0..n {
            if !(self.hi[d] > self.lo[d]) {
                return Err(FinslerError::Config(format!("grid axis {d}: hi must exceed lo")));
            }
            if self.counts[d] < 5 {
                return Err(FinslerError::Config(format!("grid axis {d}: at least 5 points required")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn h(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / (self.counts[d] - 1) as f64
    }

    #[inline]
    pub fn stride(&self, d: usize) -> usize {
        self.counts[..d].iter().product()
    }

    #[inline]
    pub fn axis_index(&self, lin: usize, d: usize) -> usize {
        (lin / self.stride(d)) % self.counts[d]
    }

    pub fn multi_index(&self, lin: usize) -> Vec<usize> {
        (0..self.dim()).map(|d| self.axis_index(lin, d)).collect()
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().enumerate().map(|(d, &i)| i * self.stride(d)).sum()
    }

    pub fn point(&self, lin: usize) -> Vec<f64> {
        (0..self.dim()).map(|d| self.lo[d] + self.axis_index(lin, d) as f64 * self.h(d)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|l| self.point(l)).collect()
    }

    /// Distance in cells to the nearest boundary face.
    pub fn depth(&self, lin: usize) -> usize {
        (0..self.dim())
            .map(|d| {
                let i = self.axis_index(lin, d);
                i.min(self.counts[d] - 1 - i)
            })
            .min()
            .unwrap_or(0)
    }

    pub fn on_boundary(&self, lin: usize) -> bool {
        self.depth(lin) == 0
    }

    /// Outside the excluded boundary layer.
    pub fn is_interior(&self, lin: usize) -> bool {
        self.depth(lin) >= self.boundary_layer.max(1)
    }

    /// Node nearest to `x`, if `x` lies on a node within `1e-9·h`.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let s = (x[d] - self.lo[d]) / self.h(d);
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.counts[d] {
                return None;
            }
            idx.push(r as usize);
        }
        Some(self.linear(&idx))
    }

    /// Nearest node to `x` (clamped into the grid).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|d| {
                let s = ((x[d] - self.lo[d]) / self.h(d)).round().max(0.0);
                (s as usize).min(self.counts[d] - 1)
            })
            .collect();
        self.linear(&idx)
    }

    /// Refined grid with `2ᵏ(c−1)+1` points per axis; old nodes are kept.
    pub fn refine(&self, k: u32) -> GridChart {
        let f = 1usize << k;
        GridChart {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            counts: self.counts.iter().map(|c| f * (c - 1) + 1).collect(),
            boundary_layer: self.boundary_layer * f,
        }
    }

    /// Every other node along each axis; the counts must be odd.
    pub fn coarsen(&self) -> Result<GridChart> {
        if self.counts.iter().any(|c| c % 2 == 0 || *c < 5) {
            return Err(FinslerError::Config(format!("cannot coarsen counts {:?}: need odd counts of at least 5", self.counts)));
        }
        Ok(GridChart {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            counts: self.counts.iter().map(|c| (c - 1) / 2 + 1).collect(),
            boundary_layer: self.boundary_layer.div_ceil(2).max(1),
        })
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.h(d)).product()
    }

    /// `∂/∂x_d` at a node by central differences of the given order, falling
    /// back to second-order one-sided stencils near the boundary.
    pub fn d1<F: Fn(usize) -> f64>(&self, f: F, lin: usize, d: usize, order: usize) -> f64 {
        let i = self.axis_index(lin, d);
        let c = self.counts[d];
        let s = self.stride(d);
        let h = self.h(d);
        if order >= 4 && i >= 2 && i + 2 < c {
            return (-f(lin + 2 * s) + 8.0 * f(lin + s) - 8.0 * f(lin - s) + f(lin - 2 * s)) / (12.0 * h);
        }
        if i >= 1 && i + 1 < c {
            return (f(lin + s) - f(lin - s)) / (2.0 * h);
        }
        if i == 0 {
            (-3.0 * f(lin) + 4.0 * f(lin + s) - f(lin + 2 * s)) / (2.0 * h)
        } else {
            (3.0 * f(lin) - 4.0 * f(lin - s) + f(lin - 2 * s)) / (2.0 * h)
        }
    }

    /// `∂²/∂x_d²` at a node.
    pub fn d2<F: Fn(usize) -> f64>(&self, f: F, lin: usize, d: usize, order: usize) -> f64 {
        let i = self.axis_index(lin, d);
        let c = self.counts[d];
        let s = self.stride(d);
        let h2 = self.h(d).powi(2);
        if order >= 4 && i >= 2 && i + 2 < c {
            return (-f(lin + 2 * s) + 16.0 * f(lin + s) - 30.0 * f(lin) + 16.0 * f(lin - s) - f(lin - 2 * s)) / (12.0 * h2);
        }
        if i >= 1 && i + 1 < c {
            return (f(lin + s) - 2.0 * f(lin) + f(lin - s)) / h2;
        }
        if i == 0 {
            (2.0 * f(lin) - 5.0 * f(lin + s) + 4.0 * f(lin + 2 * s) - f(lin + 3 * s)) / h2
        } else {
            (2.0 * f(lin) - 5.0 * f(lin - s) + 4.0 * f(lin - 2 * s) - f(lin - 3 * s)) / h2
        }
    }

    /// Stencil differential `(∂₁f, …, ∂ₙf)` of nodal values.
    pub fn gradient(&self, vals: &[f64], lin: usize, order: usize) -> Vec<f64> {
        (0..self.dim()).map(|d| self.d1(|l| vals[l], lin, d, order)).collect()
    }

    /// Stencil matrix of second derivatives (symmetrized).
    pub fn hessian(&self, vals: &[f64], lin: usize, order: usize) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, self.d2(|l| vals[l], lin, i, order));
            for j in i + 1..n {
                let a = self.d1(|p| self.d1(|l| vals[l], p, j, order), lin, i, order);
                let b = self.d1(|p| self.d1(|l| vals[l], p, i, order), lin, j, order);
                let v = 0.5 * (a + b);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    /// Midpoint-rule integral of nodal values over the box (trapezoid weights).
    pub fn integrate(&self, vals: &[f64]) -> f64 {
        let vol = self.cell_volume();
        (0..self.len())
            .map(|l| {
                let w: f64 = (0..self.dim())
                    .map(|d| {
                        let i = self.axis_index(l, d);
                        if i == 0 || i + 1 == self.counts[d] {
                            0.5
                        } else {
                            1.0
                        }
                    })
                    .product();
                w * vals[l]
            })
            .sum::<f64>()
            * vol
    }
}

/// Grid-sampled space-time field: `frames[k][node] = u(x_node, t0 + k·dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldT {
    pub grid: GridChart,
    pub t0: f64,
    pub dt: f64,
    /// Spatial stencil order, 2 or 4.
    pub order: usize,
    pub frames: Vec<Vec<f64>>,
}

impl ScalarFieldT {
    pub fn new(grid: GridChart, t0: f64, dt: f64, order: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if order != 2 && order != 4 {
            return Err(FinslerError::Config(format!("stencil order must be 2 or 4, got {order}")));
        }
        if frames.is_empty() || frames.iter().any(|f| f.len() != grid.len()) {
            return Err(FinslerError::Config("field frames must match the grid size".into()));
        }
        if frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FinslerError::Domain("field contains non-finite values".into()));
        }
        Ok(ScalarFieldT { grid, t0, dt, order, frames })
    }

    /// Sample an expression `u(x, t)` at `count` times `t0 + k·dt`.
    pub fn sample(grid: &GridChart, f: impl Fn(&[f64], f64) -> f64 + Sync, t0: f64, dt: f64, count: usize, order: usize) -> Result<Self> {
        use rayon::prelude::*;
        let pts = grid.points();
        let frames = (0..count)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                pts.par_iter().map(|x| f(x, t)).collect()
            })
            .collect();
        Self::new(grid.clone(), t0, dt, order, frames)
    }

    /// Time-independent field with a single frame.
    pub fn stationary(grid: &GridChart, vals: Vec<f64>, order: usize) -> Result<Self> {
        Self::new(grid.clone(), 0.0, 1.0, order, vec![vals])
    }

    pub fn n_times(&self) -> usize {
        self.frames.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    pub fn last(&self) -> &[f64] {
        self.frames.last().expect("field has at least one frame")
    }

    /// Central time difference at an interior frame, one-sided at the ends.
    pub fn time_derivative(&self, k: usize, lin: usize) -> f64 {
        let m = self.frames.len();
        if m < 2 {
            return 0.0;
        }
        if k == 0 {
            (self.frames[1][lin] - self.frames[0][lin]) / self.dt
        } else if k + 1 == m {
            (self.frames[k][lin] - self.frames[k - 1][lin]) / self.dt
        } else {
            (self.frames[k + 1][lin] - self.frames[k - 1][lin]) / (2.0 * self.dt)
        }
    }

    /// Pointwise map of all frames.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarFieldT {
        ScalarFieldT { frames: self.frames.iter().map(|fr| fr.iter().map(|v| f(*v)).collect()).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.frames.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV rows `x1,…,xn,t,value` for one frame.
    pub fn frame_csv(&self, k: usize) -> String {
        let n = self.grid.dim();
        let mut s = String::new();
        let head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "{},t,value", head.join(","));
        let t = self.time(k);
        for (lin, v) in self.frames[k].iter().enumerate() {
            let x = self.grid.point(lin);
            for c in &x {
                let _ = write!(s, "{c},");
            }
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}
