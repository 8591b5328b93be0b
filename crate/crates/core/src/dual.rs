//! Forward-mode dual numbers.
//!
//! [`Dual<T>`] carries a value and one directional derivative. Because
//! `Dual<T>` is itself a [`Real`] whenever `T` is, nesting gives exact
//! higher-order mixed derivatives: `Dual<Dual<f64>>` yields second
//! derivatives, and so on. Every metric formula in this crate is written
//! once, generically over `Real`, and differentiated by lifting.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar type usable by all generic formulas.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    /// Innermost real value, with every derivative part dropped.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn atan(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, k: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn powf(self, p: Self) -> Self {
        (p * self.ln()).exp()
    }
    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn powf(self, p: Self) -> Self {
        f64::powf(self, p)
    }
}

/// `v + d·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Real> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Dual { v, d }
    }

    /// Constant lift (zero derivative part).
    pub fn lift(v: T) -> Self {
        Dual { v, d: T::zero() }
    }

    /// Chain rule helper: `f(v)` with derivative `f'(v)`.
    fn chain(self, f: T, df: T) -> Self {
        Dual { v: f, d: df * self.d }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.v;
        let v = self.v * inv;
        Dual { v, d: (self.d - v * o.d) * inv }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { v: -self.v, d: -self.d }
    }
}

impl<T: Real> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> Real for Dual<T> {
    fn cst(v: f64) -> Self {
        Dual::lift(T::cst(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, T::cst(0.5) / s)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), T::one() / self.v)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        self.chain(t, T::one() + t * t)
    }
    fn sinh(self) -> Self {
        self.chain(self.v.sinh(), self.v.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.v.cosh(), self.v.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, T::one() - t * t)
    }
    fn atan(self) -> Self {
        self.chain(self.v.atan(), T::one() / (T::one() + self.v * self.v))
    }
    fn abs(self) -> Self {
        if self.v.re() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::one();
        }
        let p = self.v.powi(k - 1);
        self.chain(p * self.v, p.scale(k as f64))
    }
}

/// Lift every entry to a constant dual.
pub fn lift<T: Real>(v: &[T]) -> Vec<Dual<T>> {
    v.iter().map(|&a| Dual::lift(a)).collect()
}

/// Lift with the derivative part seeded along `dir`.
pub fn lift_dir<T: Real>(v: &[T], dir: &[T]) -> Vec<Dual<T>> {
    v.iter().zip(dir).map(|(&a, &d)| Dual::new(a, d)).collect()
}

/// Lift with the derivative part seeded on coordinate `k`.
pub fn lift_axis<T: Real>(v: &[T], k: usize) -> Vec<Dual<T>> {
    v.iter().enumerate().map(|(i, &a)| Dual::new(a, if i == k { T::one() } else { T::zero() })).collect()
}

pub fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(Real::re).collect()
}

pub fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::cst(a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly<T: Real>(x: T) -> T {
        x * x * x + x.sin() * x.exp()
    }

    #[test]
    fn first_and_second_derivatives() {
        let x0 = 0.7_f64;
        let d1 = poly(Dual::new(x0, 1.0)).d;
        let exact1 = 3.0 * x0 * x0 + x0.cos() * x0.exp() + x0.sin() * x0.exp();
        assert!((d1 - exact1).abs() < 1e-14);

        let xx = Dual::new(Dual::new(x0, 1.0), Dual::new(1.0, 0.0));
        let d2 = poly(xx).d.d;
        let exact2 = 6.0 * x0 + 2.0 * x0.cos() * x0.exp();
        assert!((d2 - exact2).abs() < 1e-13);
    }

    #[test]
    fn powi_and_division() {
        let x = Dual::new(2.0, 1.0);
        assert_eq!(x.powi(3).d, 12.0);
        let q = Dual::<f64>::one() / x;
        assert!((q.d + 0.25).abs() < 1e-15);
        assert_eq!(x.powi(0).v, 1.0);
    }
}
