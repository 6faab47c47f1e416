//! Dual numbers for forward-mode automatic differentiation.
//!
//! A [`Dual`] carries a value together with its derivative with respect to a
//! single active parameter. Composing the four arithmetic rules on a seeded
//! dual yields exact derivatives of any rational expression, which is all the
//! basis code needs.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{FemError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub val: f64,
    pub der: f64,
}

impl Dual {
    pub const fn new(val: f64, der: f64) -> Self {
        Self { val, der }
    }

    /// A constant: derivative zero.
    pub const fn constant(val: f64) -> Self {
        Self { val, der: 0.0 }
    }

    /// The active variable `x + ε`.
    pub const fn seed(x: f64) -> Self {
        Self { val: x, der: 1.0 }
    }

    /// Quotient rule. Fails when the divisor has zero value.
    pub fn checked_div(self, rhs: Dual) -> Result<Dual> {
        if rhs.val == 0.0 {
            return Err(FemError::DivisionByZeroDual);
        }
        Ok(Dual {
            val: self.val / rhs.val,
            der: self.der / rhs.val - self.val * rhs.der / (rhs.val * rhs.val),
        })
    }

    /// Multiplicative inverse `(1/x, -x'/x²)`.
    pub fn recip(self) -> Result<Dual> {
        Dual::constant(1.0).checked_div(self)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(self, n: u32) -> Dual {
        let mut acc = Dual::constant(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    pub fn scale(self, s: f64) -> Dual {
        Dual::new(self.val * s, self.der * s)
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.val + rhs.val, self.der + rhs.der)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.val - rhs.val, self.der - rhs.der)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.val * rhs.val, self.val * rhs.der + self.der * rhs.val)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.val, -self.der)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

/// Free-function forms of the four rules.
pub fn add(a: Dual, b: Dual) -> Dual {
    a + b
}

pub fn sub(a: Dual, b: Dual) -> Dual {
    a - b
}

pub fn mul(a: Dual, b: Dual) -> Dual {
    a * b
}

pub fn div(a: Dual, b: Dual) -> Result<Dual> {
    a.checked_div(b)
}

pub fn seed(x: f64) -> Dual {
    Dual::seed(x)
}
