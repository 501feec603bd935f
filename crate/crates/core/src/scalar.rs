//! Numeric scalars that symbolic expressions can be evaluated into.
//!
//! Exact evaluation goes through [`Rational`]; anything involving a
//! transcendental atom needs a floating-point scalar.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{Num, ToPrimitive, Zero};

use crate::Rational;

pub trait Scalar: Clone + Debug + Num + Neg<Output = Self> {
    fn from_rational(r: &Rational) -> Self;

    /// `None` when the value cannot be represented in this scalar type.
    fn exp(&self) -> Option<Self>;
    fn sin(&self) -> Option<Self>;
    fn cos(&self) -> Option<Self>;

    fn powi(&self, n: i32) -> Option<Self> {
        if n < 0 && self.is_zero() {
            return None;
        }
        let mut acc = Self::one();
        for _ in 0..n.unsigned_abs() {
            acc = acc * self.clone();
        }
        if n < 0 {
            Some(Self::one() / acc)
        } else {
            Some(acc)
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_rational(r: &Rational) -> Self {
                r.to_f64().unwrap_or(f64::NAN) as $t
            }
            fn exp(&self) -> Option<Self> {
                Some(<$t>::exp(*self))
            }
            fn sin(&self) -> Option<Self> {
                Some(<$t>::sin(*self))
            }
            fn cos(&self) -> Option<Self> {
                Some(<$t>::cos(*self))
            }
            fn powi(&self, n: i32) -> Option<Self> {
                Some(<$t>::powi(*self, n))
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn exp(&self) -> Option<Self> {
        self.is_zero().then(num_traits::One::one)
    }
    fn sin(&self) -> Option<Self> {
        self.is_zero().then(Zero::zero)
    }
    fn cos(&self) -> Option<Self> {
        self.is_zero().then(num_traits::One::one)
    }
}
