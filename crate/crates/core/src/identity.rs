//! Randomized zero testing by evaluation at seeded random points.
//!
//! Canonical forms decide equality on their own; these checks corroborate
//! that independently.

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::{Atom, Expr};
use crate::Rational;

/// Relative tolerance for floating-point corroboration.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// Assigns an independent random rational to every opaque atom (base and jet
/// variables, parameters, unknown-function applications) on first use.
pub struct RandomPoint {
    rng: RefCell<ChaCha8Rng>,
    values: RefCell<BTreeMap<Atom, Rational>>,
}

impl RandomPoint {
    pub fn new(seed: u64) -> Self {
        RandomPoint {
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
            values: RefCell::default(),
        }
    }

    /// Pin the value of an atom.
    pub fn set(&self, atom: Atom, value: Rational) {
        self.values.borrow_mut().insert(atom, value);
    }

    pub fn value(&self, atom: &Atom) -> Rational {
        if let Some(v) = self.values.borrow().get(atom) {
            return v.clone();
        }
        let v = {
            let mut rng = self.rng.borrow_mut();
            let mut n: i64 = rng.gen_range(-9..=9);
            if n == 0 {
                n = 1;
            }
            let d: i64 = rng.gen_range(1..=7);
            Rational::new(BigInt::from(n), BigInt::from(d))
        };
        self.values.borrow_mut().insert(atom.clone(), v.clone());
        v
    }

    pub fn eval_exact(&self, e: &Expr) -> Result<Rational> {
        e.eval::<Rational>(&|a| Some(self.value(a)))
    }

    pub fn eval_float(&self, e: &Expr) -> Result<f64> {
        e.eval::<f64>(&|a| self.value(a).to_f64())
    }
}

/// Magnitude scale for relative comparison: evaluates `e` with every
/// coefficient replaced by its absolute value.
fn float_scale(e: &Expr, p: &RandomPoint) -> f64 {
    e.terms()
        .map(|(m, c)| {
            let t = Expr::term(num_traits::Signed::abs(c), m.clone());
            p.eval_float(&t).map(f64::abs).unwrap_or(f64::INFINITY)
        })
        .sum::<f64>()
        .max(1.0)
}

/// Whether `e` evaluates to zero at `samples` random points. Exact when no
/// transcendental atom occurs, relative tolerance [`FLOAT_TOLERANCE`]
/// otherwise.
pub fn vanishes_at_random_points(e: &Expr, samples: usize, seed: u64) -> bool {
    (0..samples as u64).all(|k| {
        let p = RandomPoint::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k));
        vanishes_at(e, &p)
    })
}

pub fn vanishes_at(e: &Expr, p: &RandomPoint) -> bool {
    if !e.has_transcendental() {
        if let Ok(v) = p.eval_exact(e) {
            return v.is_zero();
        }
        // a random point hit a pole of a parameter inverse
        return true;
    }
    match p.eval_float(e) {
        Ok(v) => v.abs() <= FLOAT_TOLERANCE * float_scale(e, p),
        Err(_) => true,
    }
}

/// Whether `a` and `b` agree at `samples` random points.
pub fn agree_at_random_points(a: &Expr, b: &Expr, samples: usize, seed: u64) -> bool {
    vanishes_at_random_points(&(a - b), samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::MultiIndex;

    #[test]
    fn detects_zero_and_nonzero() {
        let u = Expr::field(0);
        let ut = Expr::jet(0, MultiIndex::unit(0));
        let utt = Expr::jet(0, MultiIndex::from_counts(&[2]));
        let z = &(&(&utt + &u) * &u) - &(&(&u * &utt) + &u.pow(2).unwrap());
        assert!(vanishes_at_random_points(&z, 20, 1));
        assert!(!vanishes_at_random_points(
            &(&ut - &Expr::jet(0, MultiIndex::unit(1))),
            20,
            1
        ));
        let e = Expr::exp(&Expr::param("b") * &Expr::base(0));
        assert!(!vanishes_at_random_points(&e, 5, 2));
        assert!(vanishes_at_random_points(&(&e - &e), 5, 2));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = RandomPoint::new(7);
        let b = RandomPoint::new(7);
        let x = Atom::Base(0);
        assert_eq!(a.value(&x), b.value(&x));
        assert_eq!(a.value(&x), a.value(&x));
    }
}
