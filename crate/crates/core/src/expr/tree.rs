use num_traits::{Signed, ToPrimitive};

use super::{Expr, FnApp, JetVar, MultiIndex};
use crate::error::{Error, Result};
use crate::jet::{total_derivative_multi, JetSpace};
use crate::Rational;

/// Upper bound on the number of terms normalization will produce.
pub const MAX_TERMS: usize = 100_000;

const MAX_EXPONENT: u64 = 64;

/// Unnormalized expression tree, as produced by the problem parser.
#[derive(Clone, Debug, PartialEq)]
pub enum ExprTree {
    Const(Rational),
    Param(String),
    Base(usize),
    Jet(JetVar),
    Func {
        name: String,
        args: Vec<ExprTree>,
        deriv: Vec<u32>,
    },
    Add(Vec<ExprTree>),
    Sub(Box<ExprTree>, Box<ExprTree>),
    Mul(Vec<ExprTree>),
    Div(Box<ExprTree>, Box<ExprTree>),
    Neg(Box<ExprTree>),
    Pow(Box<ExprTree>, Box<ExprTree>),
    Exp(Box<ExprTree>),
    Sin(Box<ExprTree>),
    Cos(Box<ExprTree>),
    /// Total derivative `D_I` of the inner expression.
    Total(Box<ExprTree>, MultiIndex),
}

fn checked_mul(a: &Expr, b: &Expr) -> Result<Expr> {
    if a.len().saturating_mul(b.len()) > 4 * MAX_TERMS {
        return Err(Error::TermLimit(MAX_TERMS));
    }
    let p = a * b;
    if p.len() > MAX_TERMS {
        return Err(Error::TermLimit(MAX_TERMS));
    }
    Ok(p)
}

/// Converts a tree into canonical form.
pub fn normalize(tree: &ExprTree, space: &JetSpace) -> Result<Expr> {
    Ok(match tree {
        ExprTree::Const(c) => Expr::constant(c.clone()),
        ExprTree::Param(p) => Expr::param(p),
        ExprTree::Base(i) => Expr::base(*i),
        ExprTree::Jet(j) => {
            space.check_order(j.order())?;
            Expr::jet_var(j.clone())
        }
        ExprTree::Func { name, args, deriv } => {
            let args = args
                .iter()
                .map(|a| normalize(a, space))
                .collect::<Result<Vec<_>>>()?;
            if deriv.len() != args.len() {
                return Err(Error::InvalidArgument(format!(
                    "derivative record of {name} has {} slots for {} arguments",
                    deriv.len(),
                    args.len()
                )));
            }
            Expr::func(FnApp {
                name: name.as_str().into(),
                args,
                deriv: deriv.clone(),
            })
        }
        ExprTree::Add(items) => {
            let mut acc = Expr::zero();
            for it in items {
                acc += &normalize(it, space)?;
                if acc.len() > MAX_TERMS {
                    return Err(Error::TermLimit(MAX_TERMS));
                }
            }
            acc
        }
        ExprTree::Sub(a, b) => &normalize(a, space)? - &normalize(b, space)?,
        ExprTree::Mul(items) => {
            let mut acc = Expr::one();
            for it in items {
                acc = checked_mul(&acc, &normalize(it, space)?)?;
            }
            acc
        }
        ExprTree::Div(a, b) => {
            let num = normalize(a, space)?;
            let den = normalize(b, space)?;
            checked_mul(&num, &den.inverse()?)?
        }
        ExprTree::Neg(a) => -&normalize(a, space)?,
        ExprTree::Pow(a, n) => {
            let base = normalize(a, space)?;
            let exponent = normalize(n, space)?;
            let k = exponent
                .as_constant()
                .filter(|c| c.is_integer())
                .ok_or_else(|| Error::NonIntegerExponent(format!("{exponent:?}")))?;
            if k.abs() > Rational::from_integer(MAX_EXPONENT.into()) {
                return Err(Error::NonIntegerExponent(format!("{k} is out of range")));
            }
            let k = k.to_integer().to_i32().unwrap_or(0);
            if k < 0 {
                base.inverse()?.pow(-k)?
            } else {
                let mut acc = Expr::one();
                for _ in 0..k {
                    acc = checked_mul(&acc, &base)?;
                }
                acc
            }
        }
        ExprTree::Exp(a) => Expr::exp(normalize(a, space)?),
        ExprTree::Sin(a) => Expr::sin(normalize(a, space)?),
        ExprTree::Cos(a) => Expr::cos(normalize(a, space)?),
        ExprTree::Total(a, index) => total_derivative_multi(space, &normalize(a, space)?, index)?,
    })
}
