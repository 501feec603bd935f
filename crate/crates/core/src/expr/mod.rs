//! Exact symbolic expressions over jet coordinates.
//!
//! An [`Expr`] is always held in canonical form: a fully expanded sum of
//! monomials with exact rational coefficients. Each monomial is a sorted
//! product of [`Atom`]s with nonzero integer exponents, and carries at most
//! one `exp` atom (products of exponentials are merged). Two expressions
//! are equal on the supported function class exactly when they are equal
//! structurally.

mod atom;
pub(crate) mod display;
pub(crate) mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub use atom::{Atom, FnApp, JetVar, MultiIndex, Var};
pub use display::{ExprDisplay, Style};
pub use tree::{normalize, ExprTree, MAX_TERMS};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Rational;

/// Sorted product of atoms with nonzero integer exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Atom, i32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, i32)] {
        &self.0
    }

    pub fn exponent_of(&self, atom: &Atom) -> i32 {
        self.0
            .binary_search_by(|(a, _)| a.cmp(atom))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    fn from_atom_power(atom: Atom, e: i32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(atom, e)])
        }
    }

    /// Splits into the factors satisfying `pred` and the rest.
    pub fn split(&self, pred: impl Fn(&Atom) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(a, _)| pred(a));
        (Monomial(a), Monomial(b))
    }

    pub fn without(&self, atom: &Atom) -> Monomial {
        Monomial(self.0.iter().filter(|(a, _)| a != atom).cloned().collect())
    }

    /// Highest jet order among the top-level jet factors.
    pub fn jet_order(&self) -> Option<u32> {
        self.0
            .iter()
            .filter_map(|(a, _)| match a {
                Atom::Jet(j) => Some(j.order()),
                _ => None,
            })
            .max()
    }

    pub fn jet_degree(&self) -> i32 {
        self.0
            .iter()
            .filter(|(a, _)| matches!(a, Atom::Jet(_)))
            .map(|(_, e)| *e)
            .sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Atom, i32)> = Vec::with_capacity(self.0.len() + other.0.len());
        let mut exp_arg: Option<Expr> = None;
        let mut take_exp = |arg: &Expr| {
            exp_arg = Some(match exp_arg.take() {
                Some(prev) => &prev + arg,
                None => arg.clone(),
            });
        };
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() || j < b.len() {
            let pick = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match pick {
                std::cmp::Ordering::Less => {
                    push_factor(&mut out, &a[i], &mut take_exp);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    push_factor(&mut out, &b[j], &mut take_exp);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if let Atom::Exp(arg) = &a[i].0 {
                        take_exp(arg);
                        take_exp(arg);
                    } else if e != 0 {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        if let Some(arg) = exp_arg {
            if !arg.is_zero() {
                let atom = Atom::Exp(Arc::new(arg));
                let pos = out.partition_point(|(a, _)| *a < atom);
                out.insert(pos, (atom, 1));
            }
        }
        Monomial(out)
    }

    fn pow(&self, n: i32) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len());
        let mut exp_atom = None;
        for (a, e) in &self.0 {
            if let Atom::Exp(arg) = a {
                let scaled = arg.scale(&Rational::from_integer(BigInt::from(n)));
                if !scaled.is_zero() {
                    exp_atom = Some(Atom::Exp(Arc::new(scaled)));
                }
            } else if n != 0 {
                out.push((a.clone(), e * n));
            }
        }
        if let Some(atom) = exp_atom {
            let pos = out.partition_point(|(a, _)| *a < atom);
            out.insert(pos, (atom, 1));
        }
        Monomial(out)
    }

    fn invertible(&self) -> bool {
        self.0
            .iter()
            .all(|(a, _)| matches!(a, Atom::Param(_) | Atom::Exp(_)))
    }
}

fn push_factor(out: &mut Vec<(Atom, i32)>, f: &(Atom, i32), take_exp: &mut impl FnMut(&Expr)) {
    if let Atom::Exp(arg) = &f.0 {
        take_exp(arg);
    } else {
        out.push(f.clone());
    }
}

/// Canonical sum of monomials with rational coefficients.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    terms: BTreeMap<Monomial, Rational>,
}

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn one() -> Self {
        Expr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Expr::term(c, Monomial::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Expr::constant(rational(n, d))
    }

    pub fn term(c: Rational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Expr { terms }
    }

    pub fn monomial(m: Monomial) -> Self {
        Expr::term(Rational::one(), m)
    }

    pub fn atom(a: Atom) -> Self {
        match a {
            Atom::Exp(arg) => Expr::exp((*arg).clone()),
            Atom::Sin(arg) => Expr::sin((*arg).clone()),
            Atom::Cos(arg) => Expr::cos((*arg).clone()),
            other => Expr::monomial(Monomial::from_atom_power(other, 1)),
        }
    }

    pub fn base(i: usize) -> Self {
        Expr::atom(Atom::Base(i))
    }

    pub fn jet(field: usize, index: MultiIndex) -> Self {
        Expr::atom(Atom::Jet(JetVar::new(field, index)))
    }

    pub fn jet_var(j: JetVar) -> Self {
        Expr::atom(Atom::Jet(j))
    }

    pub fn field(field: usize) -> Self {
        Expr::jet(field, MultiIndex::empty())
    }

    pub fn param(name: &str) -> Self {
        Expr::atom(Atom::Param(name.into()))
    }

    pub fn var(v: &Var) -> Self {
        Expr::atom(v.to_atom())
    }

    pub fn func(app: FnApp) -> Self {
        Expr::atom(Atom::Func(app))
    }

    pub fn apply(name: &str, args: Vec<Expr>) -> Self {
        Expr::func(FnApp::new(name, args))
    }

    pub fn exp(arg: Expr) -> Self {
        if arg.is_zero() {
            return Expr::one();
        }
        Expr::monomial(Monomial(vec![(Atom::Exp(Arc::new(arg)), 1)]))
    }

    pub fn sin(arg: Expr) -> Self {
        if arg.is_zero() {
            return Expr::zero();
        }
        Expr::monomial(Monomial(vec![(Atom::Sin(Arc::new(arg)), 1)]))
    }

    pub fn cos(arg: Expr) -> Self {
        if arg.is_zero() {
            return Expr::one();
        }
        Expr::monomial(Monomial(vec![(Atom::Cos(Arc::new(arg)), 1)]))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut e = Expr::zero();
        for (m, c) in terms {
            e.add_term(m, c);
        }
        e
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn single_term(&self) -> Option<(&Monomial, &Rational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// The atom itself when the expression is exactly one atom to the first power.
    pub fn as_atom(&self) -> Option<&Atom> {
        let (m, c) = self.single_term()?;
        match m.factors() {
            [(a, 1)] if c.is_one() => Some(a),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<Var> {
        self.as_atom().and_then(Atom::as_var)
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    fn mul_term(&self, m: &Monomial, c: &Rational) -> Expr {
        let mut out = Expr::zero();
        for (m2, c2) in &self.terms {
            out.add_term(m2.mul(m), c2 * c);
        }
        out
    }

    pub fn pow(&self, n: i32) -> Result<Expr> {
        if n < 0 {
            return self.inverse()?.pow(-n);
        }
        if let Some((m, c)) = self.single_term() {
            let c = num_traits::pow::pow(c.clone(), n as usize);
            return Ok(Expr::term(c, m.pow(n)));
        }
        let mut acc = Expr::one();
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }

    /// Inverse of a single monomial built from nonzero rationals, parameters
    /// and exponentials.
    pub fn inverse(&self) -> Result<Expr> {
        match self.single_term() {
            Some((m, c)) if m.invertible() => Ok(Expr::term(c.recip(), m.pow(-1))),
            _ => Err(Error::NotInvertible(format!("{self:?}"))),
        }
    }

    pub fn div(&self, other: &Expr) -> Result<Expr> {
        Ok(self * &other.inverse()?)
    }

    /// Formal partial derivative; every other coordinate is held fixed and
    /// function symbols are differentiated through their arguments.
    pub fn diff(&self, v: &Var) -> Expr {
        if !self.contains_var(v) {
            return Expr::zero();
        }
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            for (k, (a, e)) in m.0.iter().enumerate() {
                let da = atom_diff(a, v);
                if da.is_zero() {
                    continue;
                }
                let mut rest = m.0.clone();
                if *e == 1 {
                    rest.remove(k);
                } else {
                    rest[k].1 -= 1;
                }
                let coeff = c * integer(*e as i64);
                out += &da.mul_term(&Monomial(rest), &coeff);
            }
        }
        out
    }

    pub fn diff_n(&self, v: &Var, n: u32) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.diff(v))
    }

    /// Calls `f` on every atom, including atoms nested in function
    /// arguments and transcendental arguments.
    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                f(a);
                match a {
                    Atom::Func(app) => app.args.iter().for_each(|e| e.visit_atoms(f)),
                    Atom::Exp(arg) | Atom::Sin(arg) | Atom::Cos(arg) => arg.visit_atoms(f),
                    _ => {}
                }
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            out.insert(a.clone());
        });
        out
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Some(v) = a.as_var() {
                out.insert(v);
            }
        });
        out
    }

    pub fn jet_vars(&self) -> BTreeSet<JetVar> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Jet(j) = a {
                out.insert(j.clone());
            }
        });
        out
    }

    pub fn fn_apps(&self) -> BTreeSet<FnApp> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Func(app) = a {
                out.insert(app.clone());
            }
        });
        out
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        let target = v.to_atom();
        let mut found = false;
        self.visit_atoms(&mut |a| found |= *a == target);
        found
    }

    pub fn mentions_fn(&self, name: &str) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| {
            if let Atom::Func(app) = a {
                found |= &*app.name == name;
            }
        });
        found
    }

    pub fn has_transcendental(&self) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| found |= a.is_transcendental());
        found
    }

    /// Highest jet order anywhere in the expression (0 when jet-free).
    pub fn jet_order(&self) -> u32 {
        self.jet_vars().iter().map(JetVar::order).max().unwrap_or(0)
    }

    pub fn is_jet_free(&self) -> bool {
        self.jet_vars().is_empty()
    }

    /// Rebuilds the expression, replacing atoms for which `f` returns a value.
    /// Atoms that are not replaced have their nested arguments rewritten.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> Option<Expr>) -> Result<Expr> {
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            let mut prod = Expr::constant(c.clone());
            for (a, e) in &m.0 {
                let replaced = match f(a) {
                    Some(r) => r,
                    None => match a {
                        Atom::Func(app) => {
                            let args = app
                                .args
                                .iter()
                                .map(|x| x.map_atoms(f))
                                .collect::<Result<Vec<_>>>()?;
                            Expr::func(FnApp {
                                name: app.name.clone(),
                                args,
                                deriv: app.deriv.clone(),
                            })
                        }
                        Atom::Exp(arg) => Expr::exp(arg.map_atoms(f)?),
                        Atom::Sin(arg) => Expr::sin(arg.map_atoms(f)?),
                        Atom::Cos(arg) => Expr::cos(arg.map_atoms(f)?),
                        other => Expr::atom(other.clone()),
                    },
                };
                prod = &prod * &replaced.pow(*e)?;
                if prod.is_zero() {
                    break;
                }
            }
            out += &prod;
        }
        Ok(out)
    }

    /// Simultaneous substitution of variables.
    pub fn substitute(&self, bindings: &BTreeMap<Var, Expr>) -> Result<Expr> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        self.map_atoms(&mut |a| a.as_var().and_then(|v| bindings.get(&v).cloned()))
    }

    pub fn substitute_one(&self, v: &Var, value: &Expr) -> Result<Expr> {
        let mut b = BTreeMap::new();
        b.insert(v.clone(), value.clone());
        self.substitute(&b)
    }

    /// Replaces every application of the function `name` (and its
    /// derivatives) using `def`.
    pub fn substitute_fn(&self, name: &str, def: &FnDef) -> Result<Expr> {
        if !self.mentions_fn(name) {
            return Ok(self.clone());
        }
        self.map_atoms(&mut |a| match a {
            Atom::Func(app) if &*app.name == name => Some(def.instantiate(app)),
            _ => None,
        })
        .and_then(|e| {
            // nested applications inside the arguments of the instantiated body
            if e.mentions_fn(name) {
                e.substitute_fn(name, def)
            } else {
                Ok(e)
            }
        })
    }

    pub fn eval<S: Scalar>(&self, leaf: &dyn Fn(&Atom) -> Option<S>) -> Result<S> {
        let mut total = S::zero();
        for (m, c) in &self.terms {
            let mut prod = S::from_rational(c);
            for (a, e) in &m.0 {
                let v = match a {
                    Atom::Exp(arg) => arg.eval(leaf)?.exp(),
                    Atom::Sin(arg) => arg.eval(leaf)?.sin(),
                    Atom::Cos(arg) => arg.eval(leaf)?.cos(),
                    other => Some(leaf(other).ok_or_else(|| Error::Unbound(format!("{other:?}")))?),
                }
                .ok_or_else(|| Error::Transcendental(format!("{a:?}")))?;
                prod = prod
                    * v.powi(*e)
                        .ok_or_else(|| Error::NotInvertible(format!("{a:?}")))?;
            }
            total = total + prod;
        }
        Ok(total)
    }

    /// Groups terms by the part of each monomial made of top-level atoms
    /// satisfying `pred`; the values are the remaining cofactors.
    pub fn collect_by(&self, pred: impl Fn(&Atom) -> bool) -> BTreeMap<Monomial, Expr> {
        let mut out: BTreeMap<Monomial, Expr> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (key, rest) = m.split(&pred);
            out.entry(key).or_default().add_term(rest, c.clone());
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    /// Largest monomial in canonical order together with its coefficient.
    pub fn leading_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    /// Scales so the leading coefficient is 1.
    pub fn monic(&self) -> Expr {
        match self.leading_term() {
            Some((_, c)) => self.scale(&c.recip()),
            None => Expr::zero(),
        }
    }

    /// `Some(k)` when `self == k * other` for a rational `k`.
    pub fn rational_multiple_of(&self, other: &Expr) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if other.is_zero() || self.len() != other.len() {
            return None;
        }
        let (m, c) = self.leading_term()?;
        let (m2, c2) = other.leading_term()?;
        if m != m2 {
            return None;
        }
        let k = c / c2;
        (other.scale(&k) == *self).then_some(k)
    }

    pub fn display<'a>(&'a self, names: &'a dyn Names, style: Style) -> ExprDisplay<'a> {
        ExprDisplay::new(self, names, style)
    }
}

/// A function definition `name(params) = body`, used to eliminate unknown
/// function symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FnDef {
    pub params: Vec<Var>,
    pub body: Expr,
}

impl FnDef {
    pub fn constant(body: Expr) -> Self {
        FnDef {
            params: Vec::new(),
            body,
        }
    }

    /// Value of the (possibly differentiated) application `app`.
    pub fn instantiate(&self, app: &FnApp) -> Expr {
        let mut body = self.body.clone();
        for (slot, &n) in app.deriv.iter().enumerate() {
            match self.params.get(slot) {
                Some(p) => body = body.diff_n(p, n),
                None if n > 0 => return Expr::zero(),
                None => {}
            }
        }
        let bindings: BTreeMap<Var, Expr> = self
            .params
            .iter()
            .cloned()
            .zip(app.args.iter().cloned())
            .collect();
        body.substitute(&bindings)
            .expect("substituting variables into a definition only multiplies existing terms")
    }
}

fn atom_diff(a: &Atom, v: &Var) -> Expr {
    match (a, v) {
        (Atom::Param(p), Var::Param(q)) if p == q => Expr::one(),
        (Atom::Base(i), Var::Base(j)) if i == j => Expr::one(),
        (Atom::Jet(x), Var::Jet(y)) if x == y => Expr::one(),
        (Atom::Func(app), _) => {
            let mut out = Expr::zero();
            for (k, arg) in app.args.iter().enumerate() {
                let d = arg.diff(v);
                if !d.is_zero() {
                    out += &(&Expr::func(app.with_slot_derivative(k)) * &d);
                }
            }
            out
        }
        (Atom::Exp(arg), _) => &Expr::exp((**arg).clone()) * &arg.diff(v),
        (Atom::Sin(arg), _) => &Expr::cos((**arg).clone()) * &arg.diff(v),
        (Atom::Cos(arg), _) => -&(&Expr::sin((**arg).clone()) * &arg.diff(v)),
        _ => Expr::zero(),
    }
}

/// Name lookup used when printing expressions.
pub trait Names {
    fn base_name(&self, i: usize) -> String;
    fn field_name(&self, alpha: usize) -> String;
    /// Whether the compact `u_tx` jet notation is unambiguous.
    fn subscript_sugar(&self) -> bool;
}

/// Fallback names `x0, x1, …` and `u0, u1, …`.
pub struct IndexNames;

impl Names for IndexNames {
    fn base_name(&self, i: usize) -> String {
        format!("x{i}")
    }
    fn field_name(&self, alpha: usize) -> String {
        format!("u{alpha}")
    }
    fn subscript_sugar(&self) -> bool {
        false
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&IndexNames, Style::Ascii))
    }
}

impl AddAssign<&Expr> for Expr {
    fn add_assign(&mut self, rhs: &Expr) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl Add<&Expr> for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(mut self, rhs: Expr) -> Expr {
        self += &rhs;
        self
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl Sub<&Expr> for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        &self - &rhs
    }
}

impl Mul<&Expr> for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        let (small, big) = if self.len() <= rhs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = Expr::zero();
        for (m, c) in &small.terms {
            out += &big.mul_term(m, c);
        }
        out
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        &self * &rhs
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Self {
        Expr::constant(r)
    }
}

/// Whether every coefficient is an integer with absolute value at most `bound`.
pub fn small_integer_coefficients(e: &Expr, bound: i64) -> bool {
    e.terms()
        .all(|(_, c)| c.is_integer() && c.abs() <= integer(bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Expr {
        Expr::field(0)
    }
    fn ut() -> Expr {
        Expr::jet(0, MultiIndex::unit(0))
    }
    fn utt() -> Expr {
        Expr::jet(0, MultiIndex::from_counts(&[2]))
    }

    #[test]
    fn expansion_cancels_binomial() {
        let e = &(&u() + &Expr::one()).pow(2).unwrap()
            - &(&u().pow(2).unwrap() + &(&u().scale(&integer(2)) + &Expr::one()));
        assert!(e.is_zero());
    }

    #[test]
    fn exponentials_merge() {
        let bt = &Expr::param("b") * &Expr::base(0);
        let e = &Expr::exp(bt.clone()) * &Expr::exp(-&bt);
        assert_eq!(e, Expr::one());
        let sq = Expr::exp(bt.clone()).pow(2).unwrap();
        assert_eq!(sq, Expr::exp(bt.scale(&integer(2))));
        assert_eq!(Expr::exp(bt.clone()).inverse().unwrap(), Expr::exp(-&bt));
    }

    #[test]
    fn like_terms_combine() {
        let e = &(&ut() * &ut()).scale(&integer(2)) - &ut().pow(2).unwrap();
        assert_eq!(e, ut().pow(2).unwrap());
    }

    #[test]
    fn inverse_only_for_parameter_monomials() {
        let b = Expr::param("b");
        assert_eq!(&b * &b.inverse().unwrap(), Expr::one());
        assert!(u().inverse().is_err());
        assert!((&b + &Expr::one()).inverse().is_err());
        assert!(Expr::zero().inverse().is_err());
    }

    #[test]
    fn partial_derivatives() {
        let ut_var = Var::jet(0, MultiIndex::unit(0));
        assert_eq!(ut().pow(2).unwrap().diff(&ut_var), ut().scale(&integer(2)));
        let lam = Expr::apply("lambda", vec![Expr::base(0)]);
        assert_eq!((&lam * &u()).diff(&Var::jet(0, MultiIndex::empty())), lam);
        // derivative with respect to an absent variable vanishes
        assert!(utt().diff(&ut_var).is_zero());
    }

    #[test]
    fn chain_rule_through_function_arguments() {
        let (t, x, xd) = (Expr::base(0), u(), ut());
        let g = Expr::apply("g", vec![t.clone(), x.clone(), xd.clone()]);
        let f = Expr::apply("F", vec![t, x, xd]);
        let xd_var = Var::jet(0, MultiIndex::unit(0));
        let d = (&g * &f).diff(&xd_var);
        let g_v =
            Expr::func(FnApp::new("g", vec![Expr::base(0), u(), ut()]).with_slot_derivative(2));
        let f_v =
            Expr::func(FnApp::new("F", vec![Expr::base(0), u(), ut()]).with_slot_derivative(2));
        assert_eq!(d, &(&g_v * &f) + &(&g * &f_v));
    }

    #[test]
    fn substitution_examples() {
        let utt_var = Var::jet(0, MultiIndex::from_counts(&[2]));
        let e = &utt() + &u();
        assert!(e.substitute_one(&utt_var, &-&u()).unwrap().is_zero());

        let s = Expr::param("s");
        let mut b = BTreeMap::new();
        b.insert(Var::jet(0, MultiIndex::empty()), &s * &u());
        b.insert(Var::jet(0, MultiIndex::unit(0)), &s * &ut());
        let scaled = (&u() * &ut()).substitute(&b).unwrap();
        assert_eq!(scaled, &(&s.pow(2).unwrap() * &u()) * &ut());

        let g = Expr::apply("g", vec![Expr::base(0), u(), ut()]);
        let g0 = g
            .substitute_one(&Var::jet(0, MultiIndex::empty()), &Expr::zero())
            .unwrap();
        assert_eq!(
            g0,
            Expr::apply("g", vec![Expr::base(0), Expr::zero(), ut()])
        );
    }

    #[test]
    fn function_definitions_instantiate_derivatives() {
        let t = Var::Base(0);
        let bt = &Expr::param("b") * &Expr::base(0);
        let def = FnDef {
            params: vec![t],
            body: Expr::exp(bt.clone()),
        };
        let lam_t = Expr::func(FnApp::new("lambda", vec![Expr::base(0)]).with_slot_derivative(0));
        let got = lam_t.substitute_fn("lambda", &def).unwrap();
        assert_eq!(got, &Expr::param("b") * &Expr::exp(bt));
    }

    #[test]
    fn exact_and_float_evaluation() {
        let vals = |a: &Atom| match a {
            Atom::Jet(j) if j.order() == 0 => Some(integer(3)),
            Atom::Jet(_) => Some(rational(1, 2)),
            _ => None,
        };
        assert_eq!(
            (&u() * &ut()).eval::<Rational>(&vals).unwrap(),
            rational(3, 2)
        );
        assert_eq!(
            (&u().pow(2).unwrap() + &Expr::one())
                .eval::<Rational>(&vals)
                .unwrap(),
            integer(10)
        );
        assert!(Expr::base(0).eval::<Rational>(&vals).is_err());
        let e = Expr::exp(Expr::base(0));
        let fv = |a: &Atom| matches!(a, Atom::Base(0)).then_some(1.0f64);
        assert!((e.eval::<f64>(&fv).unwrap() - std::f64::consts::E).abs() < 1e-15);
        let rv = |a: &Atom| matches!(a, Atom::Base(0)).then(|| integer(1));
        assert!(matches!(
            e.eval::<Rational>(&rv),
            Err(Error::Transcendental(_))
        ));
    }

    #[test]
    fn collect_by_splits_monomials() {
        let s = Expr::param("s");
        let e = &(&s * &u()) + &(&s.pow(2).unwrap() * &ut());
        let parts = e.collect_by(|a| matches!(a, Atom::Param(p) if &**p == "s"));
        assert_eq!(parts.len(), 2);
    }
}
