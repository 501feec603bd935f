//! Differential calculus on the jet space: total derivatives, the
//! Euler–Lagrange operator, linearization of equation systems and formal
//! adjoints of linear differential operators.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::One;

use crate::error::{Error, Result};
use crate::expr::{display, Expr, JetVar, MultiIndex, Names, Style, Var};

/// Coordinates of a local trivialization: base variables, fields and the
/// largest jet order any operation may produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetSpace {
    base: Vec<String>,
    fields: Vec<String>,
    max_order: u32,
}

impl JetSpace {
    pub const DEFAULT_MAX_ORDER: u32 = 4;

    pub fn new(base: &[&str], fields: &[&str]) -> Self {
        JetSpace {
            base: base.iter().map(|s| s.to_string()).collect(),
            fields: fields.iter().map(|s| s.to_string()).collect(),
            max_order: Self::DEFAULT_MAX_ORDER,
        }
    }

    pub fn from_names(base: Vec<String>, fields: Vec<String>, max_order: u32) -> Self {
        JetSpace {
            base,
            fields,
            max_order,
        }
    }

    pub fn with_max_order(mut self, max_order: u32) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn base_count(&self) -> usize {
        self.base.len()
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn base_names(&self) -> &[String] {
        &self.base
    }

    pub fn field_names(&self) -> &[String] {
        &self.fields
    }

    pub fn check_order(&self, order: u32) -> Result<()> {
        if order > self.max_order {
            Err(Error::MaxOrderExceeded {
                order,
                max: self.max_order,
            })
        } else {
            Ok(())
        }
    }

    pub fn check_expr(&self, e: &Expr) -> Result<()> {
        self.check_order(e.jet_order())
    }

    /// Every multi-index of order at most `order` over the base variables.
    pub fn multi_indices_up_to(&self, order: u32) -> Vec<MultiIndex> {
        fn go(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() == n {
                out.push(MultiIndex::from_counts(prefix));
                return;
            }
            for c in 0..=left {
                prefix.push(c);
                go(n, left - c, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        go(self.base.len(), order, &mut Vec::new(), &mut out);
        out.sort();
        out
    }
}

impl Names for JetSpace {
    fn base_name(&self, i: usize) -> String {
        self.base.get(i).cloned().unwrap_or_else(|| format!("x{i}"))
    }
    fn field_name(&self, alpha: usize) -> String {
        self.fields
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| format!("u{alpha}"))
    }
    fn subscript_sugar(&self) -> bool {
        self.base.iter().all(|b| b.chars().count() == 1)
            && self.fields.iter().all(|f| !f.contains('_'))
    }
}

/// `D_i e`: explicit dependence on `x^i` plus the prolongation of every jet
/// coordinate present in `e`.
pub fn total_derivative(space: &JetSpace, e: &Expr, direction: usize) -> Result<Expr> {
    let mut out = e.diff(&Var::Base(direction));
    for j in e.jet_vars() {
        let next = j.prolonged(direction);
        space.check_order(next.order())?;
        let partial = e.diff(&Var::Jet(j));
        if !partial.is_zero() {
            out += &(&partial * &Expr::jet_var(next));
        }
    }
    Ok(out)
}

pub fn total_derivative_multi(space: &JetSpace, e: &Expr, index: &MultiIndex) -> Result<Expr> {
    index
        .directions()
        .into_iter()
        .try_fold(e.clone(), |acc, d| total_derivative(space, &acc, d))
}

fn sign(order: u32) -> Expr {
    if order % 2 == 0 {
        Expr::one()
    } else {
        Expr::int(-1)
    }
}

/// Variational derivative of `lagrangian` with respect to field `alpha`.
pub fn euler_lagrange(space: &JetSpace, lagrangian: &Expr, alpha: usize) -> Result<Expr> {
    let order = lagrangian.jet_order();
    space.check_order(2 * order)?;
    let mut out = Expr::zero();
    for j in lagrangian
        .jet_vars()
        .into_iter()
        .filter(|j| j.field == alpha)
    {
        let partial = lagrangian.diff(&Var::Jet(j.clone()));
        let term = total_derivative_multi(space, &partial, &j.index)?;
        out += &(&sign(j.order()) * &term);
    }
    Ok(out)
}

/// Euler–Lagrange expressions for every field.
pub fn euler_lagrange_all(space: &JetSpace, lagrangian: &Expr) -> Result<Vec<Expr>> {
    (0..space.field_count())
        .map(|a| euler_lagrange(space, lagrangian, a))
        .collect()
}

/// `Σ_I a_I D_I` with expression coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinDiffOp {
    terms: BTreeMap<MultiIndex, Expr>,
}

impl LinDiffOp {
    pub fn zero() -> Self {
        LinDiffOp::default()
    }

    pub fn identity() -> Self {
        LinDiffOp::multiplication(Expr::one())
    }

    pub fn multiplication(a: Expr) -> Self {
        LinDiffOp::term(MultiIndex::empty(), a)
    }

    pub fn derivative(index: MultiIndex) -> Self {
        LinDiffOp::term(index, Expr::one())
    }

    pub fn term(index: MultiIndex, coeff: Expr) -> Self {
        let mut op = LinDiffOp::zero();
        op.add_term(index, coeff);
        op
    }

    pub fn add_term(&mut self, index: MultiIndex, coeff: Expr) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(index.clone()).or_default();
        *slot += &coeff;
        if slot.is_zero() {
            self.terms.remove(&index);
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &Expr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, index: &MultiIndex) -> Expr {
        self.terms.get(index).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::order).max()
    }

    pub fn add(&self, other: &LinDiffOp) -> LinDiffOp {
        let mut out = self.clone();
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> LinDiffOp {
        LinDiffOp {
            terms: self.terms.iter().map(|(i, c)| (i.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &LinDiffOp) -> LinDiffOp {
        self.add(&other.neg())
    }

    /// Left multiplication by a function: `a · P`.
    pub fn scale(&self, a: &Expr) -> LinDiffOp {
        let mut out = LinDiffOp::zero();
        for (i, c) in &self.terms {
            out.add_term(i.clone(), a * c);
        }
        out
    }

    pub fn map_coefficients(&self, f: impl Fn(&Expr) -> Result<Expr>) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::zero();
        for (i, c) in &self.terms {
            out.add_term(i.clone(), f(c)?);
        }
        Ok(out)
    }

    pub fn apply(&self, space: &JetSpace, e: &Expr) -> Result<Expr> {
        let mut out = Expr::zero();
        for (i, c) in &self.terms {
            out += &(c * &total_derivative_multi(space, e, i)?);
        }
        Ok(out)
    }

    /// `D_i ∘ self`, by the product rule on each coefficient.
    pub fn prepend_derivative(&self, space: &JetSpace, direction: usize) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::zero();
        for (i, c) in &self.terms {
            out.add_term(i.clone(), total_derivative(space, c, direction)?);
            out.add_term(i.incremented(direction), c.clone());
        }
        Ok(out)
    }

    /// `self ∘ other`.
    pub fn compose(&self, space: &JetSpace, other: &LinDiffOp) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::zero();
        for (i, c) in &self.terms {
            let mut inner = other.clone();
            for d in i.directions() {
                inner = inner.prepend_derivative(space, d)?;
            }
            out = out.add(&inner.scale(c));
        }
        Ok(out)
    }

    /// Formal adjoint `Σ (−1)^{|I|} D_I ∘ a_I`.
    pub fn adjoint(&self, space: &JetSpace) -> Result<LinDiffOp> {
        let mut out = LinDiffOp::zero();
        for (i, c) in &self.terms {
            let mut op = LinDiffOp::multiplication(c.clone());
            for d in i.directions() {
                op = op.prepend_derivative(space, d)?;
            }
            if i.order() % 2 == 1 {
                op = op.neg();
            }
            out = out.add(&op);
        }
        Ok(out)
    }

    pub fn render(&self, names: &dyn Names, style: Style) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (i, c)) in self.terms.iter().rev().enumerate() {
            let coeff = display::render(c, names, style);
            let single = c.len() == 1;
            let negative = single && coeff.starts_with('-');
            if k > 0 {
                out.push_str(if negative { " - " } else { " + " });
            } else if negative {
                out.push('-');
            }
            let body = if negative { &coeff[1..] } else { &coeff[..] };
            let ops = derivative_str(i, names, style);
            if ops.is_empty() {
                if single {
                    out.push_str(body);
                } else {
                    let _ = write!(out, "({coeff})");
                }
                continue;
            }
            match (body, single) {
                ("1", true) => {}
                (b, true) => {
                    out.push_str(b);
                    out.push_str(if style == Style::Ascii { "*" } else { " " });
                }
                (_, false) => {
                    let _ = write!(out, "({coeff})");
                    out.push_str(if style == Style::Ascii { "*" } else { " " });
                }
            }
            out.push_str(&ops);
        }
        out
    }
}

fn derivative_str(i: &MultiIndex, names: &dyn Names, style: Style) -> String {
    let parts: Vec<String> = i
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(d, &c)| {
            let n = names.base_name(d);
            match (style, c) {
                (Style::Ascii, 1) => format!("D_{n}"),
                (Style::Ascii, c) => format!("D_{n}^{c}"),
                (Style::Latex, 1) => format!("D_{{{n}}}"),
                (Style::Latex, c) => format!("D_{{{n}}}^{{{c}}}"),
            }
        })
        .collect();
    parts.join(if style == Style::Ascii { "*" } else { " " })
}

/// Rectangular matrix of operators indexed by (equation, field).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinDiffOpMatrix {
    rows: Vec<Vec<LinDiffOp>>,
}

impl LinDiffOpMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        LinDiffOpMatrix {
            rows: vec![vec![LinDiffOp::zero(); ncols]; nrows],
        }
    }

    pub fn from_rows(rows: Vec<Vec<LinDiffOp>>) -> Self {
        LinDiffOpMatrix { rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, r: usize, c: usize) -> &LinDiffOp {
        &self.rows[r][c]
    }

    pub fn set(&mut self, r: usize, c: usize, op: LinDiffOp) {
        self.rows[r][c] = op;
    }

    pub fn rows(&self) -> &[Vec<LinDiffOp>] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().flatten().all(LinDiffOp::is_zero)
    }

    pub fn map(&self, f: impl Fn(&LinDiffOp) -> Result<LinDiffOp>) -> Result<LinDiffOpMatrix> {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(&f).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(LinDiffOpMatrix { rows })
    }

    /// Entry-wise formal adjoint of the transpose.
    pub fn adjoint(&self, space: &JetSpace) -> Result<LinDiffOpMatrix> {
        let mut out = LinDiffOpMatrix::zeros(self.ncols(), self.nrows());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, op) in row.iter().enumerate() {
                out.rows[c][r] = op.adjoint(space)?;
            }
        }
        Ok(out)
    }
}

/// Linearization: entry `(α, β)` is `Σ_I ∂E_α/∂u^β_I D_I`.
pub fn frechet(space: &JetSpace, equations: &[Expr]) -> LinDiffOpMatrix {
    let mut m = LinDiffOpMatrix::zeros(equations.len(), space.field_count());
    for (alpha, e) in equations.iter().enumerate() {
        for j in e.jet_vars() {
            if j.field >= space.field_count() {
                continue;
            }
            let partial = e.diff(&Var::Jet(j.clone()));
            m.rows[alpha][j.field].add_term(j.index.clone(), partial);
        }
    }
    m
}

/// Coefficient of `D_I` that multiplies a given jet coordinate in `E`.
pub fn jet_coefficient(e: &Expr, j: &JetVar) -> Expr {
    e.diff(&Var::Jet(j.clone()))
}

pub fn is_one(e: &Expr) -> bool {
    e.as_constant().is_some_and(|c| c.is_one())
}
