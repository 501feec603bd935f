//! Functional forms: wedge products of vertical differentials `δu^α_I` with
//! expression coefficients. The base integral is implicit.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::expr::{display, Expr, JetVar, MultiIndex, Names, Style, Var};
use crate::jet::{total_derivative, total_derivative_multi, JetSpace};

/// Highest degree any operation may produce.
pub const MAX_DEGREE: usize = 3;

/// The differential `δu^α_I`.
///
/// Ordered by decreasing derivative order, then field, then index, so the
/// canonical spelling of a 2-form puts the higher-order factor first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeltaBasis {
    pub field: usize,
    pub index: MultiIndex,
}

impl DeltaBasis {
    pub fn new(field: usize, index: MultiIndex) -> Self {
        DeltaBasis { field, index }
    }

    pub fn order(&self) -> u32 {
        self.index.order()
    }

    pub fn prolonged(&self, direction: usize) -> Self {
        DeltaBasis::new(self.field, self.index.incremented(direction))
    }

    pub fn jet(&self) -> JetVar {
        JetVar::new(self.field, self.index.clone())
    }

    pub fn render(&self, names: &dyn Names, style: Style) -> String {
        let j = display::jet_str(&self.jet(), names, style);
        match style {
            Style::Ascii => format!("δ{j}"),
            Style::Latex => format!("\\delta {j}"),
        }
    }
}

impl From<JetVar> for DeltaBasis {
    fn from(j: JetVar) -> Self {
        DeltaBasis::new(j.field, j.index)
    }
}

impl Ord for DeltaBasis {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .order()
            .cmp(&self.order())
            .then_with(|| self.field.cmp(&other.field))
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl PartialOrd for DeltaBasis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sort `factors` into canonical order. Returns the permutation sign, or
/// `None` when a factor repeats.
pub fn canonical_order(factors: &mut [DeltaBasis]) -> Option<i64> {
    let mut sign = 1;
    for i in 1..factors.len() {
        let mut j = i;
        while j > 0 && factors[j - 1] > factors[j] {
            factors.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if factors.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionalForm {
    degree: usize,
    terms: BTreeMap<Vec<DeltaBasis>, Expr>,
}

impl FunctionalForm {
    pub fn zero(degree: usize) -> Self {
        FunctionalForm {
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// A 0-form.
    pub fn scalar(e: Expr) -> Self {
        let mut f = FunctionalForm::zero(0);
        f.add_term(e, Vec::new());
        f
    }

    pub fn basis(b: DeltaBasis) -> Self {
        FunctionalForm::monomial(Expr::one(), vec![b])
    }

    /// `coeff · factors[0] ∧ … ∧ factors[k-1]` in any factor order.
    pub fn monomial(coeff: Expr, factors: Vec<DeltaBasis>) -> Self {
        let mut f = FunctionalForm::zero(factors.len());
        f.add_term(coeff, factors);
        f
    }

    /// `Σ_α E_α δu^α`.
    pub fn euler(equations: &[Expr]) -> Self {
        let mut f = FunctionalForm::zero(1);
        for (alpha, e) in equations.iter().enumerate() {
            f.add_term(e.clone(), vec![DeltaBasis::new(alpha, MultiIndex::empty())]);
        }
        f
    }

    pub fn add_term(&mut self, coeff: Expr, mut factors: Vec<DeltaBasis>) {
        debug_assert_eq!(factors.len(), self.degree);
        if coeff.is_zero() {
            return;
        }
        let Some(sign) = canonical_order(&mut factors) else {
            return;
        };
        let coeff = if sign < 0 { -&coeff } else { coeff };
        let slot = self.terms.entry(factors.clone()).or_default();
        *slot += &coeff;
        if slot.is_zero() {
            self.terms.remove(&factors);
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
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

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Vec<DeltaBasis>, &Expr)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, factors: &[DeltaBasis]) -> Expr {
        let mut f = factors.to_vec();
        match canonical_order(&mut f) {
            Some(sign) => {
                let c = self.terms.get(&f).cloned().unwrap_or_default();
                if sign < 0 {
                    -&c
                } else {
                    c
                }
            }
            None => Expr::zero(),
        }
    }

    /// The coefficient of a 0-form.
    pub fn as_scalar(&self) -> Option<Expr> {
        (self.degree == 0).then(|| self.terms.get(&Vec::new()).cloned().unwrap_or_default())
    }

    /// Coefficients of a 1-form keyed by its single factor.
    pub fn one_form_terms(&self) -> impl Iterator<Item = (&DeltaBasis, &Expr)> {
        self.terms
            .iter()
            .filter_map(|(f, c)| f.first().map(|b| (b, c)))
    }

    /// Largest jet order among coefficients and factors.
    pub fn jet_order(&self) -> u32 {
        self.terms
            .iter()
            .map(|(f, c)| {
                f.iter()
                    .map(DeltaBasis::order)
                    .chain([c.jet_order()])
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn max_factor_order(&self) -> u32 {
        self.terms
            .keys()
            .flatten()
            .map(DeltaBasis::order)
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &FunctionalForm) -> FunctionalForm {
        assert_eq!(
            self.degree, other.degree,
            "adding forms of different degree"
        );
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(c.clone(), f.clone());
        }
        out
    }

    pub fn neg(&self) -> FunctionalForm {
        FunctionalForm {
            degree: self.degree,
            terms: self.terms.iter().map(|(f, c)| (f.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &FunctionalForm) -> FunctionalForm {
        self.add(&other.neg())
    }

    /// Multiply every coefficient by `a`.
    pub fn scale(&self, a: &Expr) -> FunctionalForm {
        let mut out = FunctionalForm::zero(self.degree);
        for (f, c) in &self.terms {
            out.add_term(a * c, f.clone());
        }
        out
    }

    pub fn map_coefficients(
        &self,
        mut g: impl FnMut(&Expr) -> Result<Expr>,
    ) -> Result<FunctionalForm> {
        let mut out = FunctionalForm::zero(self.degree);
        for (f, c) in &self.terms {
            out.add_term(g(c)?, f.clone());
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &FunctionalForm) -> Result<FunctionalForm> {
        let degree = self.degree + other.degree;
        if degree > MAX_DEGREE {
            return Err(Error::DegreeOverflow(degree));
        }
        let mut out = FunctionalForm::zero(degree);
        for (fa, ca) in &self.terms {
            for (fb, cb) in &other.terms {
                let mut factors = fa.clone();
                factors.extend(fb.iter().cloned());
                out.add_term(ca * cb, factors);
            }
        }
        Ok(out)
    }

    /// The functional exterior derivative ρ.
    pub fn fed(&self) -> Result<FunctionalForm> {
        let degree = self.degree + 1;
        if degree > MAX_DEGREE {
            return Err(Error::DegreeOverflow(degree));
        }
        let mut out = FunctionalForm::zero(degree);
        for (f, c) in &self.terms {
            for j in c.jet_vars() {
                let partial = c.diff(&Var::Jet(j.clone()));
                let mut factors = vec![DeltaBasis::from(j)];
                factors.extend(f.iter().cloned());
                out.add_term(partial, factors);
            }
        }
        Ok(out)
    }

    /// Contraction with the Euler vector field centred at `center`: slot
    /// `j` receives `(−1)^j D_I(u^α − u₀^α)`.
    pub fn interior_euler(&self, space: &JetSpace, center: &[Expr]) -> Result<FunctionalForm> {
        if self.degree == 0 {
            return Err(Error::InvalidArgument("contraction of a 0-form".into()));
        }
        let mut out = FunctionalForm::zero(self.degree - 1);
        for (f, c) in &self.terms {
            for (slot, b) in f.iter().enumerate() {
                let value = euler_component(space, center, b)?;
                let mut rest = f.clone();
                rest.remove(slot);
                let coeff = &value * c;
                out.add_term(if slot % 2 == 1 { -&coeff } else { coeff }, rest);
            }
        }
        Ok(out)
    }

    /// Total derivative `D_i` acting on coefficients and prolonging factors.
    pub fn total_derivative(&self, space: &JetSpace, direction: usize) -> Result<FunctionalForm> {
        let mut out = FunctionalForm::zero(self.degree);
        for (f, c) in &self.terms {
            out.add_term(total_derivative(space, c, direction)?, f.clone());
            for slot in 0..f.len() {
                let mut g = f.clone();
                g[slot] = g[slot].prolonged(direction);
                space.check_order(g[slot].order())?;
                out.add_term(c.clone(), g);
            }
        }
        Ok(out)
    }

    pub fn render(&self, names: &dyn Names, style: Style) -> String {
        if self.is_zero() {
            return "0".into();
        }
        if self.degree == 0 {
            return display::render(&self.as_scalar().unwrap_or_default(), names, style);
        }
        let wedge = match style {
            Style::Ascii => " ∧ ",
            Style::Latex => " \\wedge ",
        };
        let mut out = String::new();
        for (k, (f, c)) in self.terms.iter().enumerate() {
            let factors: Vec<String> = f.iter().map(|b| b.render(names, style)).collect();
            let factors = factors.join(wedge);
            let coeff = display::render(c, names, style);
            let single = c.len() == 1;
            let negative = single && coeff.starts_with('-');
            let body = if negative { &coeff[1..] } else { &coeff[..] };
            if k > 0 {
                out.push_str(if negative { " - " } else { " + " });
            } else if negative {
                out.push('-');
            }
            let sep = if style == Style::Ascii { "*" } else { " " };
            match (single, body) {
                (true, "1") => {}
                (true, b) => {
                    out.push_str(b);
                    out.push_str(sep);
                }
                (false, _) => {
                    match style {
                        Style::Ascii => write!(out, "({coeff})"),
                        Style::Latex => write!(out, "\\left({coeff}\\right)"),
                    }
                    .ok();
                    out.push_str(sep);
                }
            }
            out.push_str(&factors);
        }
        out
    }
}

/// `D_I(u^α − u₀^α)` for the slot `δu^α_I`.
pub fn euler_component(space: &JetSpace, center: &[Expr], b: &DeltaBasis) -> Result<Expr> {
    let u = Expr::jet_var(b.jet());
    match center.get(b.field) {
        Some(c) if !c.is_zero() => Ok(&u - &total_derivative_multi(space, c, &b.index)?),
        _ => Ok(u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> JetSpace {
        JetSpace::new(&["t", "x"], &["u"])
    }
    fn j(c: &[u32]) -> Expr {
        Expr::jet(0, MultiIndex::from_counts(c))
    }
    fn d(c: &[u32]) -> DeltaBasis {
        DeltaBasis::new(0, MultiIndex::from_counts(c))
    }

    #[test]
    fn basis_order_puts_higher_order_first() {
        assert!(d(&[1]) < d(&[]));
        assert!(d(&[2]) < d(&[1]));
        assert!(d(&[0, 1]) < d(&[1]));
    }

    #[test]
    fn wedge_examples() {
        let du = FunctionalForm::basis(d(&[]));
        let dux = FunctionalForm::basis(d(&[0, 1]));
        assert!(du.wedge(&du).unwrap().is_zero());
        assert_eq!(dux.wedge(&du).unwrap(), du.wedge(&dux).unwrap().neg());
        let a = FunctionalForm::monomial(j(&[]), vec![d(&[])]);
        let b = FunctionalForm::monomial(j(&[1]), vec![d(&[1])]);
        let w = a.wedge(&b).unwrap();
        assert_eq!(w.coefficient(&[d(&[]), d(&[1])]), &j(&[]) * &j(&[1]));
        let three = du
            .wedge(&dux)
            .unwrap()
            .wedge(&FunctionalForm::basis(d(&[1])))
            .unwrap();
        assert!(matches!(three.wedge(&du), Err(Error::DegreeOverflow(4))));
    }

    #[test]
    fn fed_examples() {
        let e = &(&j(&[2]) + &j(&[1])) + &j(&[]);
        let r = FunctionalForm::euler(&[e]).fed().unwrap();
        let mut expect = FunctionalForm::zero(2);
        expect.add_term(Expr::one(), vec![d(&[2]), d(&[])]);
        expect.add_term(Expr::one(), vec![d(&[1]), d(&[])]);
        assert_eq!(r, expect);
        assert_eq!(
            r.render(&JetSpace::new(&["t"], &["u"]), Style::Ascii),
            "δu_tt ∧ δu + δu_t ∧ δu"
        );

        let f = FunctionalForm::euler(&[&j(&[]).pow(2).unwrap() * &j(&[1])]);
        assert!(f.fed().unwrap().fed().unwrap().is_zero());
    }

    #[test]
    fn interior_euler_examples() {
        let s = sp();
        let e = &j(&[2]) + &j(&[]);
        let k = FunctionalForm::euler(&[e.clone()])
            .interior_euler(&s, &[])
            .unwrap();
        assert_eq!(k.as_scalar().unwrap(), &e * &j(&[]));

        let w = FunctionalForm::monomial(Expr::one(), vec![d(&[]), d(&[1])]);
        let k = w.interior_euler(&s, &[]).unwrap();
        let mut expect = FunctionalForm::zero(1);
        expect.add_term(-&j(&[1]), vec![d(&[])]);
        expect.add_term(j(&[]), vec![d(&[1])]);
        assert_eq!(k, expect);

        let center = vec![j(&[])];
        let zero = FunctionalForm::euler(&[e]);
        assert!(zero.interior_euler(&s, &center).unwrap().is_zero());
    }

    #[test]
    fn latex_rendering() {
        let s = JetSpace::new(&["t"], &["u"]);
        let f = FunctionalForm::monomial(Expr::param("b"), vec![d(&[1]), d(&[])]);
        assert_eq!(
            f.render(&s, Style::Latex),
            "b \\delta u_{t} \\wedge \\delta u"
        );
        let g = FunctionalForm::euler(&[&j(&[2]) + &j(&[])]);
        assert_eq!(g.render(&s, Style::Ascii), "(u_tt + u)*δu");
    }
}
