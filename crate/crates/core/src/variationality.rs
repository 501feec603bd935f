//! Deciding whether a system is variational.
//!
//! The test is the Helmholtz residual `R = F − F*`, with `F` the Fréchet
//! derivative of the system. `R ≡ 0` exactly when the Euler form is closed
//! modulo divergences; a nonzero residual is reported together with the
//! 2-form it corresponds to.

use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{rational, Atom, Expr, JetVar, MultiIndex, Var};
use crate::forms::{DeltaBasis, FunctionalForm};
use crate::ibp::two_form_from_operator;
use crate::jet::{
    frechet, total_derivative, total_derivative_multi, JetSpace, LinDiffOp, LinDiffOpMatrix,
};
use crate::quadrature::integrate_box;
use crate::scalar::Scalar;
use crate::Rational;

/// Iterations of leading-derivative substitution before declaring a cycle.
const RESTRICTION_ROUNDS: usize = 64;

pub fn helmholtz_residual(space: &JetSpace, equations: &[Expr]) -> Result<LinDiffOpMatrix> {
    let n = space.field_count();
    if equations.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} equations for {} fields",
            equations.len(),
            n
        )));
    }
    let fr = frechet(space, equations);
    let mut r = LinDiffOpMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            r.set(a, b, fr.get(a, b).sub(&fr.get(b, a).adjoint(space)?));
        }
    }
    Ok(r)
}

/// A system solved for one leading derivative per equation.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    space: JetSpace,
    leads: Vec<(JetVar, Expr)>,
}

impl SolutionSet {
    pub fn new(space: &JetSpace, equations: &[Expr]) -> Result<Self> {
        let mut leads: Vec<(JetVar, Expr)> = Vec::new();
        for (alpha, e) in equations.iter().enumerate() {
            let (lead, rhs) = solve_for_leading(e, alpha)?;
            for (other, _) in &leads {
                if other.field == lead.field
                    && (lead.index.checked_sub(&other.index).is_some()
                        || other.index.checked_sub(&lead.index).is_some())
                {
                    return Err(Error::NotSemiExplicit(format!(
                        "two equations share the leading derivative {lead:?}"
                    )));
                }
            }
            leads.push((lead, rhs));
        }
        Ok(SolutionSet {
            space: space.clone(),
            leads,
        })
    }

    pub fn leads(&self) -> &[(JetVar, Expr)] {
        &self.leads
    }

    pub fn restrict(&self, e: &Expr) -> Result<Expr> {
        let mut current = e.clone();
        for _ in 0..RESTRICTION_ROUNDS {
            let mut bindings = BTreeMap::new();
            for j in current.jet_vars() {
                for (lead, rhs) in &self.leads {
                    if lead.field != j.field {
                        continue;
                    }
                    if let Some(rest) = j.index.checked_sub(&lead.index) {
                        bindings.insert(
                            Var::Jet(j.clone()),
                            total_derivative_multi(&self.space, rhs, &rest)?,
                        );
                        break;
                    }
                }
            }
            if bindings.is_empty() {
                return Ok(current);
            }
            current = current.substitute(&bindings)?;
        }
        Err(Error::SubstitutionCycle)
    }

    pub fn restrict_op(&self, op: &LinDiffOp) -> Result<LinDiffOp> {
        op.map_coefficients(|c| self.restrict(c))
    }

    pub fn restrict_matrix(&self, m: &LinDiffOpMatrix) -> Result<LinDiffOpMatrix> {
        m.map(|op| self.restrict_op(op))
    }

    pub fn restrict_form(&self, f: &FunctionalForm) -> Result<FunctionalForm> {
        f.map_coefficients(|c| self.restrict(c))
    }
}

/// The highest-order jet of `e`, preferring field `alpha`, provided `e` is
/// linear in it with an invertible coefficient; returns it with its value on
/// solutions.
fn solve_for_leading(e: &Expr, alpha: usize) -> Result<(JetVar, Expr)> {
    let jets = e.jet_vars();
    let top = jets
        .iter()
        .map(JetVar::order)
        .max()
        .ok_or_else(|| Error::NotSemiExplicit("equation without jet variables".into()))?;
    let mut candidates: Vec<&JetVar> = jets.iter().filter(|j| j.order() == top).collect();
    candidates.sort_by_key(|j| (j.field != alpha, j.field, j.index.clone()));
    for lead in candidates {
        let v = Var::Jet(lead.clone());
        let coeff = e.diff(&v);
        if coeff.contains_var(&v) {
            continue;
        }
        let Ok(inv) = coeff.inverse() else { continue };
        let rest = e - &(&coeff * &Expr::jet_var(lead.clone()));
        if rest.contains_var(&v) {
            continue;
        }
        return Ok((lead.clone(), -&(&rest * &inv)));
    }
    Err(Error::NotSemiExplicit(format!("{e:?}")))
}

pub fn restrict_on_solutions(space: &JetSpace, e: &Expr, equations: &[Expr]) -> Result<Expr> {
    SolutionSet::new(space, equations)?.restrict(e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub variational: bool,
    pub on_solutions: bool,
    pub residual: LinDiffOpMatrix,
    /// `½ Σ R[α][β]_J δu^β_J ∧ δu^α`, zero exactly when variational.
    pub obstruction: FunctionalForm,
    pub notes: Vec<String>,
}

impl Verdict {
    /// The obstruction term of lowest derivative order.
    pub fn spoiler(&self) -> Option<FunctionalForm> {
        self.obstruction
            .terms()
            .next_back()
            .map(|(f, c)| FunctionalForm::monomial(c.clone(), f.clone()))
    }

    /// Whether the obstruction contains the given factors.
    pub fn obstruction_mentions(&self, factors: &[DeltaBasis]) -> bool {
        !self.obstruction.coefficient(factors).is_zero()
    }
}

pub fn is_variational(space: &JetSpace, equations: &[Expr], on_solutions: bool) -> Result<Verdict> {
    let mut residual = helmholtz_residual(space, equations)?;
    let mut notes = Vec::new();
    if on_solutions {
        let set = SolutionSet::new(space, equations)?;
        residual = set.restrict_matrix(&residual)?;
        notes.push("residual restricted to solutions".to_string());
    }
    let mut verdict = verdict_from_residual(residual, on_solutions);
    verdict.notes = notes;
    Ok(verdict)
}

/// Verdict for an already computed (and possibly restricted) residual.
pub fn verdict_from_residual(residual: LinDiffOpMatrix, on_solutions: bool) -> Verdict {
    let obstruction = two_form_from_operator(&residual);
    Verdict {
        variational: residual.is_zero(),
        on_solutions,
        residual,
        obstruction,
        notes: Vec::new(),
    }
}

/// One classical Helmholtz condition for second-order ODE systems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HcCondition {
    pub family: usize,
    pub i: usize,
    pub j: usize,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondOrderConditions {
    /// `∂ε_[i/∂x^j]`, `∂ε_[i/∂ẋ^j] − D_t ∂ε_[i/∂ẍ^j]`, `∂ε_[i/∂ẍ^j]`.
    pub antisymmetric: Vec<HcCondition>,
    /// `A − Aᵀ`, `½(B + Bᵀ) − ½D_t(A + Aᵀ)`, `C − Cᵀ − ½D_t(B − Bᵀ)` with
    /// `A, B, C` the derivatives by `ẍ, ẋ, x`.
    pub symmetrized: Vec<HcCondition>,
}

impl SecondOrderConditions {
    pub fn satisfied(&self) -> bool {
        self.symmetrized.iter().all(|c| c.expr.is_zero())
    }

    pub fn failing(&self) -> impl Iterator<Item = &HcCondition> {
        self.symmetrized.iter().filter(|c| !c.expr.is_zero())
    }
}

pub fn second_order_hc(space: &JetSpace, equations: &[Expr]) -> Result<SecondOrderConditions> {
    if space.base_count() != 1 {
        return Err(Error::InvalidArgument(
            "second-order conditions need one base variable".into(),
        ));
    }
    let n = space.field_count();
    if equations.len() != n {
        return Err(Error::InvalidArgument("system must be square".into()));
    }
    if let Some(e) = equations.iter().find(|e| e.jet_order() > 2) {
        return Err(Error::InvalidArgument(format!(
            "order {} exceeds 2",
            e.jet_order()
        )));
    }
    let partial = |i: usize, j: usize, k: u32| {
        equations[i].diff(&Var::Jet(JetVar::new(j, MultiIndex::from_counts(&[k]))))
    };
    let dt = |e: &Expr| total_derivative(space, e, 0);
    let half = rational(1, 2);
    let mut antisymmetric = Vec::new();
    let mut symmetrized = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (a_ij, a_ji) = (partial(i, j, 2), partial(j, i, 2));
            let (b_ij, b_ji) = (partial(i, j, 1), partial(j, i, 1));
            let (c_ij, c_ji) = (partial(i, j, 0), partial(j, i, 0));
            if i < j {
                let a = &a_ij - &a_ji;
                antisymmetric.push(HcCondition {
                    family: 1,
                    i,
                    j,
                    expr: &c_ij - &c_ji,
                });
                antisymmetric.push(HcCondition {
                    family: 2,
                    i,
                    j,
                    expr: &(&b_ij - &b_ji) - &dt(&a)?,
                });
                antisymmetric.push(HcCondition {
                    family: 3,
                    i,
                    j,
                    expr: a.clone(),
                });
                symmetrized.push(HcCondition {
                    family: 1,
                    i,
                    j,
                    expr: a,
                });
                let c = &(&c_ij - &c_ji) - &dt(&(&b_ij - &b_ji))?.scale(&half);
                symmetrized.push(HcCondition {
                    family: 3,
                    i,
                    j,
                    expr: c,
                });
            }
            if i <= j {
                let b = &(&b_ij + &b_ji).scale(&half) - &dt(&(&a_ij + &a_ji))?.scale(&half);
                symmetrized.push(HcCondition {
                    family: 2,
                    i,
                    j,
                    expr: b,
                });
            }
        }
    }
    symmetrized.sort_by_key(|c| (c.family, c.i, c.j));
    Ok(SecondOrderConditions {
        antisymmetric,
        symmetrized,
    })
}

/// A definite integral, exact when the integrand allows it.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Value::Approx(x) => *x,
        }
    }
}

pub struct GateauxInput<'a> {
    pub lagrangian: &'a Expr,
    pub equations: &'a [Expr],
    /// `φ^α` as functions of the base variables.
    pub sections: &'a [Expr],
    /// `η^α`, vanishing with their derivatives on the boundary.
    pub variations: &'a [Expr],
    pub domain: &'a [(Rational, Rational)],
    pub params: &'a BTreeMap<String, Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateauxReport {
    pub derivative: Value,
    pub pairing: Value,
    pub agrees: bool,
}

/// Tolerance for the floating-point branch of [`gateaux_check`].
pub const GATEAUX_TOLERANCE: f64 = 1e-9;
const QUADRATURE_POINTS: usize = 24;

/// Compares `d/dε ∫ L(φ + εη)|₀` with `∫ Σ E_α(φ) η^α` over a box.
pub fn gateaux_check(space: &JetSpace, input: &GateauxInput) -> Result<GateauxReport> {
    let d = space.base_count();
    if input.domain.len() != d {
        return Err(Error::InvalidArgument("domain dimension mismatch".into()));
    }
    let order = input.lagrangian.jet_order().max(
        input
            .equations
            .iter()
            .map(Expr::jet_order)
            .max()
            .unwrap_or(0),
    );
    let wide = space
        .clone()
        .with_max_order(space.max_order().max(order + 1));
    let params: BTreeMap<Var, Expr> = input
        .params
        .iter()
        .map(|(k, v)| (Var::Param(k.as_str().into()), Expr::constant(v.clone())))
        .collect();
    let bind = |e: &Expr| e.substitute(&params);
    let sections = input
        .sections
        .iter()
        .map(bind)
        .collect::<Result<Vec<_>>>()?;
    let variations = input
        .variations
        .iter()
        .map(bind)
        .collect::<Result<Vec<_>>>()?;
    if sections.iter().chain(&variations).any(|e| !e.is_jet_free()) {
        return Err(Error::InvalidArgument(
            "sections and variations must be functions of the base".into(),
        ));
    }
    check_boundary(
        &wide,
        &variations,
        input.domain,
        input.lagrangian.jet_order(),
    )?;

    let eps = Var::Param("__gateaux_eps".into());
    let perturbed: Vec<Expr> = sections
        .iter()
        .zip(&variations)
        .map(|(p, h)| p + &(&Expr::var(&eps) * h))
        .collect();
    let lhs = bind(&plug(&wide, input.lagrangian, &perturbed)?)?
        .diff(&eps)
        .substitute_one(&eps, &Expr::zero())?;
    let mut rhs = Expr::zero();
    for (e, h) in input.equations.iter().zip(&variations) {
        rhs += &(&bind(&plug(&wide, e, &sections)?)? * h);
    }
    let (derivative, pairing) = if lhs.has_transcendental() || rhs.has_transcendental() {
        (
            Value::Approx(integrate_float(&lhs, input.domain)?),
            Value::Approx(integrate_float(&rhs, input.domain)?),
        )
    } else {
        (
            Value::Exact(integrate_exact(&lhs, input.domain)?),
            Value::Exact(integrate_exact(&rhs, input.domain)?),
        )
    };
    let agrees = match (&derivative, &pairing) {
        (Value::Exact(a), Value::Exact(b)) => a == b,
        (a, b) => {
            let (a, b) = (a.to_f64(), b.to_f64());
            (a - b).abs() <= GATEAUX_TOLERANCE * a.abs().max(b.abs()).max(1.0)
        }
    };
    Ok(GateauxReport {
        derivative,
        pairing,
        agrees,
    })
}

/// Replace every jet `u^α_I` by `∂_I` of the given section.
fn plug(space: &JetSpace, e: &Expr, sections: &[Expr]) -> Result<Expr> {
    let mut bindings = BTreeMap::new();
    for j in e.jet_vars() {
        let s = sections
            .get(j.field)
            .ok_or_else(|| Error::Unbound(format!("section for field {}", j.field)))?;
        bindings.insert(
            Var::Jet(j.clone()),
            total_derivative_multi(space, s, &j.index)?,
        );
    }
    e.substitute(&bindings)
}

fn check_boundary(
    space: &JetSpace,
    variations: &[Expr],
    domain: &[(Rational, Rational)],
    order: u32,
) -> Result<()> {
    if order == 0 {
        return Ok(());
    }
    for eta in variations {
        for index in space.multi_indices_up_to(order - 1) {
            let de = total_derivative_multi(space, eta, &index)?;
            for (i, (a, b)) in domain.iter().enumerate() {
                for end in [a, b] {
                    let face = de.substitute_one(&Var::Base(i), &Expr::constant(end.clone()))?;
                    if !face.is_zero() {
                        return Err(Error::BoundaryNotVanishing(format!(
                            "{de:?} at x{i} = {end}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact integral of a polynomial in the base variables over a box.
pub fn integrate_exact(e: &Expr, domain: &[(Rational, Rational)]) -> Result<Rational> {
    let mut total = Rational::zero();
    for (m, c) in e.terms() {
        let mut powers = vec![0i32; domain.len()];
        for (a, k) in m.factors() {
            match a {
                Atom::Base(i) if *k >= 0 && *i < domain.len() => powers[*i] = *k,
                other => {
                    return Err(Error::UnsupportedClass(format!(
                        "cannot integrate {other:?} exactly"
                    )))
                }
            }
        }
        let mut v = c.clone();
        for ((lo, hi), k) in domain.iter().zip(&powers) {
            let up = |x: &Rational| x.powi(k + 1).unwrap_or_default();
            v *= (up(hi) - up(lo)) / Rational::from_integer((k + 1).into());
        }
        total += v;
    }
    Ok(total)
}

fn integrate_float(e: &Expr, domain: &[(Rational, Rational)]) -> Result<f64> {
    if let Some(a) = e.atoms().into_iter().find(|a| {
        !matches!(
            a,
            Atom::Base(_) | Atom::Exp(_) | Atom::Sin(_) | Atom::Cos(_)
        )
    }) {
        return Err(Error::Unbound(format!("{a:?}")));
    }
    let bounds: Vec<(f64, f64)> = domain
        .iter()
        .map(|(a, b)| {
            (
                a.to_f64().unwrap_or(f64::NAN),
                b.to_f64().unwrap_or(f64::NAN),
            )
        })
        .collect();
    let mut failure = None;
    let value = integrate_box::<f64>(
        &mut |x| match e.eval::<f64>(&|a| match a {
            Atom::Base(i) => x.get(*i).copied(),
            _ => None,
        }) {
            Ok(v) => v,
            Err(err) => {
                failure = Some(err);
                f64::NAN
            }
        },
        &bounds,
        QUADRATURE_POINTS,
    );
    match failure {
        Some(err) => Err(err),
        None if value.is_finite() => Ok(value),
        None => Err(Error::InvalidArgument("non-finite integral".into())),
    }
}

/// `|v|` as a float, for reporting.
pub fn magnitude(v: &Value) -> f64 {
    match v {
        Value::Exact(r) => r.abs().to_f64().unwrap_or(f64::NAN),
        Value::Approx(x) => x.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FnApp;

    fn j(c: &[u32]) -> Expr {
        Expr::jet(0, MultiIndex::from_counts(c))
    }
    fn t() -> Expr {
        Expr::base(0)
    }

    #[test]
    fn residual_examples() {
        let s = JetSpace::new(&["t"], &["u"]);
        assert!(helmholtz_residual(&s, &[&j(&[2]) + &j(&[])])
            .unwrap()
            .is_zero());

        let b = Expr::param("b");
        let damped = &(&j(&[2]) + &(&b * &j(&[1]))) + &j(&[]);
        let r = helmholtz_residual(&s, &[damped]).unwrap();
        assert_eq!(
            r.get(0, 0),
            &LinDiffOp::term(MultiIndex::unit(0), b.scale(&rational(2, 1)))
        );

        let s2 = JetSpace::new(&["t", "x"], &["u"]);
        let heat = &j(&[1]) - &j(&[0, 2]);
        let v = is_variational(&s2, &[heat], false).unwrap();
        assert!(!v.variational);
        assert_eq!(
            v.residual.get(0, 0),
            &LinDiffOp::term(MultiIndex::unit(0), Expr::int(2))
        );
        assert!(v.obstruction_mentions(&[
            DeltaBasis::new(0, MultiIndex::unit(0)),
            DeltaBasis::new(0, MultiIndex::empty())
        ]));
    }

    #[test]
    fn first_order_autonomous_is_not_variational() {
        let s = JetSpace::new(&["t"], &["x"]);
        let f = Expr::apply("f", vec![j(&[])]);
        assert!(
            !is_variational(&s, &[&j(&[1]) - &f], false)
                .unwrap()
                .variational
        );
        assert!(
            is_variational(&s, &[&j(&[2]) + &j(&[])], false)
                .unwrap()
                .variational
        );
    }

    #[test]
    fn restriction_examples() {
        let s = JetSpace::new(&["t"], &["x"]);
        let args = vec![t(), j(&[]), j(&[1])];
        let big_f = Expr::apply("F", args.clone());
        let eq = &j(&[2]) - &big_f;
        let g = Expr::apply("g", args.clone());
        let gd = |slot| Expr::func(FnApp::new("g", args.clone()).with_slot_derivative(slot));

        let got = restrict_on_solutions(&s, &(&j(&[2]) * &gd(2)), &[eq.clone()]).unwrap();
        assert_eq!(got, &big_f * &gd(2));
        assert_eq!(
            restrict_on_solutions(&s, &Expr::param("u"), &[eq.clone()]).unwrap(),
            Expr::param("u")
        );
        let dg = total_derivative(&s, &g, 0).unwrap();
        let got = restrict_on_solutions(&s, &dg, &[eq]).unwrap();
        assert_eq!(got, &(&gd(0) + &(&gd(1) * &j(&[1]))) + &(&gd(2) * &big_f));
    }

    #[test]
    fn implicit_equations_are_rejected() {
        let s = JetSpace::new(&["t"], &["x"]);
        let e = &j(&[2]).pow(2).unwrap() + &j(&[]);
        assert!(matches!(
            SolutionSet::new(&s, &[e]),
            Err(Error::NotSemiExplicit(_))
        ));
    }

    #[test]
    fn second_order_conditions_damped() {
        let s = JetSpace::new(&["t"], &["x"]);
        let b = Expr::param("b");
        let e = &(&j(&[2]) + &(&b * &j(&[1]))) + &j(&[]);
        let hc = second_order_hc(&s, &[e]).unwrap();
        let failing: Vec<_> = hc.failing().collect();
        assert_eq!(failing.len(), 1);
        assert_eq!(failing[0].family, 2);
        assert_eq!(failing[0].expr, b);
        assert!(second_order_hc(&s, &[&j(&[2]) + &j(&[])])
            .unwrap()
            .satisfied());
    }

    #[test]
    fn gateaux_oscillator() {
        let s = JetSpace::new(&["t"], &["u"]);
        let l = &j(&[1]).pow(2).unwrap().scale(&rational(-1, 2))
            + &j(&[]).pow(2).unwrap().scale(&rational(1, 2));
        let e = vec![&j(&[2]) + &j(&[])];
        let one_minus = &Expr::one() - &t();
        let eta = vec![&t().pow(2).unwrap() * &one_minus.pow(2).unwrap()];
        let phi = vec![t().pow(2).unwrap()];
        let domain = vec![(Rational::zero(), Rational::from_integer(1.into()))];
        let params = BTreeMap::new();
        let input = GateauxInput {
            lagrangian: &l,
            equations: &e,
            sections: &phi,
            variations: &eta,
            domain: &domain,
            params: &params,
        };
        let r = gateaux_check(&s, &input).unwrap();
        assert!(r.agrees);
        assert!(matches!(r.derivative, Value::Exact(_)));

        let zero = vec![Expr::zero()];
        let input = GateauxInput {
            variations: &zero,
            ..input
        };
        let r = gateaux_check(&s, &input).unwrap();
        assert_eq!(r.derivative, Value::Exact(Rational::zero()));

        let l2 = j(&[]).pow(2).unwrap();
        let e2 = vec![j(&[1])];
        let input = GateauxInput {
            lagrangian: &l2,
            equations: &e2,
            variations: &eta,
            ..input
        };
        assert!(!gateaux_check(&s, &input).unwrap().agrees);

        let bad = vec![t()];
        let input = GateauxInput {
            lagrangian: &l,
            equations: &e,
            variations: &bad,
            ..input
        };
        assert!(matches!(
            gateaux_check(&s, &input),
            Err(Error::BoundaryNotVanishing(_))
        ));
    }
}
