//! The functional homotopy operator and Lagrangian reconstruction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{rational, Atom, Expr, Var};
use crate::forms::FunctionalForm;
use crate::ibp::{reduce_lagrangian_order, to_euler_form, two_form_operator, DivergenceLedger};
use crate::jet::{euler_lagrange_all, total_derivative_multi, JetSpace};
use crate::variationality::{is_variational, Verdict};

const HOMOTOPY_PARAM: &str = "__homotopy_s";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomotopyContext {
    center: Vec<Expr>,
}

impl HomotopyContext {
    /// Centred at `u₀ = 0`.
    pub fn new(space: &JetSpace) -> Self {
        HomotopyContext {
            center: vec![Expr::zero(); space.field_count()],
        }
    }

    pub fn with_center(space: &JetSpace, center: Vec<Expr>) -> Result<Self> {
        if center.len() != space.field_count() {
            return Err(Error::InvalidArgument("one centre entry per field".into()));
        }
        if center.iter().any(|c| !c.is_jet_free()) {
            return Err(Error::InvalidArgument(
                "the centre must not contain jet variables".into(),
            ));
        }
        Ok(HomotopyContext { center })
    }

    pub fn center(&self) -> &[Expr] {
        &self.center
    }

    /// `F[u₀]`: every jet `u^α_I` replaced by `∂_I u₀^α`.
    pub fn evaluate_at_center(&self, space: &JetSpace, e: &Expr) -> Result<Expr> {
        let mut bindings = BTreeMap::new();
        for j in e.jet_vars() {
            bindings.insert(
                Var::Jet(j.clone()),
                total_derivative_multi(space, &self.center[j.field], &j.index)?,
            );
        }
        e.substitute(&bindings)
    }
}

fn check_class(e: &Expr) -> Result<()> {
    for (m, _) in e.terms() {
        for (a, _) in m.factors() {
            let nested = match a {
                Atom::Func(app) => app.args.iter().any(|x| !x.is_jet_free()),
                Atom::Exp(x) | Atom::Sin(x) | Atom::Cos(x) => !x.is_jet_free(),
                _ => false,
            };
            if nested {
                return Err(Error::UnsupportedClass(format!(
                    "jet variables inside {a:?}"
                )));
            }
        }
    }
    Ok(())
}

/// `HF = ∫₀¹ 𝒦⌟F[u₀ + s(u − u₀)] s^{k−1} ds` for a form of degree `k ≥ 1`.
pub fn homotopy_h(
    space: &JetSpace,
    form: &FunctionalForm,
    ctx: &HomotopyContext,
) -> Result<FunctionalForm> {
    let k = form.degree();
    if k == 0 {
        return Err(Error::InvalidArgument(
            "the homotopy operator lowers degree; got a 0-form".into(),
        ));
    }
    let s = Var::Param(HOMOTOPY_PARAM.into());
    let s_expr = Expr::var(&s);
    let scaled = form.map_coefficients(|c| {
        check_class(c)?;
        let mut bindings = BTreeMap::new();
        for j in c.jet_vars() {
            let base = total_derivative_multi(space, &ctx.center[j.field], &j.index)?;
            let u = Expr::jet_var(j.clone());
            bindings.insert(Var::Jet(j), &base + &(&s_expr * &(&u - &base)));
        }
        c.substitute(&bindings)
    })?;
    let contracted = scaled.interior_euler(space, &ctx.center)?;
    let weight = s_expr.pow(k as i32 - 1)?;
    let s_atom = s.to_atom();
    contracted.map_coefficients(|c| {
        let mut out = Expr::zero();
        for (m, q) in (&weight * c).terms() {
            let p = m.exponent_of(&s_atom);
            let rest = Expr::term(q.clone(), m.without(&s_atom));
            out += &rest.scale(&rational(1, p as i64 + 1));
        }
        if out.contains_var(&s) {
            return Err(Error::UnsupportedClass(
                "homotopy parameter inside a nested argument".into(),
            ));
        }
        Ok(out)
    })
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// `H(E_α δu^α)`.
    pub homotopy: Expr,
    /// The final Lagrangian (reduced when requested).
    pub lagrangian: Expr,
    /// `homotopy − lagrangian` as divergences.
    pub ledger: DivergenceLedger,
    pub verdict: Verdict,
}

pub fn lagrangian_from_euler(
    space: &JetSpace,
    equations: &[Expr],
    ctx: &HomotopyContext,
    reduce: bool,
) -> Result<Reconstruction> {
    let verdict = is_variational(space, equations, false)?;
    if !verdict.variational {
        return Err(Error::NotVariational);
    }
    let homotopy = homotopy_h(space, &FunctionalForm::euler(equations), ctx)?
        .as_scalar()
        .unwrap_or_default();
    let (lagrangian, ledger) = if reduce {
        reduce_lagrangian_order(space, &homotopy)?
    } else {
        (homotopy.clone(), DivergenceLedger::new())
    };
    let wide = space
        .clone()
        .with_max_order(space.max_order().max(2 * homotopy.jet_order()));
    if euler_lagrange_all(&wide, &lagrangian)? != equations {
        return Err(Error::Invariant(
            "reconstructed Lagrangian does not reproduce the system".into(),
        ));
    }
    Ok(Reconstruction {
        homotopy,
        lagrangian,
        ledger,
        verdict,
    })
}

/// The projector `Hρ` onto antiexact forms, for degrees 0 and 1.
pub fn antiexact_project(
    space: &JetSpace,
    form: &FunctionalForm,
    ctx: &HomotopyContext,
) -> Result<FunctionalForm> {
    if form.degree() > 1 {
        return Err(Error::InvalidArgument(
            "antiexact projection is for degrees 0 and 1".into(),
        ));
    }
    homotopy_h(space, &form.fed()?, ctx)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceReport {
    /// `HρF + ρHF = F − s_{u₀}F` holds term by term.
    pub exact: bool,
    /// The same identity holds modulo total divergences.
    pub modulo_divergence: bool,
}

impl InvarianceReport {
    pub fn holds(&self) -> bool {
        self.exact || self.modulo_divergence
    }
}

pub fn invariance_check(
    space: &JetSpace,
    form: &FunctionalForm,
    ctx: &HomotopyContext,
) -> Result<InvarianceReport> {
    let mut lhs = homotopy_h(space, &form.fed()?, ctx)?;
    let rhs = if form.degree() == 0 {
        let c = form.as_scalar().unwrap_or_default();
        FunctionalForm::scalar(&c - &ctx.evaluate_at_center(space, &c)?)
    } else {
        lhs = lhs.add(&homotopy_h(space, form, ctx)?.fed()?);
        form.clone()
    };
    let diff = lhs.sub(&rhs);
    let exact = diff.is_zero();
    let modulo_divergence = exact
        || match diff.degree() {
            1 => to_euler_form(space, &diff)?.is_zero(),
            2 => two_form_operator(space, &diff)?.is_zero(),
            _ => false,
        };
    Ok(InvarianceReport {
        exact,
        modulo_divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{FnApp, MultiIndex};
    use crate::forms::DeltaBasis;

    fn sp() -> JetSpace {
        JetSpace::new(&["t"], &["u"])
    }
    fn j(c: &[u32]) -> Expr {
        Expr::jet(0, MultiIndex::from_counts(c))
    }

    #[test]
    fn harmonic_oscillator() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        let e = &j(&[2]) + &j(&[]);
        let h = homotopy_h(&s, &FunctionalForm::euler(&[e.clone()]), &ctx).unwrap();
        let expect = (&(&j(&[]) * &j(&[2])) + &j(&[]).pow(2).unwrap()).scale(&rational(1, 2));
        assert_eq!(h.as_scalar().unwrap(), expect);

        let r = lagrangian_from_euler(&s, &[e], &ctx, true).unwrap();
        let target = &j(&[1]).pow(2).unwrap().scale(&rational(-1, 2))
            + &j(&[]).pow(2).unwrap().scale(&rational(1, 2));
        assert_eq!(r.lagrangian, target);
    }

    #[test]
    fn zero_and_multiplied_forms() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        assert!(homotopy_h(&s, &FunctionalForm::zero(1), &ctx)
            .unwrap()
            .is_zero());

        let lam = Expr::apply("lambda", vec![Expr::base(0)]);
        let mut f = FunctionalForm::zero(1);
        f.add_term(
            -&(&lam * &j(&[1])),
            vec![DeltaBasis::new(0, MultiIndex::unit(0))],
        );
        f.add_term(
            &lam * &j(&[]),
            vec![DeltaBasis::new(0, MultiIndex::empty())],
        );
        let h = homotopy_h(&s, &f, &ctx).unwrap().as_scalar().unwrap();
        let target = &j(&[1]).pow(2).unwrap().scale(&rational(-1, 2))
            + &j(&[]).pow(2).unwrap().scale(&rational(1, 2));
        assert_eq!(h, &lam * &target);
    }

    #[test]
    fn not_variational_is_an_error() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        let e = &j(&[2]) + &(&Expr::param("b") * &j(&[1]));
        assert!(matches!(
            lagrangian_from_euler(&s, &[e], &ctx, true),
            Err(Error::NotVariational)
        ));
    }

    #[test]
    fn jets_inside_functions_are_unsupported() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        let e = Expr::func(FnApp::new("f", vec![j(&[])]));
        assert!(matches!(
            homotopy_h(&s, &FunctionalForm::euler(&[e]), &ctx),
            Err(Error::UnsupportedClass(_))
        ));
    }

    #[test]
    fn antiexact_examples() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        let u2 = FunctionalForm::scalar(j(&[]).pow(2).unwrap());
        assert_eq!(antiexact_project(&s, &u2, &ctx).unwrap(), u2);
        let c = FunctionalForm::scalar(Expr::int(7));
        assert!(antiexact_project(&s, &c, &ctx).unwrap().is_zero());
    }

    #[test]
    fn invariance_examples() {
        let s = sp();
        let ctx = HomotopyContext::new(&s);
        let f = FunctionalForm::scalar(j(&[]).pow(3).unwrap());
        assert!(invariance_check(&s, &f, &ctx).unwrap().exact);
        let g = FunctionalForm::euler(&[&j(&[2]) + &j(&[])]);
        assert!(invariance_check(&s, &g, &ctx).unwrap().holds());

        let centered =
            HomotopyContext::with_center(&s, vec![Expr::base(0).pow(2).unwrap()]).unwrap();
        let f = FunctionalForm::scalar(&j(&[1]) * &j(&[]));
        assert!(invariance_check(&s, &f, &centered).unwrap().exact);
    }
}
