mod common;

use std::collections::BTreeMap;

use common::*;
use varic_core::expr::rational;
use varic_core::forms::FunctionalForm;
use varic_core::homotopy::{
    antiexact_project, homotopy_h, invariance_check, lagrangian_from_euler, HomotopyContext,
};
use varic_core::ibp::{
    enumerate_representatives, reduce_lagrangian_order, reduce_second_slot, to_euler_form,
    two_form_operator,
};
use varic_core::identity::agree_at_random_points;
use varic_core::jet::{euler_lagrange, euler_lagrange_all, frechet, total_derivative};
use varic_core::variationality::{
    gateaux_check, helmholtz_residual, is_variational, restrict_on_solutions, second_order_hc,
    GateauxInput, Value,
};
use varic_core::{Expr, FnApp, LinDiffOp, MultiIndex, Style, Var};

fn half() -> varic_core::Rational {
    rational(1, 2)
}

fn app(name: &str, args: Vec<Expr>) -> Expr {
    Expr::apply(name, args)
}

fn slot(name: &str, args: Vec<Expr>, s: usize) -> Expr {
    Expr::func(FnApp::new(name, args).with_slot_derivative(s))
}

#[test]
fn normalization_agrees_with_random_evaluation() {
    let ut = jet(0, &[1]);
    let lhs = &(&Expr::int(2) * &(&ut * &ut)) - &ut.pow(2).unwrap();
    assert_eq!(lhs, ut.pow(2).unwrap());
    assert!(agree_at_random_points(&lhs, &ut.pow(2).unwrap(), 20, 7));

    let (u, utt) = (jet(0, &[]), jet(0, &[2]));
    let e = &(&(&(&utt + &u) * &u) - &(&u * &utt)) - &u.pow(2).unwrap();
    assert!(e.is_zero());
    let b = Expr::param("b");
    assert_eq!(
        &Expr::exp(&b * &t()) * &Expr::exp(-&(&b * &t())),
        Expr::one()
    );
}

#[test]
fn partial_derivative_of_unknown_product() {
    let args = vec![t(), jet(0, &[]), jet(0, &[1])];
    let g = app("g", args.clone());
    let f = app("F", args.clone());
    let d = (&g * &f).diff(&jv(0, &[1]));
    let expect = &(&slot("g", args.clone(), 2) * &f) + &(&g * &slot("F", args, 2));
    assert_eq!(d, expect);
}

#[test]
fn homotopy_scaling_substitution() {
    let s = Expr::param("s");
    let (u, ut) = (jet(0, &[]), jet(0, &[1]));
    let mut b = BTreeMap::new();
    b.insert(jv(0, &[]), &s * &u);
    b.insert(jv(0, &[1]), &s * &ut);
    assert_eq!(
        (&u * &ut).substitute(&b).unwrap(),
        &(&s.pow(2).unwrap() * &u) * &ut
    );
}

#[test]
fn total_derivatives_of_multipliers() {
    let sp = space_t();
    let lam = app("lambda", vec![t()]);
    let d = total_derivative(&sp, &(&lam * &jet(0, &[1])), 0).unwrap();
    assert_eq!(
        d,
        &(&slot("lambda", vec![t()], 0) * &jet(0, &[1])) + &(&lam * &jet(0, &[2]))
    );

    let sx = space_xy();
    let args = vec![t(), jet(0, &[]), jet(0, &[1])];
    let d = total_derivative(&sx, &app("g", args.clone()), 0).unwrap();
    let expect = &(&slot("g", args.clone(), 0) + &(&slot("g", args.clone(), 1) * &jet(0, &[1])))
        + &(&slot("g", args, 2) * &jet(0, &[2]));
    assert_eq!(d, expect);
}

#[test]
fn euler_lagrange_of_oscillator_lagrangians() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let l = (&ut.pow(2).unwrap().scale(&-half()) + &u.pow(2).unwrap().scale(&half())).clone();
    assert_eq!(euler_lagrange(&sp, &l, 0).unwrap(), &utt + &u);
    let h = (&(&u * &utt) + &u.pow(2).unwrap()).scale(&half());
    assert_eq!(euler_lagrange(&sp, &h, 0).unwrap(), &utt + &u);
}

#[test]
fn frechet_derivatives() {
    let sp = space_t();
    let b = Expr::param("b");
    let e = &(&jet(0, &[2]) + &(&b * &jet(0, &[1]))) + &jet(0, &[]);
    let f = frechet(&sp, &[e]);
    assert_eq!(f.get(0, 0).render(&sp, Style::Ascii), "D_t^2 + b*D_t + 1");

    let sh = space_tx();
    let f = frechet(&sh, &[&jet(0, &[1, 0]) - &jet(0, &[0, 2])]);
    let expect = LinDiffOp::derivative(MultiIndex::from_counts(&[1, 0]))
        .sub(&LinDiffOp::derivative(MultiIndex::from_counts(&[0, 2])));
    assert_eq!(f.get(0, 0), &expect);
}

/// `∫₀¹ (P f) g = ∫₀¹ f (P* g)` for `f, g` vanishing to high order at the
/// endpoints.
fn ibp_oracle(op: &LinDiffOp, seed: u64) {
    let sp = space_t();
    let mut g = Gen::new(seed);
    let adj = op.adjoint(&sp).unwrap();
    for _ in 0..5 {
        let f = bump(3, &g.poly_t(2));
        let h = bump(3, &g.poly_t(2));
        let apply = |p: &LinDiffOp, x: &Expr| {
            let mut out = Expr::zero();
            for (i, c) in p.terms() {
                out += &(c * &x.diff_n(&Var::Base(0), i.count(0)));
            }
            out
        };
        let dom = [(q(0, 1), q(1, 1))];
        let lhs =
            varic_core::variationality::integrate_exact(&(&apply(op, &f) * &h), &dom).unwrap();
        let rhs =
            varic_core::variationality::integrate_exact(&(&f * &apply(&adj, &h)), &dom).unwrap();
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn adjoint_matches_integration_by_parts() {
    let sp = space_t();
    let mut g = Gen::new(11);
    let a = g.poly_t(3);
    let op = LinDiffOp::term(MultiIndex::from_counts(&[1]), a.clone());
    let adj = op.adjoint(&sp).unwrap();
    let expect = LinDiffOp::term(MultiIndex::from_counts(&[1]), -&a)
        .add(&LinDiffOp::multiplication(-&a.diff(&Var::Base(0))));
    assert_eq!(adj, expect);
    ibp_oracle(&op, 1);
    let op2 = LinDiffOp::term(MultiIndex::from_counts(&[2]), g.poly_t(2));
    ibp_oracle(&op2, 2);
}

#[test]
fn functional_exterior_derivative_examples() {
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let e = &(&utt + &ut) + &u;
    let f = FunctionalForm::monomial(e, vec![db(0, &[])]).fed().unwrap();
    let expect = FunctionalForm::monomial(Expr::one(), vec![db(0, &[2]), db(0, &[])]).add(
        &FunctionalForm::monomial(Expr::one(), vec![db(0, &[1]), db(0, &[])]),
    );
    assert_eq!(f, expect);

    let uxx = jet(0, &[0, 2]);
    let f = FunctionalForm::monomial(uxx, vec![db(0, &[])])
        .fed()
        .unwrap();
    assert_eq!(
        f,
        FunctionalForm::monomial(Expr::one(), vec![db(0, &[0, 2]), db(0, &[])])
    );
}

#[test]
fn interior_euler_at_zero() {
    let sp = space_t();
    let e = &jet(0, &[2]) + &jet(0, &[]);
    let f = FunctionalForm::euler(&[e.clone()])
        .interior_euler(&sp, &[Expr::zero()])
        .unwrap();
    assert_eq!(f.as_scalar().unwrap(), &e * &jet(0, &[]));
}

#[test]
fn representatives_of_oscillator_and_heat() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let reps =
        enumerate_representatives(&sp, &FunctionalForm::euler(&[&utt + &u]), 2, 200).unwrap();
    let forms: Vec<FunctionalForm> = reps.iter().map(|r| r.form.clone()).collect();
    let m = |c: Expr, b| FunctionalForm::monomial(c, vec![b]);
    assert_eq!(forms.len(), 3);
    assert!(forms.contains(&m(&utt + &u, db(0, &[]))));
    assert!(forms.contains(&m(-&ut, db(0, &[1])).add(&m(u.clone(), db(0, &[])))));
    assert!(forms.contains(&m(u.clone(), db(0, &[2])).add(&m(u.clone(), db(0, &[])))));

    let sh = space_tx();
    let (ht, hx, hxx, hu) = (
        jet(0, &[1, 0]),
        jet(0, &[0, 1]),
        jet(0, &[0, 2]),
        jet(0, &[]),
    );
    let reps =
        enumerate_representatives(&sh, &FunctionalForm::euler(&[&ht - &hxx]), 2, 200).unwrap();
    let forms: Vec<FunctionalForm> = reps.iter().map(|r| r.form.clone()).collect();
    assert_eq!(forms.len(), 6);
    assert!(forms.contains(&m(ht.clone(), db(0, &[])).add(&m(hx.clone(), db(0, &[0, 1])))));

    // reverse rule on u_xx δu alone: −u_x δu_x, then u δu_xx
    let reps =
        enumerate_representatives(&sh, &FunctionalForm::euler(&[hxx.clone()]), 2, 200).unwrap();
    let forms: Vec<FunctionalForm> = reps.iter().map(|r| r.form.clone()).collect();
    assert!(forms.contains(&m(-&hx, db(0, &[0, 1]))));
    assert!(forms.contains(&m(hu, db(0, &[0, 2]))));
    for r in &reps {
        assert!(r
            .ledger
            .accounts_for(&sh, &FunctionalForm::euler(&[hxx.clone()]), &r.form)
            .unwrap());
    }
}

#[test]
fn reverse_shift_with_multiplier() {
    let sp = space_t();
    let lam = app("lambda", vec![t()]);
    let dlam = slot("lambda", vec![t()], 0);
    let (ut, utt) = (jet(0, &[1]), jet(0, &[2]));
    let form = FunctionalForm::monomial(&lam * &utt, vec![db(0, &[])]);
    let reps = enumerate_representatives(&sp, &form, 2, 200).unwrap();
    let expect = FunctionalForm::monomial(-&(&ut * &dlam), vec![db(0, &[])])
        .add(&FunctionalForm::monomial(-&(&ut * &lam), vec![db(0, &[1])]));
    assert!(reps.iter().any(|r| r.form == expect));
}

#[test]
fn second_slot_reduction_is_pairing_equivalent() {
    let sp = space_t();
    let mut g = Gen::new(5);
    let c = &g.poly_t(2) + &jet(0, &[]);
    let f = FunctionalForm::monomial(c.clone(), vec![db(0, &[1]), db(0, &[1])]);
    assert!(f.is_zero());
    let f = FunctionalForm::monomial(c.clone(), vec![db(0, &[]), db(0, &[1])]);
    let red = reduce_second_slot(&sp, &f).unwrap();
    assert_eq!(
        red,
        FunctionalForm::monomial(-&c, vec![db(0, &[1]), db(0, &[])])
    );
    let f = FunctionalForm::monomial(c.clone(), vec![db(0, &[2]), db(0, &[1])]);
    let red = reduce_second_slot(&sp, &f).unwrap();
    for k in 0..4 {
        let phi = vec![g.poly_t(3)];
        let eta = vec![bump(3, &g.poly_t(1 + k % 2))];
        let zeta = vec![bump(3, &g.poly_t(1))];
        assert_eq!(
            pair_two(&f, &phi, &eta, &zeta),
            pair_two(&red, &phi, &eta, &zeta)
        );
    }
}

#[test]
fn damped_oscillator_two_form_is_not_exact() {
    let sp = space_t();
    let two = FunctionalForm::monomial(Expr::one(), vec![db(0, &[2]), db(0, &[])]).add(
        &FunctionalForm::monomial(Expr::one(), vec![db(0, &[1]), db(0, &[])]),
    );
    let op = two_form_operator(&sp, &two).unwrap();
    assert!(!op.is_zero());
}

#[test]
fn euler_forms() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let f = FunctionalForm::monomial(-&ut, vec![db(0, &[1])])
        .add(&FunctionalForm::monomial(u.clone(), vec![db(0, &[])]));
    assert_eq!(
        to_euler_form(&sp, &f).unwrap(),
        FunctionalForm::euler(&[&utt + &u])
    );

    let sx = space_xy();
    let args = vec![jet(0, &[]), jet(1, &[])];
    let a = &jet(0, &[1]) - &app("f1", args.clone());
    let b = &jet(1, &[1]) - &app("f2", args);
    let f = FunctionalForm::monomial(a.clone(), vec![db(0, &[1])])
        .add(&FunctionalForm::monomial(b.clone(), vec![db(1, &[1])]));
    let expect = FunctionalForm::euler(&[
        -&total_derivative(&sx, &a, 0).unwrap(),
        -&total_derivative(&sx, &b, 0).unwrap(),
    ]);
    assert_eq!(to_euler_form(&sx, &f).unwrap(), expect);
}

#[test]
fn lagrangian_order_reduction() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let h = (&(&u * &utt) + &u.pow(2).unwrap()).scale(&half());
    let (l, ledger) = reduce_lagrangian_order(&sp, &h).unwrap();
    assert_eq!(
        l,
        &ut.pow(2).unwrap().scale(&-half()) + &u.pow(2).unwrap().scale(&half())
    );
    let div = ledger.divergence(&sp, 0).unwrap().as_scalar().unwrap();
    assert_eq!(&h - &l, div);

    let sh = space_tx();
    let l = &jet(0, &[0, 1]) * &jet(0, &[1, 0]);
    let (r, ledger) = reduce_lagrangian_order(&sh, &l).unwrap();
    assert_eq!(r, l);
    assert!(ledger.is_empty());
}

#[test]
fn helmholtz_residuals() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let b = Expr::param("b");
    assert!(helmholtz_residual(&sp, &[&utt + &u]).unwrap().is_zero());
    let r = helmholtz_residual(&sp, &[&(&utt + &(&b * &ut)) + &u]).unwrap();
    assert_eq!(
        r.get(0, 0),
        &LinDiffOp::term(MultiIndex::from_counts(&[1]), &Expr::int(2) * &b)
    );
    let sh = space_tx();
    let r = helmholtz_residual(&sh, &[&jet(0, &[1, 0]) - &jet(0, &[0, 2])]).unwrap();
    assert_eq!(
        r.get(0, 0),
        &LinDiffOp::term(MultiIndex::from_counts(&[1, 0]), Expr::int(2))
    );
}

#[test]
fn variationality_verdicts() {
    let sp = space_t();
    let f = app("f", vec![jet(0, &[])]);
    let v = is_variational(&sp, &[&jet(0, &[1]) - &f], false).unwrap();
    assert!(!v.variational);
    assert!(
        is_variational(&sp, &[&jet(0, &[2]) + &jet(0, &[])], false)
            .unwrap()
            .variational
    );
    let sx = space_xy();
    let e = [
        &-&jet(0, &[2]) + &jet(1, &[1]),
        &-&jet(1, &[2]) - &jet(0, &[1]),
    ];
    assert!(is_variational(&sx, &e, false).unwrap().variational);
}

#[test]
fn restriction_to_solutions() {
    let sp = space_t();
    let args = vec![t(), jet(0, &[]), jet(0, &[1])];
    let big_f = app("F", args.clone());
    let eq = &jet(0, &[2]) - &big_f;
    let gx = slot("g", args.clone(), 2);
    assert_eq!(
        restrict_on_solutions(&sp, &(&jet(0, &[2]) * &gx), &[eq.clone()]).unwrap(),
        &big_f * &gx
    );
    let dg = total_derivative(&sp, &app("g", args.clone()), 0).unwrap();
    let expect = &(&slot("g", args.clone(), 0) + &(&slot("g", args.clone(), 1) * &jet(0, &[1])))
        + &(&gx * &big_f);
    assert_eq!(restrict_on_solutions(&sp, &dg, &[eq]).unwrap(), expect);
}

#[test]
fn second_order_conditions_for_damped_oscillator() {
    let sp = space_t();
    let b = Expr::param("b");
    let e = &(&jet(0, &[2]) + &(&b * &jet(0, &[1]))) + &jet(0, &[]);
    let hc = second_order_hc(&sp, &[e]).unwrap();
    let failing: Vec<_> = hc.failing().collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0].family, 2);
    assert_eq!(failing[0].expr, b);
}

#[test]
fn gateaux_pairing_for_oscillator() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let l = &ut.pow(2).unwrap().scale(&-half()) + &u.pow(2).unwrap().scale(&half());
    let eqs = [&utt + &u];
    let phi = [t().pow(2).unwrap()];
    let eta = [bump(2, &Expr::one())];
    let params = BTreeMap::new();
    let dom = [(q(0, 1), q(1, 1))];
    let input = GateauxInput {
        lagrangian: &l,
        equations: &eqs,
        sections: &phi,
        variations: &eta,
        domain: &dom,
        params: &params,
    };
    let r = gateaux_check(&sp, &input).unwrap();
    assert!(r.agrees);
    assert!(matches!(r.derivative, Value::Exact(_)));
    assert_eq!(r.derivative, r.pairing);
}

#[test]
fn homotopy_formula_examples() {
    let sp = space_t();
    let ctx = HomotopyContext::new(&sp);
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let h = homotopy_h(&sp, &FunctionalForm::euler(&[&utt + &u]), &ctx).unwrap();
    assert_eq!(
        h.as_scalar().unwrap(),
        (&(&u * &utt) + &u.pow(2).unwrap()).scale(&half())
    );

    let lam = app("lambda", vec![t()]);
    let form = FunctionalForm::monomial(&lam * &-&ut, vec![db(0, &[1])])
        .add(&FunctionalForm::monomial(&lam * &u, vec![db(0, &[])]));
    let h = homotopy_h(&sp, &form, &ctx).unwrap();
    let expect = &lam * &(&ut.pow(2).unwrap().scale(&-half()) + &u.pow(2).unwrap().scale(&half()));
    assert_eq!(h.as_scalar().unwrap(), expect);
}

#[test]
fn lagrangian_reconstruction_examples() {
    let sp = space_t();
    let (u, ut, utt) = (jet(0, &[]), jet(0, &[1]), jet(0, &[2]));
    let rec = lagrangian_from_euler(&sp, &[&utt + &u], &HomotopyContext::new(&sp), true).unwrap();
    assert_eq!(
        rec.lagrangian,
        &ut.pow(2).unwrap().scale(&-half()) + &u.pow(2).unwrap().scale(&half())
    );

    let sx = space_xy();
    let (x, y, xt, yt) = (jet(0, &[]), jet(1, &[]), jet(0, &[1]), jet(1, &[1]));
    let e = vec![&-&jet(0, &[2]) + &yt, &-&jet(1, &[2]) - &xt];
    let rec = lagrangian_from_euler(&sx, &e, &HomotopyContext::new(&sx), true).unwrap();
    let ours = &(&xt.pow(2).unwrap() + &yt.pow(2).unwrap()).scale(&half())
        + &(&(&x * &yt) - &(&y * &xt)).scale(&half());
    let wide = sx.clone().with_max_order(6);
    assert_eq!(euler_lagrange_all(&wide, &rec.lagrangian).unwrap(), e);
    assert_eq!(euler_lagrange_all(&wide, &ours).unwrap(), e);
    let printed = &(&(&xt.pow(2).unwrap() + &yt.pow(2).unwrap()) + &(&x * &yt)) - &(&y * &xt);
    let twice: Vec<Expr> = e.iter().map(|x| x.scale(&rational(2, 1))).collect();
    assert_eq!(euler_lagrange_all(&wide, &printed).unwrap(), twice);
}

#[test]
fn antiexact_projection_and_invariance() {
    let sp = space_t();
    let ctx = HomotopyContext::new(&sp);
    let mut g = Gen::new(99);
    for _ in 0..5 {
        let f = g.jet_poly(&sp, 2, 4, 3);
        let p = antiexact_project(&sp, &FunctionalForm::scalar(f.clone()), &ctx).unwrap();
        let at_center = ctx.evaluate_at_center(&sp, &f).unwrap();
        assert_eq!(p.as_scalar().unwrap_or_default(), &f - &at_center);
    }
    let e = FunctionalForm::euler(&[&jet(0, &[2]) + &jet(0, &[])]);
    assert!(invariance_check(&sp, &e, &ctx).unwrap().holds());
}
