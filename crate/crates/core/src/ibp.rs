//! Rewriting modulo total divergences.
//!
//! Every rewrite records what it discarded in a [`DivergenceLedger`], so the
//! identity `original = rewritten + Σ D_i(density)` can always be audited.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::expr::{Atom, Expr, JetVar, Monomial, Names, Style, Var};
use crate::forms::{DeltaBasis, FunctionalForm};
use crate::jet::{total_derivative, JetSpace, LinDiffOp, LinDiffOpMatrix};
use crate::Rational;

/// Default cap on the number of representatives explored.
pub const DEFAULT_REPRESENTATIVE_CAP: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub direction: usize,
    pub density: FunctionalForm,
}

/// Discarded boundary terms `Σ D_i(density)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DivergenceLedger {
    entries: Vec<LedgerEntry>,
}

impl DivergenceLedger {
    pub fn new() -> Self {
        DivergenceLedger::default()
    }

    pub fn push(&mut self, direction: usize, density: FunctionalForm) {
        if !density.is_zero() {
            self.entries.push(LedgerEntry { direction, density });
        }
    }

    pub fn extend(&mut self, other: DivergenceLedger) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Densities merged per direction.
    pub fn merged(&self) -> Vec<LedgerEntry> {
        let mut out: Vec<LedgerEntry> = Vec::new();
        for e in &self.entries {
            match out
                .iter_mut()
                .find(|o| o.direction == e.direction && o.density.degree() == e.density.degree())
            {
                Some(o) => o.density = o.density.add(&e.density),
                None => out.push(e.clone()),
            }
        }
        out.retain(|e| !e.density.is_zero());
        out
    }

    /// `Σ D_i(density)` as a form of the given degree.
    pub fn divergence(&self, space: &JetSpace, degree: usize) -> Result<FunctionalForm> {
        let mut out = FunctionalForm::zero(degree);
        for e in &self.entries {
            out = out.add(&e.density.total_derivative(space, e.direction)?);
        }
        Ok(out)
    }

    /// Whether `original = rewritten + Σ D_i(density)` holds exactly.
    pub fn accounts_for(
        &self,
        space: &JetSpace,
        original: &FunctionalForm,
        rewritten: &FunctionalForm,
    ) -> Result<bool> {
        let div = self.divergence(space, original.degree())?;
        Ok(original.sub(rewritten).sub(&div).is_zero())
    }

    pub fn render(&self, names: &dyn Names, style: Style) -> Vec<String> {
        self.merged()
            .iter()
            .map(|e| {
                let dir = names.base_name(e.direction);
                let body = e.density.render(names, style);
                match style {
                    Style::Ascii => format!("D[{body}, {dir}]"),
                    Style::Latex => format!("D_{{{dir}}}\\left({body}\\right)"),
                }
            })
            .collect()
    }
}

/// Move one derivative off factor `slot` of `coeff · factors`, in the given
/// factor order.
///
/// `c · … ∧ δu_{I+i} ∧ …` becomes `−(D_i c) · … ∧ δu_I ∧ … − Σ c · (other
/// factor prolonged) ∧ δu_I`, plus `D_i(c · … ∧ δu_I ∧ …)` in the ledger.
pub fn shift_derivative_off_slot(
    space: &JetSpace,
    coeff: &Expr,
    factors: &[DeltaBasis],
    slot: usize,
    direction: usize,
) -> Result<(FunctionalForm, DivergenceLedger)> {
    let target = factors
        .get(slot)
        .ok_or(Error::NoDerivativeInSlot { slot, direction })?;
    let lowered = target
        .index
        .decremented(direction)
        .ok_or(Error::NoDerivativeInSlot { slot, direction })?;
    let mut base = factors.to_vec();
    base[slot] = DeltaBasis::new(target.field, lowered);

    let mut out = FunctionalForm::zero(factors.len());
    out.add_term(-&total_derivative(space, coeff, direction)?, base.clone());
    for other in 0..base.len() {
        if other == slot {
            continue;
        }
        let mut g = base.clone();
        g[other] = g[other].prolonged(direction);
        space.check_order(g[other].order())?;
        out.add_term(-coeff, g);
    }
    let mut ledger = DivergenceLedger::new();
    ledger.push(direction, FunctionalForm::monomial(coeff.clone(), base));
    Ok((out, ledger))
}

/// Put one derivative onto the single factor of `m · δb` by recognising
/// `m = D_i(g) · r` with `g = u_{J−i}^{q+1}/(q+1)`:
/// `m δb ↦ −g D_i(r) δb − g r δb_{+i}`, ledger `D_i(g r δb)`.
fn shift_derivative_onto_slot(
    space: &JetSpace,
    coeff: &Rational,
    m: &Monomial,
    target: &JetVar,
    direction: usize,
    b: &DeltaBasis,
) -> Result<Option<(FunctionalForm, DivergenceLedger)>> {
    let atom = Atom::Jet(target.clone());
    if m.exponent_of(&atom) != 1 {
        return Ok(None);
    }
    let Some(lower_index) = target.index.decremented(direction) else {
        return Ok(None);
    };
    let lower = Atom::Jet(JetVar::new(target.field, lower_index));
    let q = m.exponent_of(&lower);
    if q < 0 {
        return Ok(None);
    }
    let r = Expr::term(coeff.clone(), m.without(&atom).without(&lower));
    let g = Expr::atom(lower)
        .pow(q + 1)?
        .scale(&crate::expr::rational(1, (q + 1) as i64));
    let prolonged = b.prolonged(direction);
    space.check_order(prolonged.order())?;
    let mut out = FunctionalForm::zero(1);
    out.add_term(
        -&(&g * &total_derivative(space, &r, direction)?),
        vec![b.clone()],
    );
    out.add_term(-&(&g * &r), vec![prolonged]);
    let mut ledger = DivergenceLedger::new();
    ledger.push(
        direction,
        FunctionalForm::monomial(&g * &r, vec![b.clone()]),
    );
    Ok(Some((out, ledger)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Representative {
    pub form: FunctionalForm,
    pub ledger: DivergenceLedger,
}

/// All 1-forms reachable from `form` by single-derivative shifts, keeping
/// every jet order at most `max_order`. The input comes first; the rest are
/// in breadth-first discovery order.
pub fn enumerate_representatives(
    space: &JetSpace,
    form: &FunctionalForm,
    max_order: u32,
    cap: usize,
) -> Result<Vec<Representative>> {
    if form.degree() != 1 {
        return Err(Error::InvalidArgument(
            "representatives are defined for 1-forms".into(),
        ));
    }
    let mut seen: BTreeSet<Vec<(Vec<DeltaBasis>, Expr)>> = BTreeSet::new();
    let key = |f: &FunctionalForm| {
        f.terms()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect::<Vec<_>>()
    };
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let start = Representative {
        form: form.clone(),
        ledger: DivergenceLedger::new(),
    };
    seen.insert(key(form));
    queue.push_back(start);
    while let Some(rep) = queue.pop_front() {
        for (next, ledger) in single_moves(space, &rep.form, max_order)? {
            if seen.insert(key(&next)) {
                if seen.len() > cap {
                    return Err(Error::CombinatorialLimit(cap));
                }
                let mut l = rep.ledger.clone();
                l.extend(ledger);
                queue.push_back(Representative {
                    form: next,
                    ledger: l,
                });
            }
        }
        out.push(rep);
    }
    Ok(out)
}

fn single_moves(
    space: &JetSpace,
    form: &FunctionalForm,
    max_order: u32,
) -> Result<Vec<(FunctionalForm, DivergenceLedger)>> {
    let mut moves = Vec::new();
    let wide = space
        .clone()
        .with_max_order(space.max_order().max(max_order + 1));
    for (b, c) in form.one_form_terms() {
        for (m, k) in c.terms() {
            let piece = FunctionalForm::monomial(Expr::term(k.clone(), m.clone()), vec![b.clone()]);
            let rest = form.sub(&piece);
            let mut candidates = Vec::new();
            for direction in 0..space.base_count() {
                if b.index.count(direction) > 0 {
                    let coeff = Expr::term(k.clone(), m.clone());
                    candidates.push(shift_derivative_off_slot(
                        &wide,
                        &coeff,
                        &[b.clone()],
                        0,
                        direction,
                    )?);
                }
            }
            let jets: BTreeSet<JetVar> = m
                .factors()
                .iter()
                .filter_map(|(a, _)| match a {
                    Atom::Jet(j) => Some(j.clone()),
                    _ => None,
                })
                .collect();
            for target in &jets {
                for direction in 0..space.base_count() {
                    if let Some(mv) = shift_derivative_onto_slot(&wide, k, m, target, direction, b)?
                    {
                        candidates.push(mv);
                    }
                }
            }
            for (replacement, ledger) in candidates {
                let next = rest.add(&replacement);
                if next.jet_order() <= max_order {
                    moves.push((next, ledger));
                }
            }
        }
    }
    Ok(moves)
}

/// The representative whose factors all have order zero, with its ledger.
pub fn to_euler_form_with_ledger(
    space: &JetSpace,
    form: &FunctionalForm,
) -> Result<(FunctionalForm, DivergenceLedger)> {
    if form.degree() != 1 {
        return Err(Error::InvalidArgument("Euler forms are 1-forms".into()));
    }
    let mut current = form.clone();
    let mut ledger = DivergenceLedger::new();
    loop {
        let Some((factors, coeff)) = current
            .terms()
            .find(|(f, _)| f[0].order() > 0)
            .map(|(f, c)| (f.clone(), c.clone()))
        else {
            return Ok((current, ledger));
        };
        let direction = factors[0].index.directions()[0];
        let (replacement, l) = shift_derivative_off_slot(space, &coeff, &factors, 0, direction)?;
        current = current
            .sub(&FunctionalForm::monomial(coeff, factors))
            .add(&replacement);
        ledger.extend(l);
    }
}

pub fn to_euler_form(space: &JetSpace, form: &FunctionalForm) -> Result<FunctionalForm> {
    to_euler_form_with_ledger(space, form).map(|(f, _)| f)
}

/// Euler expressions `E_α` of a 1-form, one per field.
pub fn euler_expressions(space: &JetSpace, form: &FunctionalForm) -> Result<Vec<Expr>> {
    let e = to_euler_form(space, form)?;
    Ok((0..space.field_count())
        .map(|a| e.coefficient(&[DeltaBasis::new(a, Default::default())]))
        .collect())
}

/// Rewrite a 2-form so every term reads `c · δu^β_J ∧ δu^α`.
pub fn reduce_second_slot_with_ledger(
    space: &JetSpace,
    form: &FunctionalForm,
) -> Result<(FunctionalForm, DivergenceLedger)> {
    if form.degree() != 2 {
        return Err(Error::InvalidArgument(
            "second-slot reduction needs a 2-form".into(),
        ));
    }
    let mut current = form.clone();
    let mut ledger = DivergenceLedger::new();
    loop {
        let Some((factors, coeff)) = current
            .terms()
            .find(|(f, _)| f[1].order() > 0)
            .map(|(f, c)| (f.clone(), c.clone()))
        else {
            return Ok((current, ledger));
        };
        let direction = factors[1].index.directions()[0];
        let (replacement, l) = shift_derivative_off_slot(space, &coeff, &factors, 1, direction)?;
        current = current
            .sub(&FunctionalForm::monomial(coeff, factors))
            .add(&replacement);
        ledger.extend(l);
    }
}

pub fn reduce_second_slot(space: &JetSpace, form: &FunctionalForm) -> Result<FunctionalForm> {
    reduce_second_slot_with_ledger(space, form).map(|(f, _)| f)
}

/// The operator `S − S*` of a 2-form, where `S[α][β] = Σ c D_J` collects the
/// reduced terms `c δu^β_J ∧ δu^α`. It vanishes exactly when the 2-form is
/// zero modulo divergences.
pub fn two_form_operator(space: &JetSpace, form: &FunctionalForm) -> Result<LinDiffOpMatrix> {
    let reduced = reduce_second_slot(space, form)?;
    let n = space.field_count();
    let mut s = LinDiffOpMatrix::zeros(n, n);
    for (f, c) in reduced.terms() {
        let (hi, lo) = (&f[0], &f[1]);
        let mut op = s.get(lo.field, hi.field).clone();
        op.add_term(hi.index.clone(), c.clone());
        s.set(lo.field, hi.field, op);
    }
    let adj = s.adjoint(space)?;
    let mut out = LinDiffOpMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            out.set(a, b, s.get(a, b).sub(adj.get(a, b)));
        }
    }
    Ok(out)
}

/// The reduced 2-form `½ Σ M[α][β]_J δu^β_J ∧ δu^α` of a skew-adjoint
/// operator matrix; a normal form modulo divergences.
pub fn two_form_from_operator(m: &LinDiffOpMatrix) -> FunctionalForm {
    let mut out = FunctionalForm::zero(2);
    let half = crate::expr::rational(1, 2);
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            for (index, c) in m.get(a, b).terms() {
                out.add_term(
                    c.scale(&half),
                    vec![
                        DeltaBasis::new(b, index.clone()),
                        DeltaBasis::new(a, Default::default()),
                    ],
                );
            }
        }
    }
    out
}

/// Greedy Lagrangian order reduction.
///
/// Repeatedly takes the monomial of highest jet order and rewrites it as
/// `D_i(g r) − g D_i(r)` with `g = u_{J−i}^{q+1}/(q+1)`, accepting only when
/// the remainder has strictly lower order than the monomial.
pub fn reduce_lagrangian_order(
    space: &JetSpace,
    lagrangian: &Expr,
) -> Result<(Expr, DivergenceLedger)> {
    let mut current = lagrangian.clone();
    let mut ledger = DivergenceLedger::new();
    'outer: loop {
        let mut monomials: Vec<(Monomial, Rational)> = current
            .terms()
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        monomials
            .sort_by(|(a, _), (b, _)| b.jet_order().cmp(&a.jet_order()).then_with(|| a.cmp(b)));
        for (m, k) in &monomials {
            let Some(order) = m.jet_order() else { continue };
            if order == 0 {
                continue;
            }
            for (atom, _) in m.factors() {
                let Atom::Jet(target) = atom else { continue };
                if target.order() != order {
                    continue;
                }
                for direction in 0..space.base_count() {
                    if let Some((remainder, density)) =
                        lower_monomial(space, k, m, target, direction)?
                    {
                        if remainder.jet_order() < order || remainder.is_zero() {
                            current = &(&current - &Expr::term(k.clone(), m.clone())) + &remainder;
                            ledger.push(direction, FunctionalForm::scalar(density));
                            continue 'outer;
                        }
                    }
                }
            }
        }
        return Ok((current, ledger));
    }
}

fn lower_monomial(
    space: &JetSpace,
    coeff: &Rational,
    m: &Monomial,
    target: &JetVar,
    direction: usize,
) -> Result<Option<(Expr, Expr)>> {
    let atom = Atom::Jet(target.clone());
    if m.exponent_of(&atom) != 1 {
        return Ok(None);
    }
    let Some(lower_index) = target.index.decremented(direction) else {
        return Ok(None);
    };
    let lower = Atom::Jet(JetVar::new(target.field, lower_index));
    let q = m.exponent_of(&lower);
    let r = Expr::term(coeff.clone(), m.without(&atom).without(&lower));
    let g = Expr::atom(lower)
        .pow(q + 1)?
        .scale(&crate::expr::rational(1, (q + 1) as i64));
    let remainder = -&(&g * &total_derivative(space, &r, direction)?);
    Ok(Some((remainder, &g * &r)))
}

/// Apply a 1-form to concrete variations: `Σ c_{αI} D_I η^α` with the
/// variations given as expressions in the base variables.
pub fn pair_one_form(space: &JetSpace, form: &FunctionalForm, eta: &[Expr]) -> Result<Expr> {
    let mut out = Expr::zero();
    for (b, c) in form.one_form_terms() {
        let d = crate::jet::total_derivative_multi(space, &eta[b.field], &b.index)?;
        out += &(c * &d);
    }
    Ok(out)
}

/// True when the jet variable `v` occurs in `e`.
pub fn mentions_jet(e: &Expr, v: &JetVar) -> bool {
    e.contains_var(&Var::Jet(v.clone()))
}

/// `LinDiffOp` acting on field `beta` read off from a 1-form.
pub fn one_form_operator(form: &FunctionalForm, beta: usize) -> LinDiffOp {
    let mut op = LinDiffOp::zero();
    for (b, c) in form.one_form_terms().filter(|(b, _)| b.field == beta) {
        op.add_term(b.index.clone(), c.clone());
    }
    op
}
