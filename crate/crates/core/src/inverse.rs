//! Multiplier and nonlinear-transformation inverse problems.
//!
//! An ansatz with unknown functions turns the system into `E'`; the
//! Helmholtz residual of `E'` must vanish, and its coefficients form the
//! determining system. The solver handles linear algebraic elimination and
//! first-order constant-coefficient linear ODEs in one unknown.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{rational, Atom, Expr, FnApp, FnDef, Monomial, MultiIndex, Var};
use crate::jet::{total_derivative, JetSpace};
use crate::variationality::{helmholtz_residual, verdict_from_residual, SolutionSet, Verdict};
use crate::Rational;

/// An unknown function together with the variables it may depend on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unknown {
    pub name: String,
    pub args: Vec<Var>,
}

impl Unknown {
    pub fn new(name: &str, args: Vec<Var>) -> Self {
        Unknown {
            name: name.to_string(),
            args,
        }
    }

    pub fn constant(name: &str) -> Self {
        Unknown::new(name, Vec::new())
    }

    pub fn app(&self) -> FnApp {
        FnApp::new(
            self.name.as_str(),
            self.args.iter().map(Expr::var).collect(),
        )
    }

    pub fn application(&self) -> Expr {
        Expr::func(self.app())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnsatzKind {
    /// `diag(λ_1, …, λ_n)`.
    Diagonal(Vec<String>),
    /// Full matrix of unknown names, row-major.
    Matrix(Vec<Vec<String>>),
    /// Euler form `F_β δu^β` with polynomial `F_β` of bounded degree; with no
    /// transforms the unknowns occur in the equations themselves.
    Nonlinear {
        transforms: Vec<String>,
        degree: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ansatz {
    pub kind: AnsatzKind,
    pub unknowns: Vec<Unknown>,
}

impl Ansatz {
    pub fn unknown(&self, name: &str) -> Result<&Unknown> {
        self.unknowns
            .iter()
            .find(|u| u.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("undeclared unknown {name}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Coefficient of `monomial · D_I` in the residual entry `(row, col)`.
    Residual {
        row: usize,
        col: usize,
        order: MultiIndex,
        monomial: Monomial,
    },
    /// Transform `field` must vanish on solutions; coefficient of `monomial`.
    Compatibility { field: usize, monomial: Monomial },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    pub expr: Expr,
    pub provenance: Provenance,
}

#[derive(Clone, Debug)]
pub struct DeterminingSystem {
    pub conditions: Vec<Condition>,
    /// Unknowns the conditions are posed in.
    pub unknowns: Vec<Unknown>,
    /// Declared unknowns and their polynomial expansions (nonlinear kind).
    pub expansions: Vec<(Unknown, Expr)>,
    /// The transformed system `E'`, in the unknowns.
    pub transformed: Vec<Expr>,
    pub equations: Vec<Expr>,
    pub ansatz: Ansatz,
    pub on_solutions: bool,
}

impl DeterminingSystem {
    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.conditions.iter().map(|c| c.expr.clone()).collect()
    }
}

fn wide(space: &JetSpace) -> JetSpace {
    space.clone().with_max_order(space.max_order() + 2)
}

pub fn multiplier_conditions(
    space: &JetSpace,
    equations: &[Expr],
    ansatz: &Ansatz,
    on_solutions: bool,
) -> Result<DeterminingSystem> {
    let n = equations.len();
    let entry = |name: &str| ansatz.unknown(name).map(Unknown::application);
    let matrix: Vec<Vec<Expr>> = match &ansatz.kind {
        AnsatzKind::Diagonal(names) => {
            if names.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "diagonal multiplier needs {n} entries"
                )));
            }
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                entry(&names[i])
                            } else {
                                Ok(Expr::zero())
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?
        }
        AnsatzKind::Matrix(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidArgument(format!(
                    "multiplier matrix must be {n}×{n}"
                )));
            }
            rows.iter()
                .map(|r| r.iter().map(|name| entry(name)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?
        }
        AnsatzKind::Nonlinear { .. } => {
            return Err(Error::InvalidArgument(
                "multiplier conditions need a multiplier ansatz".into(),
            ))
        }
    };
    let transformed: Vec<Expr> = matrix
        .iter()
        .map(|row| {
            row.iter()
                .zip(equations)
                .fold(Expr::zero(), |acc, (a, e)| &acc + &(a * e))
        })
        .collect();
    let set = if on_solutions {
        Some(SolutionSet::new(space, equations)?)
    } else {
        None
    };
    let conditions = residual_conditions(space, &transformed, set.as_ref(), &ansatz.unknowns)?;
    Ok(DeterminingSystem {
        conditions,
        unknowns: ansatz.unknowns.clone(),
        expansions: Vec::new(),
        transformed,
        equations: equations.to_vec(),
        ansatz: ansatz.clone(),
        on_solutions,
    })
}

/// Exponent vectors of total degree at most `degree` in `n` variables.
fn exponent_vectors(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn go(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            go(n, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(n, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|v| (v.iter().sum::<u32>(), std::cmp::Reverse(v.clone())));
    out
}

/// `Σ U_k x^k` over exponent vectors of degree at most `degree`, with one
/// constant unknown `U_k1_k2…` per monomial.
pub fn polynomial_expansion(u: &Unknown, degree: u32) -> (Expr, Vec<Unknown>) {
    let mut poly = Expr::zero();
    let mut coeffs = Vec::new();
    for exps in exponent_vectors(u.args.len(), degree) {
        let mut name = u.name.clone();
        for k in &exps {
            name.push('_');
            name.push_str(&k.to_string());
        }
        let c = Unknown::constant(&name);
        let mut term = c.application();
        for (v, &k) in u.args.iter().zip(&exps) {
            term = &term * &Expr::var(v).pow(k as i32).expect("nonnegative power");
        }
        poly += &term;
        coeffs.push(c);
    }
    (poly, coeffs)
}

pub fn nonlinear_conditions(
    space: &JetSpace,
    equations: &[Expr],
    ansatz: &Ansatz,
    on_solutions: bool,
) -> Result<DeterminingSystem> {
    let AnsatzKind::Nonlinear { transforms, degree } = &ansatz.kind else {
        return Err(Error::InvalidArgument(
            "nonlinear conditions need a nonlinear ansatz".into(),
        ));
    };
    let mut expansions = Vec::new();
    let mut unknowns = Vec::new();
    for u in &ansatz.unknowns {
        let (poly, coeffs) = polynomial_expansion(u, *degree);
        expansions.push((u.clone(), poly));
        unknowns.extend(coeffs);
    }
    let expand = |e: &Expr| -> Result<Expr> {
        let mut out = e.clone();
        for (u, poly) in &expansions {
            out = out.substitute_fn(
                &u.name,
                &FnDef {
                    params: u.args.clone(),
                    body: poly.clone(),
                },
            )?;
        }
        Ok(out)
    };
    let transformed: Vec<Expr> = if transforms.is_empty() {
        equations.iter().map(&expand).collect::<Result<_>>()?
    } else {
        if transforms.len() != space.field_count() {
            return Err(Error::InvalidArgument(format!(
                "{} transforms for {} fields",
                transforms.len(),
                space.field_count()
            )));
        }
        transforms
            .iter()
            .map(|name| ansatz.unknown(name).and_then(|u| expand(&u.application())))
            .collect::<Result<_>>()?
    };
    let set = if on_solutions || !transforms.is_empty() {
        Some(SolutionSet::new(space, equations)?)
    } else {
        None
    };
    let mut conditions = residual_conditions(
        space,
        &transformed,
        set.as_ref().filter(|_| on_solutions),
        &unknowns,
    )?;
    if let Some(set) = &set {
        if !transforms.is_empty() {
            for (field, f) in transformed.iter().enumerate() {
                let restricted = set.restrict(f)?;
                for (monomial, c) in split_by_free_variables(&restricted, &unknowns) {
                    push_pruned(
                        &mut conditions,
                        Condition {
                            expr: c.monic(),
                            provenance: Provenance::Compatibility { field, monomial },
                        },
                        None,
                        space,
                    );
                }
            }
        }
    }
    Ok(DeterminingSystem {
        conditions,
        unknowns,
        expansions,
        transformed,
        equations: equations.to_vec(),
        ansatz: ansatz.clone(),
        on_solutions,
    })
}

/// Coefficients of `e` with respect to base and jet variables that no
/// unknown depends on.
fn split_by_free_variables(e: &Expr, unknowns: &[Unknown]) -> BTreeMap<Monomial, Expr> {
    let bound: BTreeSet<Atom> = unknowns
        .iter()
        .flat_map(|u| u.args.iter().map(Var::to_atom))
        .collect();
    e.collect_by(|a| matches!(a, Atom::Base(_) | Atom::Jet(_)) && !bound.contains(a))
}

fn push_pruned(
    kept: &mut Vec<Condition>,
    c: Condition,
    set: Option<&SolutionSet>,
    space: &JetSpace,
) {
    if c.expr.is_zero() {
        return;
    }
    if kept
        .iter()
        .any(|k| c.expr.rational_multiple_of(&k.expr).is_some())
    {
        return;
    }
    let wide = wide(space);
    for k in kept.iter() {
        for i in 0..space.base_count() {
            let Ok(d) = total_derivative(&wide, &k.expr, i) else {
                continue;
            };
            let d = match set {
                Some(s) => match s.restrict(&d) {
                    Ok(d) => d,
                    Err(_) => continue,
                },
                None => d,
            };
            if !d.is_zero() && c.expr.rational_multiple_of(&d).is_some() {
                return;
            }
        }
    }
    kept.push(c);
}

/// Coefficient conditions of the Helmholtz residual on and above the
/// diagonal (the residual is skew-adjoint), highest derivative order first.
fn residual_conditions(
    space: &JetSpace,
    transformed: &[Expr],
    set: Option<&SolutionSet>,
    unknowns: &[Unknown],
) -> Result<Vec<Condition>> {
    let mut r = helmholtz_residual(space, transformed)?;
    if let Some(s) = set {
        r = s.restrict_matrix(&r)?;
    }
    let mut raw = Vec::new();
    for row in 0..r.nrows() {
        for col in row..r.ncols() {
            for (order, coeff) in r.get(row, col).terms() {
                for (monomial, c) in split_by_free_variables(coeff, unknowns) {
                    raw.push(Condition {
                        expr: c.monic(),
                        provenance: Provenance::Residual {
                            row,
                            col,
                            order: order.clone(),
                            monomial,
                        },
                    });
                }
            }
        }
    }
    raw.sort_by(|a, b| {
        let key = |c: &Condition| match &c.provenance {
            Provenance::Residual {
                row, col, order, ..
            } => (std::cmp::Reverse(order.order()), *row, *col),
            Provenance::Compatibility { field, .. } => (std::cmp::Reverse(0), *field, 0),
        };
        key(a).cmp(&key(b))
    });
    let mut kept = Vec::new();
    for c in raw {
        push_pruned(&mut kept, c, set, space);
    }
    Ok(kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Solved,
    Unsolved,
    NoNontrivialSolution,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::Unsolved => "unsolved",
            Status::NoNontrivialSolution => "no-nontrivial-solution",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeConstant {
    pub name: String,
    /// The solution degenerates when this constant is zero.
    pub nonzero: bool,
}

#[derive(Clone, Debug)]
pub struct SolutionReport {
    pub status: Status,
    /// Values of the declared unknowns.
    pub bindings: Vec<(Unknown, Expr)>,
    pub constants: Vec<FreeConstant>,
    /// Conditions left after partial elimination.
    pub remaining: Vec<Expr>,
    /// `E'` with the bindings substituted, when solved.
    pub transformed: Vec<Expr>,
    /// Variationality of `E'` after substitution, when solved.
    pub verdict: Option<Verdict>,
    pub notes: Vec<String>,
}

struct Solver<'a> {
    space: &'a JetSpace,
    unknowns: Vec<Unknown>,
    bindings: BTreeMap<String, FnDef>,
    conditions: Vec<Expr>,
    constants: Vec<String>,
    taken: BTreeSet<String>,
}

impl Solver<'_> {
    fn unknown(&self, name: &str) -> Option<&Unknown> {
        self.unknowns.iter().find(|u| u.name == name)
    }

    fn unknown_apps(&self, e: &Expr) -> Vec<FnApp> {
        e.fn_apps()
            .into_iter()
            .filter(|a| self.unknown(&a.name).is_some())
            .collect()
    }

    fn fresh_constant(&mut self) -> Expr {
        let mut k = self.constants.len() + 1;
        loop {
            let name = format!("C{k}");
            if self.taken.insert(name.clone()) {
                self.constants.push(name.clone());
                return Expr::param(&name);
            }
            k += 1;
        }
    }

    fn bind(&mut self, name: &str, def: FnDef) -> Result<()> {
        let mut conditions = Vec::new();
        for c in &self.conditions {
            let c = c.substitute_fn(name, &def)?;
            if !c.is_zero() {
                conditions.push(c.monic());
            }
        }
        self.conditions = conditions;
        for d in self.bindings.values_mut() {
            d.body = d.body.substitute_fn(name, &def)?;
        }
        self.bindings.insert(name.to_string(), def);
        Ok(())
    }

    /// Some condition is free of unknowns yet nonzero.
    fn inconsistent(&self) -> bool {
        self.conditions
            .iter()
            .any(|c| self.unknown_apps(c).is_empty())
    }

    fn algebraic_step(&self) -> Option<(String, FnDef)> {
        let mut candidates: Vec<(usize, usize, usize)> = self
            .conditions
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let apps = self.unknown_apps(c);
                if apps.iter().any(|a| !a.is_underived()) {
                    return None;
                }
                let names: BTreeSet<_> = apps.iter().map(|a| a.name.clone()).collect();
                Some((names.len(), c.len(), i))
            })
            .collect();
        candidates.sort();
        for (_, _, i) in candidates {
            let c = &self.conditions[i];
            let mut apps = self.unknown_apps(c);
            apps.sort();
            for app in apps.iter().rev() {
                let u = self.unknown(&app.name)?;
                if *app != u.app() {
                    continue;
                }
                let atom = Atom::Func(app.clone());
                let coll = c.collect_by(|a| *a == atom);
                if coll
                    .keys()
                    .any(|m| !m.is_one() && m.exponent_of(&atom) != 1)
                {
                    continue;
                }
                let linear = coll
                    .iter()
                    .find(|(m, _)| !m.is_one())
                    .map(|(_, k)| k.clone())
                    .unwrap_or_default();
                let rest = coll.get(&Monomial::one()).cloned().unwrap_or_default();
                if linear.is_zero() || !self.unknown_apps(&linear).is_empty() {
                    continue;
                }
                let Ok(inv) = linear.inverse() else { continue };
                let body = -&(&rest * &inv);
                if body.mentions_fn(&u.name) {
                    continue;
                }
                let allowed: BTreeSet<Var> = u.args.iter().cloned().collect();
                let escapes = body
                    .vars()
                    .into_iter()
                    .any(|v| !matches!(v, Var::Param(_)) && !allowed.contains(&v));
                if escapes {
                    continue;
                }
                return Some((
                    u.name.clone(),
                    FnDef {
                        params: u.args.clone(),
                        body,
                    },
                ));
            }
        }
        None
    }

    /// `k1 U' + k0 U + h = 0` with constant `k0, k1` and `h` polynomial in
    /// the single argument of `U`.
    fn ode_step(&mut self) -> Result<Option<(String, FnDef)>> {
        for idx in 0..self.conditions.len() {
            let c = self.conditions[idx].clone();
            let apps = self.unknown_apps(&c);
            let names: BTreeSet<_> = apps.iter().map(|a| a.name.clone()).collect();
            if names.len() != 1 {
                continue;
            }
            let u = self.unknown(names.iter().next().unwrap()).unwrap().clone();
            let [Var::Base(t)] = u.args.as_slice() else {
                continue;
            };
            let t = *t;
            if apps.iter().any(|a| a.derivative_order() > 1) {
                continue;
            }
            let a0 = Atom::Func(u.app());
            let a1 = Atom::Func(u.app().with_slot_derivative(0));
            let coll = c.collect_by(|a| *a == a0 || *a == a1);
            let get = |atom: &Atom| {
                coll.iter()
                    .find(|(m, _)| m.factors() == [(atom.clone(), 1)])
                    .map(|(_, e)| e.clone())
                    .unwrap_or_default()
            };
            if coll.keys().any(|m| {
                !(m.is_one()
                    || m.factors() == [(a0.clone(), 1)]
                    || m.factors() == [(a1.clone(), 1)])
            }) {
                continue;
            }
            let (k1, k0) = (get(&a1), get(&a0));
            let h = coll.get(&Monomial::one()).cloned().unwrap_or_default();
            let constant = |e: &Expr| {
                e.vars().iter().all(|v| matches!(v, Var::Param(_))) && e.fn_apps().is_empty()
            };
            let polynomial_in_t = h
                .atoms()
                .iter()
                .all(|a| matches!(a, Atom::Param(_)) || *a == Atom::Base(t))
                && h.terms()
                    .all(|(m, _)| m.factors().iter().all(|(_, e)| *e >= 0));
            if k1.is_zero() || !constant(&k1) || !constant(&k0) || !polynomial_in_t {
                continue;
            }
            let Ok(inv1) = k1.inverse() else { continue };
            let tv = Expr::base(t);
            let cst = self.fresh_constant();
            let body = if k0.is_zero() {
                &cst - &integrate_polynomial(&(&h * &inv1), t)?
            } else {
                let Ok(inv0) = k0.inverse() else { continue };
                let rate = -&(&k0 * &inv1);
                let ratio = -&(&k1 * &inv0);
                let mut particular = Expr::zero();
                let mut dh = h.clone();
                let mut weight = Expr::one();
                while !dh.is_zero() {
                    particular += &(&weight * &dh);
                    weight = &weight * &ratio;
                    dh = dh.diff(&Var::Base(t));
                }
                &(&cst * &Expr::exp(&rate * &tv)) - &(&inv0 * &particular)
            };
            return Ok(Some((
                u.name.clone(),
                FnDef {
                    params: u.args.clone(),
                    body,
                },
            )));
        }
        Ok(None)
    }
}

fn integrate_polynomial(e: &Expr, t: usize) -> Result<Expr> {
    let tv = Atom::Base(t);
    let mut out = Expr::zero();
    for (m, c) in e.terms() {
        let k = m.exponent_of(&tv);
        let rest = Expr::term(c.clone(), m.without(&tv));
        out += &(&rest * &Expr::base(t).pow(k + 1)?).scale(&rational(1, k as i64 + 1));
    }
    Ok(out)
}

fn determinant(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        n => {
            let mut total = Expr::zero();
            for col in 0..n {
                if m[0][col].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != col)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][col] * &determinant(&minor);
                total = if col % 2 == 0 {
                    &total + &term
                } else {
                    &total - &term
                };
            }
            total
        }
    }
}

/// Whether the transformation encoded by the ansatz is invertible.
fn nondegenerate(sys: &DeterminingSystem, value: &dyn Fn(&str) -> Result<Expr>) -> Result<bool> {
    match &sys.ansatz.kind {
        AnsatzKind::Diagonal(names) => {
            for n in names {
                if value(n)?.is_zero() {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        AnsatzKind::Matrix(rows) => {
            let m = rows
                .iter()
                .map(|r| r.iter().map(|n| value(n)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok(!determinant(&m).is_zero())
        }
        AnsatzKind::Nonlinear { transforms, .. } => {
            if transforms.is_empty() {
                return Ok(true);
            }
            let fs = transforms
                .iter()
                .map(|n| value(n))
                .collect::<Result<Vec<_>>>()?;
            if fs.iter().any(Expr::is_zero) {
                return Ok(false);
            }
            let mut args: Vec<Var> = Vec::new();
            for n in transforms {
                for a in &sys.ansatz.unknown(n)?.args {
                    if !args.contains(a) {
                        args.push(a.clone());
                    }
                }
            }
            if args.len() != fs.len() {
                return Ok(true);
            }
            let jac: Vec<Vec<Expr>> = fs
                .iter()
                .map(|f| args.iter().map(|a| f.diff(a)).collect())
                .collect();
            Ok(!determinant(&jac).is_zero())
        }
    }
}

fn declared_value(
    declared: &[(Unknown, Expr)],
    name: &str,
    overrides: &BTreeMap<Var, Expr>,
) -> Result<Expr> {
    let (_, e) = declared
        .iter()
        .find(|(u, _)| u.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("undeclared unknown {name}")))?;
    e.substitute(overrides)
}

pub fn solve_determining(space: &JetSpace, sys: &DeterminingSystem) -> Result<SolutionReport> {
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for e in sys.equations.iter().chain(&sys.transformed) {
        for v in e.vars() {
            if let Var::Param(p) = v {
                taken.insert(p.to_string());
            }
        }
    }
    let mut solver = Solver {
        space,
        unknowns: sys.unknowns.clone(),
        bindings: BTreeMap::new(),
        conditions: sys.exprs(),
        constants: Vec::new(),
        taken,
    };
    let mut notes = Vec::new();
    loop {
        if solver.inconsistent() {
            break;
        }
        if let Some((name, def)) = solver.algebraic_step() {
            solver.bind(&name, def)?;
            continue;
        }
        if let Some((name, def)) = solver.ode_step()? {
            solver.bind(&name, def)?;
            continue;
        }
        break;
    }
    let _ = solver.space;
    let inconsistent = solver.inconsistent();
    if !solver.conditions.is_empty() && !inconsistent {
        notes.push("determining system outside the solvable classes".into());
        return Ok(SolutionReport {
            status: Status::Unsolved,
            bindings: Vec::new(),
            constants: Vec::new(),
            remaining: solver.conditions,
            transformed: Vec::new(),
            verdict: None,
            notes,
        });
    }
    if inconsistent {
        notes.push("the conditions force a contradiction".into());
        return Ok(SolutionReport {
            status: Status::NoNontrivialSolution,
            bindings: Vec::new(),
            constants: Vec::new(),
            remaining: solver.conditions,
            transformed: Vec::new(),
            verdict: None,
            notes,
        });
    }
    // constants never pinned down become free parameters
    let free: Vec<Unknown> = solver
        .unknowns
        .iter()
        .filter(|u| u.args.is_empty() && !solver.bindings.contains_key(&u.name))
        .cloned()
        .collect();
    for u in free {
        let c = solver.fresh_constant();
        solver.bind(&u.name, FnDef::constant(c))?;
    }
    let resolve = |e: &Expr, bindings: &BTreeMap<String, FnDef>| -> Result<Expr> {
        let mut out = e.clone();
        for (name, def) in bindings {
            out = out.substitute_fn(name, def)?;
        }
        Ok(out)
    };
    let declared: Vec<(Unknown, Expr)> = if sys.expansions.is_empty() {
        sys.unknowns
            .iter()
            .map(|u| Ok((u.clone(), resolve(&u.application(), &solver.bindings)?)))
            .collect::<Result<_>>()?
    } else {
        sys.expansions
            .iter()
            .map(|(u, poly)| Ok((u.clone(), resolve(poly, &solver.bindings)?)))
            .collect::<Result<_>>()?
    };
    let transformed = sys
        .transformed
        .iter()
        .map(|e| resolve(e, &solver.bindings))
        .collect::<Result<Vec<_>>>()?;
    if !nondegenerate(sys, &|n| declared_value(&declared, n, &BTreeMap::new()))? {
        notes.push("only degenerate solutions exist".into());
        return Ok(SolutionReport {
            status: Status::NoNontrivialSolution,
            bindings: declared,
            constants: Vec::new(),
            remaining: Vec::new(),
            transformed,
            verdict: None,
            notes,
        });
    }
    let mut constants = Vec::new();
    for name in &solver.constants {
        let mut zero = BTreeMap::new();
        zero.insert(Var::Param(name.as_str().into()), Expr::zero());
        let nonzero = !nondegenerate(sys, &|n| declared_value(&declared, n, &zero))?;
        constants.push(FreeConstant {
            name: name.clone(),
            nonzero,
        });
    }
    let set = if sys.on_solutions {
        Some(SolutionSet::new(space, &sys.equations)?)
    } else {
        None
    };
    let mut residual = helmholtz_residual(space, &transformed)?;
    if let Some(s) = &set {
        residual = s.restrict_matrix(&residual)?;
    }
    let verdict = verdict_from_residual(residual, sys.on_solutions);
    if !verdict.variational {
        return Err(Error::Invariant(
            "solution does not make the system variational".into(),
        ));
    }
    if matches!(sys.ansatz.kind, AnsatzKind::Nonlinear { ref transforms, .. } if !transforms.is_empty())
    {
        notes.push("transforms are required to vanish on solutions".into());
    }
    Ok(SolutionReport {
        status: Status::Solved,
        bindings: declared,
        constants,
        remaining: Vec::new(),
        transformed,
        verdict: Some(verdict),
        notes,
    })
}

/// `Σ_k c_k x^k` with the coefficient of the monomial `x^k`, for reading
/// off solved polynomial transforms.
pub fn coefficient_of(e: &Expr, monomial: &Expr) -> Rational {
    let Some((m, _)) = monomial.single_term() else {
        return Rational::zero();
    };
    e.terms()
        .find(|(n, _)| *n == m)
        .map(|(_, c)| c.clone())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::JetVar;

    fn t() -> Var {
        Var::Base(0)
    }
    fn jv(field: usize, k: u32) -> Var {
        Var::Jet(JetVar::new(field, MultiIndex::from_counts(&[k])))
    }
    fn j(field: usize, k: u32) -> Expr {
        Expr::var(&jv(field, k))
    }
    fn app(name: &str, args: &[Var]) -> Expr {
        Unknown::new(name, args.to_vec()).application()
    }
    fn d_app(name: &str, args: &[Var]) -> Expr {
        Expr::func(
            Unknown::new(name, args.to_vec())
                .app()
                .with_slot_derivative(0),
        )
    }

    #[test]
    fn damped_oscillator_multiplier() {
        let s = JetSpace::new(&["t"], &["u"]);
        let b = Expr::param("b");
        let e = &(&j(0, 2) + &(&b * &j(0, 1))) + &j(0, 0);
        let ansatz = Ansatz {
            kind: AnsatzKind::Diagonal(vec!["lambda".into()]),
            unknowns: vec![Unknown::new("lambda", vec![t()])],
        };
        let sys = multiplier_conditions(&s, &[e], &ansatz, false).unwrap();
        assert_eq!(sys.conditions.len(), 1);
        let expect = &d_app("lambda", &[t()]) - &(&b * &app("lambda", &[t()]));
        assert!(sys.conditions[0]
            .expr
            .rational_multiple_of(&expect)
            .is_some());

        let report = solve_determining(&s, &sys).unwrap();
        assert_eq!(report.status, Status::Solved);
        let c1 = Expr::param("C1");
        assert_eq!(report.bindings[0].1, &c1 * &Expr::exp(&b * &Expr::base(0)));
        assert!(report.constants[0].nonzero);
    }

    #[test]
    fn point_in_the_plane() {
        let s = JetSpace::new(&["t"], &["x", "y"]);
        let names = ["a", "b", "c", "d"];
        let ansatz = Ansatz {
            kind: AnsatzKind::Matrix(vec![
                vec!["a".into(), "b".into()],
                vec!["c".into(), "d".into()],
            ]),
            unknowns: names.iter().map(|n| Unknown::constant(n)).collect(),
        };
        let sys = multiplier_conditions(&s, &[j(0, 1), j(1, 1)], &ansatz, false).unwrap();
        let exprs = sys.exprs();
        assert_eq!(exprs.len(), 3);
        let a = app("a", &[]);
        assert!(exprs.contains(&a));
        assert!(exprs.contains(&app("d", &[])));
        assert!(exprs.contains(&(&app("b", &[]) + &app("c", &[]))));
        let report = solve_determining(&s, &sys).unwrap();
        assert_eq!(report.status, Status::Solved);
        let c1 = Expr::param("C1");
        let got: Vec<Expr> = report.bindings.iter().map(|(_, e)| e.clone()).collect();
        assert_eq!(got, vec![Expr::zero(), c1.clone(), -&c1, Expr::zero()]);
    }

    #[test]
    fn straight_line() {
        let s = JetSpace::new(&["t"], &["x", "y"]);
        let names = ["a", "b", "c", "d"];
        let ansatz = Ansatz {
            kind: AnsatzKind::Matrix(vec![
                vec!["a".into(), "b".into()],
                vec!["c".into(), "d".into()],
            ]),
            unknowns: names.iter().map(|n| Unknown::new(n, vec![t()])).collect(),
        };
        let eqs = [&j(0, 1) - &j(0, 0), &j(1, 1) - &j(1, 0)];
        let sys = multiplier_conditions(&s, &eqs, &ansatz, false).unwrap();
        let report = solve_determining(&s, &sys).unwrap();
        assert_eq!(report.status, Status::Solved);
        let b = &Expr::param("C1") * &Expr::exp(Expr::base(0).scale(&rational(-2, 1)));
        let got: Vec<Expr> = report.bindings.iter().map(|(_, e)| e.clone()).collect();
        assert_eq!(got, vec![Expr::zero(), b.clone(), -&b, Expr::zero()]);
    }

    #[test]
    fn first_order_ode_has_no_multiplier() {
        let s = JetSpace::new(&["t"], &["x"]);
        let f = Expr::apply("f", vec![Expr::base(0), j(0, 0)]);
        let e = &j(0, 1) - &f;
        let ansatz = Ansatz {
            kind: AnsatzKind::Diagonal(vec!["g".into()]),
            unknowns: vec![Unknown::new("g", vec![t(), jv(0, 0)])],
        };
        for on in [false, true] {
            let sys = multiplier_conditions(&s, &[e.clone()], &ansatz, on).unwrap();
            assert_eq!(sys.exprs()[0], app("g", &[t(), jv(0, 0)]));
            let report = solve_determining(&s, &sys).unwrap();
            assert_eq!(report.status, Status::NoNontrivialSolution);
        }
    }

    #[test]
    fn sonin_single_condition() {
        let s = JetSpace::new(&["t"], &["x"]);
        let args = [t(), jv(0, 0), jv(0, 1)];
        let fargs: Vec<Expr> = args.iter().map(Expr::var).collect();
        let big_f = Expr::apply("F", fargs.clone());
        let e = &j(0, 2) - &big_f;
        let ansatz = Ansatz {
            kind: AnsatzKind::Diagonal(vec!["g".into()]),
            unknowns: vec![Unknown::new("g", args.to_vec())],
        };
        let sys = multiplier_conditions(&s, &[e], &ansatz, true).unwrap();
        assert_eq!(sys.conditions.len(), 1);
        let g = app("g", &args);
        let gd = |slot| {
            Expr::func(
                Unknown::new("g", args.to_vec())
                    .app()
                    .with_slot_derivative(slot),
            )
        };
        let gf = &g * &big_f;
        let expect = &(&gd(0) + &(&gd(1) * &j(0, 1))) + &gf.diff(&jv(0, 1));
        assert!(sys.conditions[0]
            .expr
            .rational_multiple_of(&expect)
            .is_some());
        assert_eq!(
            solve_determining(&s, &sys).unwrap().status,
            Status::Unsolved
        );
    }

    #[test]
    fn nonlinear_point_example() {
        let s = JetSpace::new(&["t"], &["x", "y"]);
        let args = vec![jv(0, 1), jv(1, 1)];
        let ansatz = Ansatz {
            kind: AnsatzKind::Nonlinear {
                transforms: vec!["F".into(), "G".into()],
                degree: 2,
            },
            unknowns: vec![Unknown::new("F", args.clone()), Unknown::new("G", args)],
        };
        let sys = nonlinear_conditions(&s, &[j(0, 1), j(1, 1)], &ansatz, false).unwrap();
        let report = solve_determining(&s, &sys).unwrap();
        assert_eq!(report.status, Status::Solved);
        let c1 = Expr::param("C1");
        assert_eq!(report.bindings[0].1, &c1 * &j(1, 1));
        assert_eq!(report.bindings[1].1, -&(&c1 * &j(0, 1)));
        assert_eq!(report.constants.len(), 1);
        assert!(report.constants[0].nonzero);

        let constant = Ansatz {
            kind: AnsatzKind::Nonlinear {
                transforms: vec!["F".into(), "G".into()],
                degree: 0,
            },
            ..ansatz
        };
        let sys = nonlinear_conditions(&s, &[j(0, 1), j(1, 1)], &constant, false).unwrap();
        assert_eq!(
            solve_determining(&s, &sys).unwrap().status,
            Status::NoNontrivialSolution
        );
    }

    #[test]
    fn circles_family() {
        let s = JetSpace::new(&["t"], &["x", "y"]);
        let args = vec![jv(0, 0), jv(1, 0)];
        let f1 = app("f1", &args);
        let f2 = app("f2", &args);
        let wide = s.clone();
        let e1 = -&total_derivative(&wide, &(&j(0, 1) - &f1), 0).unwrap();
        let e2 = -&total_derivative(&wide, &(&j(1, 1) - &f2), 0).unwrap();
        let ansatz = Ansatz {
            kind: AnsatzKind::Nonlinear {
                transforms: vec![],
                degree: 1,
            },
            unknowns: vec![Unknown::new("f1", args.clone()), Unknown::new("f2", args)],
        };
        let sys = nonlinear_conditions(&s, &[e1, e2], &ansatz, false).unwrap();
        assert_eq!(sys.conditions.len(), 3);
        let report = solve_determining(&s, &sys).unwrap();
        assert_eq!(report.status, Status::Solved);
        let (g1, g2) = (&report.bindings[0].1, &report.bindings[1].1);
        assert!(g1.diff(&jv(0, 0)).is_zero());
        assert!(g2.diff(&jv(1, 0)).is_zero());
        assert_eq!(g1.diff(&jv(1, 0)), -&g2.diff(&jv(0, 0)));
        assert!(!g1.diff(&jv(1, 0)).is_zero());
        assert_eq!(report.constants.len(), 3);
    }
}
