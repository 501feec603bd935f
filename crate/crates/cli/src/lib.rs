//! The `varic` command: runs one task on a `.vp` problem file and reports
//! the result as text, JSON or LaTeX.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value as Json};

use varic_core::dsl::{self, Problem, Task};
use varic_core::forms::FunctionalForm;
use varic_core::homotopy::{lagrangian_from_euler, HomotopyContext, Reconstruction};
use varic_core::ibp::{enumerate_representatives, DivergenceLedger, DEFAULT_REPRESENTATIVE_CAP};
use varic_core::identity::vanishes_at_random_points;
use varic_core::inverse::{
    multiplier_conditions, nonlinear_conditions, solve_determining, DeterminingSystem, Provenance,
    SolutionReport, Status,
};
use varic_core::jet::euler_lagrange_all;
use varic_core::variationality::{is_variational, second_order_hc, Verdict};
use varic_core::{Error, Expr, JetSpace, LinDiffOpMatrix, Style};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const NEGATIVE: i32 = 1;
    pub const UNSOLVED: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    pub const INTERNAL: i32 = 70;
}

const CORROBORATION_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Check,
    Lagrangian,
    Multiplier,
    Nonlinear,
    Helmholtz,
    Representatives,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Latex,
}

#[derive(Debug, Parser)]
#[command(
    name = "varic",
    version,
    about = "Variationality tests, Lagrangians and multipliers for differential equations"
)]
pub struct Args {
    pub task: TaskArg,
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Restrict to solutions of the system.
    #[arg(long)]
    pub on_solutions: bool,
    /// File holding the homotopy centre, one expression per field.
    #[arg(long, value_name = "FILE")]
    pub center: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub max_order: Option<u32>,
    /// Polynomial degree of nonlinear transformation ansätze.
    #[arg(long, value_name = "N")]
    pub degree: Option<u32>,
    /// Seed of the random-evaluation corroboration.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    /// Include wall-clock timing (makes output nondeterministic).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// A value in the output document. Mathematical objects carry both the
/// linear ASCII and the LaTeX rendering.
#[derive(Clone, Debug)]
enum Val {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
    Math { ascii: String, latex: String },
    List(Vec<Val>),
    Obj(Vec<(String, Val)>),
}

fn obj(items: Vec<(&str, Val)>) -> Val {
    Val::Obj(items.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn s(x: impl Into<String>) -> Val {
    Val::Str(x.into())
}

impl Val {
    fn to_json(&self) -> Json {
        match self {
            Val::Null => Json::Null,
            Val::Bool(b) => json!(b),
            Val::Int(n) => json!(n),
            Val::Str(x) => json!(x),
            Val::Math { ascii, latex } => json!({ "ascii": ascii, "latex": latex }),
            Val::List(items) => Json::Array(items.iter().map(Val::to_json).collect()),
            Val::Obj(items) => {
                let mut m = Map::new();
                for (k, v) in items {
                    m.insert(k.clone(), v.to_json());
                }
                Json::Object(m)
            }
        }
    }

    fn scalar_text(&self) -> Option<String> {
        match self {
            Val::Null => Some("none".into()),
            Val::Bool(b) => Some(b.to_string()),
            Val::Int(n) => Some(n.to_string()),
            Val::Str(x) => Some(x.clone()),
            Val::Math { ascii, .. } => Some(ascii.clone()),
            Val::List(items) if items.is_empty() => Some("[]".into()),
            _ => None,
        }
    }

    fn write_text(&self, out: &mut String, indent: usize, key: &str) {
        let pad = "  ".repeat(indent);
        if let Some(t) = self.scalar_text() {
            out.push_str(&format!("{pad}{key}: {t}\n"));
            return;
        }
        out.push_str(&format!("{pad}{key}:\n"));
        match self {
            Val::List(items) => {
                for (k, item) in items.iter().enumerate() {
                    item.write_text(out, indent + 1, &format!("[{k}]"));
                }
            }
            Val::Obj(items) => {
                for (k, v) in items {
                    v.write_text(out, indent + 1, k);
                }
            }
            _ => unreachable!("scalars handled above"),
        }
    }

    fn write_latex(&self, out: &mut String, path: &str) {
        match self {
            Val::Math { latex, .. } => out.push_str(&format!("% {path}\n\\[ {latex} \\]\n")),
            Val::List(items) => {
                for (k, item) in items.iter().enumerate() {
                    item.write_latex(out, &format!("{path}[{k}]"));
                }
            }
            Val::Obj(items) => {
                for (k, v) in items {
                    let p = if path.is_empty() {
                        k.clone()
                    } else {
                        format!("{path}.{k}")
                    };
                    v.write_latex(out, &p);
                }
            }
            other => out.push_str(&format!(
                "% {path}: {}\n",
                other.scalar_text().unwrap_or_default()
            )),
        }
    }
}

struct Ctx<'a> {
    space: &'a JetSpace,
}

impl Ctx<'_> {
    fn expr(&self, e: &Expr) -> Val {
        Val::Math {
            ascii: e.display(self.space, Style::Ascii).to_string(),
            latex: e.display(self.space, Style::Latex).to_string(),
        }
    }

    fn form(&self, f: &FunctionalForm) -> Val {
        Val::Math {
            ascii: f.render(self.space, Style::Ascii),
            latex: f.render(self.space, Style::Latex),
        }
    }

    fn matrix(&self, m: &LinDiffOpMatrix) -> Val {
        Val::List(
            m.rows()
                .iter()
                .map(|row| {
                    Val::List(
                        row.iter()
                            .map(|op| Val::Math {
                                ascii: op.render(self.space, Style::Ascii),
                                latex: op.render(self.space, Style::Latex),
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    fn ledger(&self, l: &DivergenceLedger) -> Val {
        let ascii = l.render(self.space, Style::Ascii);
        let latex = l.render(self.space, Style::Latex);
        Val::List(
            ascii
                .into_iter()
                .zip(latex)
                .map(|(ascii, latex)| Val::Math { ascii, latex })
                .collect(),
        )
    }

    fn verdict(&self, v: &Verdict) -> Val {
        obj(vec![
            ("variational", Val::Bool(v.variational)),
            ("on_solutions", Val::Bool(v.on_solutions)),
            ("residual", self.matrix(&v.residual)),
            ("obstruction", self.form(&v.obstruction)),
            (
                "spoiler",
                v.spoiler().map(|f| self.form(&f)).unwrap_or(Val::Null),
            ),
            (
                "notes",
                Val::List(v.notes.iter().map(|n| s(n.clone())).collect()),
            ),
        ])
    }

    fn reconstruction(&self, r: &Reconstruction) -> Val {
        obj(vec![
            ("lagrangian", self.expr(&r.lagrangian)),
            ("homotopy", self.expr(&r.homotopy)),
            ("ledger", self.ledger(&r.ledger)),
        ])
    }
}

/// Everything a task contributes to the output document.
struct Report {
    status: &'static str,
    code: i32,
    sections: Vec<(String, Val)>,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(status: &'static str, code: i32) -> Self {
        Report {
            status,
            code,
            sections: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn section(&mut self, key: &str, v: Val) {
        self.sections.push((key.to_string(), v));
    }
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(m) => Failure::Internal(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Outcome {
                        code: exit::SUCCESS,
                        stdout: text,
                        stderr: String::new(),
                    }
                }
                _ => Outcome::fail(exit::USAGE, text),
            };
        }
    };
    let started = Instant::now();
    let text = match std::fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            return Outcome::fail(
                exit::USAGE,
                format!("varic: cannot read {}: {e}", args.file.display()),
            )
        }
    };
    let file = args.file.display().to_string();
    let mut problem = match dsl::parse(&text) {
        Ok(p) => p,
        Err(d) => return Outcome::fail(exit::DATA, format!("{file}:{d}")),
    };
    if let Err(f) = apply_overrides(&args, &mut problem) {
        return failure_outcome(f);
    }
    let report = match run_task(&args, &problem) {
        Ok(r) => r,
        Err(f) => return failure_outcome(f),
    };

    let mut doc: Vec<(String, Val)> = vec![
        ("schema_version".into(), s(SCHEMA_VERSION)),
        ("task".into(), s(task_name(args.task))),
        ("file".into(), s(file)),
        ("status".into(), s(report.status)),
        ("exit_code".into(), Val::Int(report.code as i64)),
    ];
    doc.extend(report.sections);
    let all_passed = report.checks.iter().all(|(_, ok)| *ok);
    doc.push((
        "corroboration".into(),
        obj(vec![
            ("seed", Val::Int(args.seed as i64)),
            ("samples", Val::Int(CORROBORATION_SAMPLES as i64)),
            ("passed", Val::Bool(all_passed)),
            (
                "checks",
                Val::List(
                    report
                        .checks
                        .iter()
                        .map(|(n, ok)| {
                            obj(vec![("name", s(n.clone())), ("passed", Val::Bool(*ok))])
                        })
                        .collect(),
                ),
            ),
        ]),
    ));
    if args.timing {
        doc.push((
            "timing".into(),
            obj(vec![(
                "elapsed_ms",
                Val::Int(started.elapsed().as_millis() as i64),
            )]),
        ));
    }
    if !all_passed {
        return Outcome::fail(
            exit::INTERNAL,
            "varic: random-evaluation corroboration disagrees with the exact result",
        );
    }
    let doc = Val::Obj(doc);
    let stdout = match args.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&doc.to_json()).expect("serializable");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut out = String::new();
            if let Val::Obj(items) = &doc {
                for (k, v) in items {
                    v.write_text(&mut out, 0, k);
                }
            }
            out
        }
        Format::Latex => {
            let mut out = String::new();
            doc.write_latex(&mut out, "");
            out
        }
    };
    Outcome {
        code: report.code,
        stdout,
        stderr: String::new(),
    }
}

fn failure_outcome(f: Failure) -> Outcome {
    match f {
        Failure::Usage(m) => Outcome::fail(exit::USAGE, format!("varic: {m}")),
        Failure::Data(m) => Outcome::fail(exit::DATA, format!("varic: {m}")),
        Failure::Internal(m) => {
            Outcome::fail(exit::INTERNAL, format!("varic: internal error: {m}"))
        }
    }
}

fn task_name(t: TaskArg) -> &'static str {
    match t {
        TaskArg::Check => "check",
        TaskArg::Lagrangian => "lagrangian",
        TaskArg::Multiplier => "multiplier",
        TaskArg::Nonlinear => "nonlinear",
        TaskArg::Helmholtz => "helmholtz",
        TaskArg::Representatives => "representatives",
    }
}

fn apply_overrides(args: &Args, problem: &mut Problem) -> Result<(), Failure> {
    if let Some(k) = args.max_order {
        if k > dsl::MAX_ORDER_LIMIT {
            return Err(Failure::Usage(format!(
                "--max-order is limited to {}",
                dsl::MAX_ORDER_LIMIT
            )));
        }
        problem.options.max_order = k;
        let space = problem.space();
        for eq in &problem.equations {
            space
                .check_expr(&eq.expr)
                .map_err(|e| Failure::Data(format!("equation {}: {e}", eq.name)))?;
        }
    }
    if let Some(d) = args.degree {
        if d > dsl::MAX_DEGREE_LIMIT {
            return Err(Failure::Usage(format!(
                "--degree is limited to {}",
                dsl::MAX_DEGREE_LIMIT
            )));
        }
        problem.options.degree = d;
    }
    if args.on_solutions {
        problem.options.on_solutions = true;
    }
    if let Some(path) = &args.center {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let center = dsl::parse_expr_list(problem, &text)
            .map_err(|d| Failure::Data(format!("{}:{d}", path.display())))?;
        if center.len() != problem.fields.len() {
            return Err(Failure::Data(
                "the centre needs one expression per field".into(),
            ));
        }
        if center.iter().any(|c| !c.is_jet_free()) {
            return Err(Failure::Data(
                "the centre must not contain jet variables".into(),
            ));
        }
        problem.options.center = Some(center);
    }
    Ok(())
}

fn run_task(args: &Args, problem: &Problem) -> Result<Report, Failure> {
    let space = problem.space();
    let eqs = problem.equation_exprs();
    let ctx = Ctx { space: &space };
    let hctx = match &problem.options.center {
        Some(c) => HomotopyContext::with_center(&space, c.clone())?,
        None => HomotopyContext::new(&space),
    };
    let mut report = match args.task {
        TaskArg::Check => check(&ctx, &eqs, problem.options.on_solutions, args.seed)?,
        TaskArg::Lagrangian => lagrangian(&ctx, &eqs, &hctx, args.seed)?,
        TaskArg::Helmholtz => helmholtz(&ctx, &eqs, args.seed)?,
        TaskArg::Representatives => representatives(&ctx, &eqs)?,
        TaskArg::Multiplier | TaskArg::Nonlinear => {
            inverse(&ctx, args.task, problem, &hctx, args.seed)?
        }
    };
    report
        .sections
        .insert(0, ("problem".into(), problem_section(&ctx, problem)));
    Ok(report)
}

fn problem_section(ctx: &Ctx, p: &Problem) -> Val {
    obj(vec![
        (
            "base",
            Val::List(p.base.iter().map(|b| s(b.clone())).collect()),
        ),
        (
            "fields",
            Val::List(p.fields.iter().map(|f| s(f.name.clone())).collect()),
        ),
        (
            "parameters",
            Val::List(
                p.params
                    .iter()
                    .map(|prm| {
                        obj(vec![
                            ("name", s(prm.name.clone())),
                            ("nonzero", Val::Bool(prm.nonzero)),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "equations",
            Val::List(
                p.equations
                    .iter()
                    .map(|e| {
                        obj(vec![
                            ("name", s(e.name.clone())),
                            ("expr", ctx.expr(&e.expr)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("max_order", Val::Int(p.options.max_order as i64)),
        ("on_solutions", Val::Bool(p.options.on_solutions)),
    ])
}

/// Whether every coefficient of the residual vanishes at random points.
fn residual_vanishes_numerically(m: &LinDiffOpMatrix, seed: u64) -> bool {
    m.rows()
        .iter()
        .flatten()
        .flat_map(|op| op.terms().map(|(_, c)| c.clone()).collect::<Vec<_>>())
        .all(|c| vanishes_at_random_points(&c, CORROBORATION_SAMPLES, seed))
}

fn check(ctx: &Ctx, eqs: &[Expr], on_solutions: bool, seed: u64) -> Result<Report, Failure> {
    let verdict = is_variational(ctx.space, eqs, on_solutions)?;
    let mut r = if verdict.variational {
        Report::new("variational", exit::SUCCESS)
    } else {
        Report::new("not-variational", exit::NEGATIVE)
    };
    r.section("verdict", ctx.verdict(&verdict));
    r.checks.push((
        "residual vanishes at random points iff variational".into(),
        residual_vanishes_numerically(&verdict.residual, seed) == verdict.variational,
    ));
    Ok(r)
}

fn reconstruction_checks(
    ctx: &Ctx,
    rec: &Reconstruction,
    eqs: &[Expr],
    seed: u64,
) -> Result<Vec<(String, bool)>, Failure> {
    let order = rec.lagrangian.jet_order().max(rec.homotopy.jet_order());
    let wide = ctx
        .space
        .clone()
        .with_max_order(ctx.space.max_order().max(2 * order));
    let el = euler_lagrange_all(&wide, &rec.lagrangian)?;
    let ok = el
        .iter()
        .zip(eqs)
        .all(|(a, b)| vanishes_at_random_points(&(a - b), CORROBORATION_SAMPLES, seed));
    Ok(vec![(
        "Euler-Lagrange equations of the Lagrangian agree at random points".into(),
        ok,
    )])
}

fn lagrangian(
    ctx: &Ctx,
    eqs: &[Expr],
    hctx: &HomotopyContext,
    seed: u64,
) -> Result<Report, Failure> {
    match lagrangian_from_euler(ctx.space, eqs, hctx, true) {
        Ok(rec) => {
            let mut r = Report::new("variational", exit::SUCCESS);
            r.section("lagrangian", ctx.reconstruction(&rec));
            r.checks = reconstruction_checks(ctx, &rec, eqs, seed)?;
            Ok(r)
        }
        Err(Error::NotVariational) => {
            let verdict = is_variational(ctx.space, eqs, false)?;
            let mut r = Report::new("not-variational", exit::NEGATIVE);
            r.section("verdict", ctx.verdict(&verdict));
            Ok(r)
        }
        Err(e) => Err(e.into()),
    }
}

fn helmholtz(ctx: &Ctx, eqs: &[Expr], seed: u64) -> Result<Report, Failure> {
    let hc = second_order_hc(ctx.space, eqs)?;
    let verdict = is_variational(ctx.space, eqs, false)?;
    if hc.satisfied() != verdict.variational {
        return Err(Failure::Internal(
            "Helmholtz conditions and residual disagree".into(),
        ));
    }
    let mut r = if verdict.variational {
        Report::new("variational", exit::SUCCESS)
    } else {
        Report::new("not-variational", exit::NEGATIVE)
    };
    let conds = |list: &[varic_core::variationality::HcCondition]| {
        Val::List(
            list.iter()
                .map(|c| {
                    obj(vec![
                        ("family", Val::Int(c.family as i64)),
                        ("i", Val::Int(c.i as i64)),
                        ("j", Val::Int(c.j as i64)),
                        ("expr", ctx.expr(&c.expr)),
                    ])
                })
                .collect(),
        )
    };
    r.section(
        "helmholtz",
        obj(vec![
            ("satisfied", Val::Bool(hc.satisfied())),
            ("symmetrized", conds(&hc.symmetrized)),
            ("antisymmetric", conds(&hc.antisymmetric)),
        ]),
    );
    r.section("verdict", ctx.verdict(&verdict));
    let numeric = hc
        .symmetrized
        .iter()
        .all(|c| vanishes_at_random_points(&c.expr, CORROBORATION_SAMPLES, seed));
    r.checks.push((
        "conditions vanish at random points iff satisfied".into(),
        numeric == hc.satisfied(),
    ));
    Ok(r)
}

fn representatives(ctx: &Ctx, eqs: &[Expr]) -> Result<Report, Failure> {
    let form = FunctionalForm::euler(eqs);
    let order = eqs.iter().map(Expr::jet_order).max().unwrap_or(0);
    let reps = enumerate_representatives(ctx.space, &form, order, DEFAULT_REPRESENTATIVE_CAP)?;
    let mut sound = true;
    for rep in &reps {
        sound &= rep.ledger.accounts_for(ctx.space, &form, &rep.form)?;
    }
    if !sound {
        return Err(Failure::Internal(
            "a divergence ledger does not account for its rewrite".into(),
        ));
    }
    let mut r = Report::new("ok", exit::SUCCESS);
    r.section("count", Val::Int(reps.len() as i64));
    r.section(
        "representatives",
        Val::List(
            reps.iter()
                .map(|rep| {
                    obj(vec![
                        ("form", ctx.form(&rep.form)),
                        ("ledger", ctx.ledger(&rep.ledger)),
                    ])
                })
                .collect(),
        ),
    );
    r.checks
        .push(("every ledger accounts for its rewrite".into(), sound));
    Ok(r)
}

fn determining_section(ctx: &Ctx, sys: &DeterminingSystem) -> Val {
    Val::List(
        sys.conditions
            .iter()
            .map(|c| {
                let source = match &c.provenance {
                    Provenance::Residual {
                        row,
                        col,
                        order,
                        monomial,
                    } => obj(vec![
                        ("kind", s("residual")),
                        ("row", Val::Int(*row as i64)),
                        ("col", Val::Int(*col as i64)),
                        ("derivative_order", Val::Int(order.order() as i64)),
                        ("monomial", ctx.expr(&Expr::monomial(monomial.clone()))),
                    ]),
                    Provenance::Compatibility { field, monomial } => obj(vec![
                        ("kind", s("compatibility")),
                        ("field", Val::Int(*field as i64)),
                        ("monomial", ctx.expr(&Expr::monomial(monomial.clone()))),
                    ]),
                };
                obj(vec![("expr", ctx.expr(&c.expr)), ("source", source)])
            })
            .collect(),
    )
}

fn solution_section(ctx: &Ctx, rep: &SolutionReport) -> Val {
    obj(vec![
        (
            "bindings",
            Val::List(
                rep.bindings
                    .iter()
                    .map(|(u, v)| {
                        obj(vec![
                            ("unknown", s(u.name.clone())),
                            (
                                "args",
                                Val::List(u.args.iter().map(|a| ctx.expr(&Expr::var(a))).collect()),
                            ),
                            ("value", ctx.expr(v)),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "constants",
            Val::List(
                rep.constants
                    .iter()
                    .map(|c| {
                        obj(vec![
                            ("name", s(c.name.clone())),
                            ("nonzero", Val::Bool(c.nonzero)),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "remaining",
            Val::List(rep.remaining.iter().map(|e| ctx.expr(e)).collect()),
        ),
        (
            "transformed",
            Val::List(rep.transformed.iter().map(|e| ctx.expr(e)).collect()),
        ),
        (
            "notes",
            Val::List(rep.notes.iter().map(|n| s(n.clone())).collect()),
        ),
    ])
}

fn inverse(
    ctx: &Ctx,
    task: TaskArg,
    problem: &Problem,
    hctx: &HomotopyContext,
    seed: u64,
) -> Result<Report, Failure> {
    let ansatz = problem.ansatz().filter(|_| match (&problem.task, task) {
        (Task::MultiplierDiagonal(_) | Task::MultiplierMatrix(_), TaskArg::Multiplier) => true,
        (Task::Nonlinear(_), TaskArg::Nonlinear) => true,
        _ => false,
    });
    let Some(ansatz) = ansatz else {
        return Err(Failure::Usage(format!(
            "the {} task needs a matching `task` statement with its ansatz in the problem file",
            task_name(task)
        )));
    };
    let eqs = problem.equation_exprs();
    let on = problem.options.on_solutions;
    let sys = match task {
        TaskArg::Multiplier => multiplier_conditions(ctx.space, &eqs, &ansatz, on)?,
        _ => nonlinear_conditions(ctx.space, &eqs, &ansatz, on)?,
    };
    let sol = solve_determining(ctx.space, &sys)?;
    let mut r = match sol.status {
        Status::Solved => Report::new("solved", exit::SUCCESS),
        Status::NoNontrivialSolution => Report::new("no-nontrivial-solution", exit::NEGATIVE),
        Status::Unsolved => Report::new("unsolved", exit::UNSOLVED),
    };
    r.section("determining_system", determining_section(ctx, &sys));
    r.section("solutions", solution_section(ctx, &sol));
    if let Some(v) = &sol.verdict {
        r.section("verdict", ctx.verdict(v));
        r.checks.push((
            "transformed residual vanishes at random points".into(),
            residual_vanishes_numerically(&v.residual, seed),
        ));
    }
    if sol.status == Status::Solved && !on {
        match lagrangian_from_euler(ctx.space, &sol.transformed, hctx, true) {
            Ok(rec) => {
                r.checks
                    .extend(reconstruction_checks(ctx, &rec, &sol.transformed, seed)?);
                r.section("lagrangian", ctx.reconstruction(&rec));
            }
            Err(Error::Invariant(m)) => return Err(Failure::Internal(m)),
            Err(e) => r.section("lagrangian", obj(vec![("unavailable", s(e.to_string()))])),
        }
    }
    Ok(r)
}
