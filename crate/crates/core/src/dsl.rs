//! The `.vp` problem language: lexer, recursive-descent parser, name
//! resolution and the canonical printer.
//!
//! ```text
//! base t;
//! field u(t);
//! param b nonzero;
//! unknown lambda(t);
//! eq E: u_tt + b*u_t + u;
//! task multiplier diag(lambda);
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::Error;
use crate::expr::tree::{normalize, ExprTree};
use crate::expr::{display, Expr, JetVar, MultiIndex, Style, Var};
use crate::inverse::{Ansatz, AnsatzKind, Unknown};
use crate::jet::JetSpace;
use crate::Rational;

/// Deepest expression nesting the parser accepts.
pub const MAX_DEPTH: usize = 128;
/// Largest accepted `option max_order`.
pub const MAX_ORDER_LIMIT: u32 = 12;
/// Largest accepted `option degree`.
pub const MAX_DEGREE_LIMIT: u32 = 6;
pub const DEFAULT_DEGREE: u32 = 2;

const MAX_LITERAL_DIGITS: usize = 200;
const MAX_FN_DERIVATIVE: u32 = 16;

const KEYWORDS: &[&str] = &[
    "base",
    "field",
    "param",
    "nonzero",
    "function",
    "unknown",
    "eq",
    "task",
    "option",
    "D",
    "Derivative",
    "exp",
    "sin",
    "cos",
    "diag",
    "matrix",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    UnknownIdentifier,
    OrderOverflow,
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Span,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    /// Base variables the field depends on.
    pub args: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub nonzero: bool,
}

/// An arbitrary but given function, such as the right-hand side `F` of
/// `ẍ = F(t, x, ẋ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub args: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub name: String,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Task {
    Check,
    Lagrangian,
    Helmholtz,
    Representatives,
    MultiplierDiagonal(Vec<String>),
    MultiplierMatrix(Vec<Vec<String>>),
    Nonlinear(Vec<String>),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Check => "check",
            Task::Lagrangian => "lagrangian",
            Task::Helmholtz => "helmholtz",
            Task::Representatives => "representatives",
            Task::MultiplierDiagonal(_) | Task::MultiplierMatrix(_) => "multiplier",
            Task::Nonlinear(_) => "nonlinear",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Options {
    pub max_order: u32,
    pub on_solutions: bool,
    pub degree: u32,
    /// Homotopy centre, one jet-free expression per field.
    pub center: Option<Vec<Expr>>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_order: JetSpace::DEFAULT_MAX_ORDER,
            on_solutions: false,
            degree: DEFAULT_DEGREE,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub base: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub params: Vec<ParamDecl>,
    pub functions: Vec<FunctionDecl>,
    pub unknowns: Vec<Unknown>,
    pub equations: Vec<Equation>,
    pub task: Task,
    pub options: Options,
}

impl Problem {
    pub fn space(&self) -> JetSpace {
        JetSpace::from_names(
            self.base.clone(),
            self.fields.iter().map(|f| f.name.clone()).collect(),
            self.options.max_order,
        )
    }

    pub fn equation_exprs(&self) -> Vec<Expr> {
        self.equations.iter().map(|e| e.expr.clone()).collect()
    }

    /// The ansatz of a multiplier or nonlinear task.
    pub fn ansatz(&self) -> Option<Ansatz> {
        let kind = match &self.task {
            Task::MultiplierDiagonal(names) => AnsatzKind::Diagonal(names.clone()),
            Task::MultiplierMatrix(rows) => AnsatzKind::Matrix(rows.clone()),
            Task::Nonlinear(transforms) => AnsatzKind::Nonlinear {
                transforms: transforms.clone(),
                degree: self.options.degree,
            },
            _ => return None,
        };
        Some(Ansatz {
            kind,
            unknowns: self.unknowns.clone(),
        })
    }

    pub fn nonzero_params(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|p| p.nonzero)
            .map(|p| p.name.clone())
            .collect()
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rational),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let mut offset = offset.min(text.len());
    while !text.is_char_boundary(offset) {
        offset -= 1;
    }
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rsplit('\n')
        .next()
        .map(|l| l.chars().count())
        .unwrap_or(0)
        + 1;
    (line, column)
}

fn diagnostic(
    text: &str,
    kind: DiagnosticKind,
    span: Span,
    message: impl Into<String>,
) -> Diagnostic {
    let (line, column) = position(text, span.start);
    Diagnostic {
        kind,
        message: message.into(),
        span,
        line,
        column,
    }
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                span: Span { start, end: i },
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_end = i;
            let mut frac = "";
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                let fs = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                frac = &text[fs..i];
            }
            let span = Span { start, end: i };
            if i - start > MAX_LITERAL_DIGITS {
                return Err(diagnostic(
                    text,
                    DiagnosticKind::Syntax,
                    span,
                    "numeric literal is too long",
                ));
            }
            let digits = format!("{}{}", &text[start..int_end], frac);
            let numer: BigInt = digits.parse().expect("ascii digits");
            let denom = num_traits::pow(BigInt::from(10), frac.len());
            out.push(Token {
                tok: Tok::Num(Rational::new(numer, denom)),
                span,
            });
        } else if b";,:()[]{}+-*/^".contains(&c) {
            out.push(Token {
                tok: Tok::Punct(c as char),
                span: Span {
                    start: i,
                    end: i + 1,
                },
            });
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            let span = Span {
                start: i,
                end: i + ch.len_utf8(),
            };
            return Err(diagnostic(
                text,
                DiagnosticKind::Syntax,
                span,
                format!("unexpected character {ch:?}"),
            ));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span {
            start: text.len(),
            end: text.len(),
        },
    });
    Ok(out)
}

// ---------------------------------------------------------------- syntax

#[derive(Clone, Debug)]
enum AstKind {
    Num(Rational),
    Name(String),
    Call(String, Vec<Ast>),
    Derived(String, Vec<u32>, Vec<Ast>),
    Total(Box<Ast>, Vec<(String, u32, Span)>),
    Neg(Box<Ast>),
    Bin(char, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i64),
}

#[derive(Clone, Debug)]
struct Ast {
    kind: AstKind,
    span: Span,
}

type Ident = (String, Span);

enum Stmt {
    Base(Vec<Ident>),
    Field(Ident, Option<Vec<Ident>>),
    Param(Ident, bool),
    Function(Ident, Vec<Ast>),
    Unknown(Ident, Vec<Ast>),
    Eq(Ident, Ast),
    Task(Span, TaskAst),
    MaxOrder(Span, u32),
    OnSolutions(Span),
    Degree(Span, u32),
    Center(Span, Vec<Ast>),
}

enum TaskAst {
    Plain(String),
    Diagonal(Vec<Ident>),
    Matrix(Vec<Vec<Ident>>),
    Nonlinear(Vec<Ident>),
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, span: Span, message: impl Into<String>) -> PResult<T> {
        Err(diagnostic(self.text, DiagnosticKind::Syntax, span, message))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.at_punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<Span> {
        let t = self.peek().clone();
        if t.tok == Tok::Punct(c) {
            self.bump();
            Ok(t.span)
        } else {
            self.error(
                t.span,
                format!("expected `{c}`, found {}", Self::describe(&t.tok)),
            )
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, t.span))
            }
            other => self.error(
                t.span,
                format!("expected an identifier, found {}", Self::describe(&other)),
            ),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(&self.peek().tok, Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn small_int(&mut self, what: &str) -> PResult<(u32, Span)> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(n) if n.is_integer() => {
                self.bump();
                match n.to_integer().to_u32() {
                    Some(k) => Ok((k, t.span)),
                    None => self.error(t.span, format!("{what} is out of range")),
                }
            }
            other => self.error(
                t.span,
                format!("expected {what}, found {}", Self::describe(other)),
            ),
        }
    }

    fn ident_list(&mut self, close: char) -> PResult<Vec<Ident>> {
        let mut out = Vec::new();
        if self.at_punct(close) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if !self.eat_punct(',') {
                return Ok(out);
            }
        }
    }

    fn statements(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while self.peek().tok != Tok::Eof {
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let (kw, span) = self.ident()?;
        let stmt = match kw.as_str() {
            "base" => {
                let names = self.ident_list(';')?;
                if names.is_empty() {
                    return self.error(span, "`base` needs at least one variable");
                }
                Stmt::Base(names)
            }
            "field" => {
                let name = self.ident()?;
                let args = if self.eat_punct('(') {
                    let a = self.ident_list(')')?;
                    self.expect_punct(')')?;
                    Some(a)
                } else {
                    None
                };
                Stmt::Field(name, args)
            }
            "param" => {
                let name = self.ident()?;
                let nonzero = self.keyword("nonzero");
                Stmt::Param(name, nonzero)
            }
            "function" | "unknown" => {
                let name = self.ident()?;
                let args = if self.eat_punct('(') {
                    self.args()?
                } else {
                    Vec::new()
                };
                if kw == "function" {
                    Stmt::Function(name, args)
                } else {
                    Stmt::Unknown(name, args)
                }
            }
            "eq" => {
                let name = self.ident()?;
                self.expect_punct(':')?;
                Stmt::Eq(name, self.expr()?)
            }
            "task" => Stmt::Task(span, self.task()?),
            "option" => {
                let (opt, ospan) = self.ident()?;
                match opt.as_str() {
                    "max_order" => Stmt::MaxOrder(ospan, self.small_int("an order")?.0),
                    "degree" => Stmt::Degree(ospan, self.small_int("a degree")?.0),
                    "on_solutions" => Stmt::OnSolutions(ospan),
                    "center" => {
                        self.expect_punct('(')?;
                        Stmt::Center(ospan, self.args()?)
                    }
                    _ => return self.error(ospan, format!("unknown option `{opt}`")),
                }
            }
            _ => {
                return self.error(
                    span,
                    format!("expected a statement, found identifier `{kw}`"),
                )
            }
        };
        self.expect_punct(';')?;
        Ok(stmt)
    }

    fn task(&mut self) -> PResult<TaskAst> {
        let (name, span) = self.ident()?;
        Ok(match name.as_str() {
            "check" | "lagrangian" | "helmholtz" | "representatives" => TaskAst::Plain(name),
            "multiplier" => {
                if self.keyword("diag") {
                    self.expect_punct('(')?;
                    let names = self.ident_list(')')?;
                    self.expect_punct(')')?;
                    TaskAst::Diagonal(names)
                } else if self.keyword("matrix") {
                    self.expect_punct('(')?;
                    let mut rows = vec![self.ident_list(';')?];
                    while self.eat_punct(';') {
                        rows.push(self.ident_list(';')?);
                    }
                    self.expect_punct(')')?;
                    TaskAst::Matrix(rows)
                } else {
                    let t = self.peek().clone();
                    return self.error(t.span, "expected `diag(...)` or `matrix(...)`");
                }
            }
            "nonlinear" => {
                if self.eat_punct('(') {
                    let names = self.ident_list(')')?;
                    self.expect_punct(')')?;
                    TaskAst::Nonlinear(names)
                } else {
                    TaskAst::Nonlinear(Vec::new())
                }
            }
            _ => return self.error(span, format!("unknown task `{name}`")),
        })
    }

    /// Comma-separated expressions after an opening parenthesis, through the
    /// closing one.
    fn args(&mut self) -> PResult<Vec<Ast>> {
        let mut out = Vec::new();
        if self.eat_punct(')') {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_punct(')') {
                return Ok(out);
            }
            self.expect_punct(',')?;
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let span = self.peek().span;
            return self.error(span, "expression is nested too deeply");
        }
        Ok(())
    }

    fn expr(&mut self) -> PResult<Ast> {
        self.enter()?;
        let mut lhs = self.term()?;
        while let Tok::Punct(c @ ('+' | '-')) = self.peek().tok {
            self.bump();
            let rhs = self.term()?;
            let span = lhs.span.join(rhs.span);
            lhs = Ast {
                kind: AstKind::Bin(c, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Ast> {
        let mut lhs = self.unary()?;
        while let Tok::Punct(c @ ('*' | '/')) = self.peek().tok {
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.join(rhs.span);
            lhs = Ast {
                kind: AstKind::Bin(c, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Ast> {
        if self.at_punct('-') {
            let start = self.bump().span;
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            let span = start.join(inner.span);
            return Ok(Ast {
                kind: AstKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Ast> {
        let base = self.primary()?;
        if !self.eat_punct('^') {
            return Ok(base);
        }
        let negative = self.eat_punct('-');
        let t = self.peek().clone();
        let Tok::Num(n) = &t.tok else {
            return self.error(t.span, "exponent must be an integer literal");
        };
        if !n.is_integer() {
            return self.error(t.span, "exponent must be an integer literal");
        }
        self.bump();
        let k = n.to_integer().to_i64().filter(|k| *k <= 64);
        let Some(k) = k else {
            return self.error(t.span, "exponent is out of range (at most 64)");
        };
        let span = base.span.join(t.span);
        Ok(Ast {
            kind: AstKind::Pow(Box::new(base), if negative { -k } else { k }),
            span,
        })
    }

    fn primary(&mut self) -> PResult<Ast> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(n) => {
                self.bump();
                Ok(Ast {
                    kind: AstKind::Num(n.clone()),
                    span: t.span,
                })
            }
            Tok::Punct('(') => {
                self.bump();
                let inner = self.expr()?;
                let end = self.expect_punct(')')?;
                Ok(Ast {
                    span: t.span.join(end),
                    ..inner
                })
            }
            Tok::Ident(name) if name == "D" && *self.peek_at(1) == Tok::Punct('[') => {
                self.bump();
                self.bump();
                self.enter()?;
                let inner = self.expr()?;
                self.depth -= 1;
                let mut specs = Vec::new();
                while self.eat_punct(',') {
                    if self.eat_punct('{') {
                        let (dir, dspan) = self.ident()?;
                        self.expect_punct(',')?;
                        let (k, kspan) = self.small_int("a derivative count")?;
                        self.expect_punct('}')?;
                        specs.push((dir, k, dspan.join(kspan)));
                    } else {
                        let (dir, dspan) = self.ident()?;
                        specs.push((dir, 1, dspan));
                    }
                }
                let end = self.expect_punct(']')?;
                if specs.is_empty() {
                    return self.error(t.span.join(end), "`D[...]` needs at least one direction");
                }
                Ok(Ast {
                    kind: AstKind::Total(Box::new(inner), specs),
                    span: t.span.join(end),
                })
            }
            Tok::Ident(name) if name == "Derivative" && *self.peek_at(1) == Tok::Punct('[') => {
                self.bump();
                self.bump();
                let mut counts = Vec::new();
                loop {
                    let (k, kspan) = self.small_int("a derivative count")?;
                    if k > MAX_FN_DERIVATIVE {
                        return self.error(kspan, "derivative count is out of range");
                    }
                    counts.push(k);
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                self.expect_punct(']')?;
                self.expect_punct('[')?;
                let (fname, _) = self.ident()?;
                self.expect_punct(']')?;
                self.expect_punct('(')?;
                let args = self.args()?;
                let end = self.tokens[self.pos - 1].span;
                Ok(Ast {
                    kind: AstKind::Derived(fname, counts, args),
                    span: t.span.join(end),
                })
            }
            Tok::Ident(name) => {
                let name = name.clone();
                self.bump();
                if self.eat_punct('(') {
                    let args = self.args()?;
                    let end = self.tokens[self.pos - 1].span;
                    Ok(Ast {
                        kind: AstKind::Call(name, args),
                        span: t.span.join(end),
                    })
                } else {
                    Ok(Ast {
                        kind: AstKind::Name(name),
                        span: t.span,
                    })
                }
            }
            other => self.error(
                t.span,
                format!("expected an expression, found {}", Self::describe(other)),
            ),
        }
    }
}

// ---------------------------------------------------------------- resolution

fn tree_params(t: &ExprTree, out: &mut BTreeSet<String>) {
    match t {
        ExprTree::Param(n) => {
            out.insert(n.clone());
        }
        ExprTree::Const(_) | ExprTree::Base(_) | ExprTree::Jet(_) | ExprTree::Exp(_) => {}
        ExprTree::Func { args: items, .. } | ExprTree::Add(items) | ExprTree::Mul(items) => {
            items.iter().for_each(|a| tree_params(a, out))
        }
        ExprTree::Sub(a, b) | ExprTree::Div(a, b) | ExprTree::Pow(a, b) => {
            tree_params(a, out);
            tree_params(b, out);
        }
        ExprTree::Neg(a) | ExprTree::Sin(a) | ExprTree::Cos(a) | ExprTree::Total(a, _) => {
            tree_params(a, out)
        }
    }
}

struct Scope<'a> {
    text: &'a str,
    base: Vec<String>,
    fields: Vec<FieldDecl>,
    params: BTreeSet<String>,
    /// Parameters that may appear in a denominator.
    nonzero: BTreeSet<String>,
    /// Arity of declared functions and unknowns.
    arity: BTreeMap<String, usize>,
    sugar: bool,
    max_order: u32,
}

impl Scope<'_> {
    fn err<T>(&self, kind: DiagnosticKind, span: Span, message: impl Into<String>) -> PResult<T> {
        Err(diagnostic(self.text, kind, span, message))
    }

    fn base_index(&self, name: &str) -> Option<usize> {
        self.base.iter().position(|b| b == name)
    }

    fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    fn jet(&self, field: usize, counts: Vec<u32>, span: Span) -> PResult<ExprTree> {
        let index = MultiIndex::from_counts(&counts);
        for dir in index.directions() {
            if !self.fields[field].args.contains(&dir) {
                return self.err(
                    DiagnosticKind::Invalid,
                    span,
                    format!(
                        "{} does not depend on {}",
                        self.fields[field].name, self.base[dir]
                    ),
                );
            }
        }
        if index.order() > self.max_order {
            return self.err(
                DiagnosticKind::OrderOverflow,
                span,
                format!(
                    "jet order {} exceeds the maximum {}",
                    index.order(),
                    self.max_order
                ),
            );
        }
        Ok(ExprTree::Jet(JetVar::new(field, index)))
    }

    /// `u_tx` with `u` a field and `t, x` single-letter base variables.
    fn sugar_jet(&self, name: &str) -> Option<(usize, Vec<u32>)> {
        if !self.sugar {
            return None;
        }
        for (k, _) in name.match_indices('_') {
            let (head, tail) = (&name[..k], &name[k + 1..]);
            let Some(field) = self.field_index(head) else {
                continue;
            };
            if tail.is_empty() {
                continue;
            }
            let mut counts = vec![0u32; self.base.len()];
            let ok = tail.chars().all(|c| match self.base_index(&c.to_string()) {
                Some(i) => {
                    counts[i] += 1;
                    true
                }
                None => false,
            });
            if ok {
                return Some((field, counts));
            }
        }
        None
    }

    fn name(&self, name: &str, span: Span) -> PResult<ExprTree> {
        if let Some(i) = self.base_index(name) {
            return Ok(ExprTree::Base(i));
        }
        if let Some(f) = self.field_index(name) {
            return Ok(ExprTree::Jet(JetVar::field(f)));
        }
        if self.params.contains(name) {
            return Ok(ExprTree::Param(name.to_string()));
        }
        if let Some(&n) = self.arity.get(name) {
            if n != 0 {
                return self.err(
                    DiagnosticKind::Invalid,
                    span,
                    format!("{name} expects {n} arguments"),
                );
            }
            return Ok(ExprTree::Func {
                name: name.to_string(),
                args: Vec::new(),
                deriv: Vec::new(),
            });
        }
        if let Some((field, counts)) = self.sugar_jet(name) {
            return self.jet(field, counts, span);
        }
        self.err(
            DiagnosticKind::UnknownIdentifier,
            span,
            format!("unknown identifier `{name}`"),
        )
    }

    fn tree(&self, ast: &Ast) -> PResult<ExprTree> {
        Ok(match &ast.kind {
            AstKind::Num(n) => ExprTree::Const(n.clone()),
            AstKind::Name(n) => self.name(n, ast.span)?,
            AstKind::Call(name, args) => {
                let unary = |t: ExprTree| Box::new(t);
                match name.as_str() {
                    "exp" | "sin" | "cos" => {
                        let [arg] = args.as_slice() else {
                            return self.err(
                                DiagnosticKind::Invalid,
                                ast.span,
                                format!("{name} takes one argument"),
                            );
                        };
                        let inner = unary(self.tree(arg)?);
                        match name.as_str() {
                            "exp" => ExprTree::Exp(inner),
                            "sin" => ExprTree::Sin(inner),
                            _ => ExprTree::Cos(inner),
                        }
                    }
                    _ => self.application(name, vec![0; args.len()], args, ast.span)?,
                }
            }
            AstKind::Derived(name, counts, args) => {
                if counts.len() != args.len() {
                    return self.err(
                        DiagnosticKind::Invalid,
                        ast.span,
                        format!(
                            "derivative record has {} entries for {} arguments",
                            counts.len(),
                            args.len()
                        ),
                    );
                }
                self.application(name, counts.clone(), args, ast.span)?
            }
            AstKind::Total(inner, specs) => {
                let mut counts = vec![0u32; self.base.len()];
                for (dir, k, span) in specs {
                    let Some(i) = self.base_index(dir) else {
                        return self.err(
                            DiagnosticKind::UnknownIdentifier,
                            *span,
                            format!("`{dir}` is not a base variable"),
                        );
                    };
                    counts[i] = counts[i].saturating_add(*k);
                }
                let total: u64 = counts.iter().map(|&c| c as u64).sum();
                if total > self.max_order as u64 {
                    return self.err(
                        DiagnosticKind::OrderOverflow,
                        ast.span,
                        format!(
                            "derivative order {total} exceeds the maximum {}",
                            self.max_order
                        ),
                    );
                }
                match &inner.kind {
                    AstKind::Name(n)
                        if self.field_index(n).is_some() && self.base_index(n).is_none() =>
                    {
                        self.jet(self.field_index(n).unwrap(), counts, ast.span)?
                    }
                    _ => ExprTree::Total(
                        Box::new(self.tree(inner)?),
                        MultiIndex::from_counts(&counts),
                    ),
                }
            }
            AstKind::Neg(a) => ExprTree::Neg(Box::new(self.tree(a)?)),
            AstKind::Bin(op, a, b) => {
                let (a, b) = (Box::new(self.tree(a)?), Box::new(self.tree(b)?));
                match op {
                    '+' => ExprTree::Add(vec![*a, *b]),
                    '-' => ExprTree::Sub(a, b),
                    '*' => ExprTree::Mul(vec![*a, *b]),
                    _ => {
                        self.check_denominator(&b, ast.span)?;
                        ExprTree::Div(a, b)
                    }
                }
            }
            AstKind::Pow(a, k) => {
                let base = self.tree(a)?;
                if *k < 0 {
                    self.check_denominator(&base, ast.span)?;
                }
                ExprTree::Pow(
                    Box::new(base),
                    Box::new(ExprTree::Const(Rational::from_integer((*k).into()))),
                )
            }
        })
    }

    fn application(
        &self,
        name: &str,
        deriv: Vec<u32>,
        args: &[Ast],
        span: Span,
    ) -> PResult<ExprTree> {
        let Some(&n) = self.arity.get(name) else {
            let kind = if self.base_index(name).is_some()
                || self.field_index(name).is_some()
                || self.params.contains(name)
            {
                DiagnosticKind::Invalid
            } else {
                DiagnosticKind::UnknownIdentifier
            };
            return self.err(kind, span, format!("`{name}` is not a declared function"));
        };
        if n != args.len() {
            return self.err(
                DiagnosticKind::Invalid,
                span,
                format!("{name} expects {n} arguments, got {}", args.len()),
            );
        }
        let args = args
            .iter()
            .map(|a| self.tree(a))
            .collect::<PResult<Vec<_>>>()?;
        Ok(ExprTree::Func {
            name: name.to_string(),
            args,
            deriv,
        })
    }

    fn check_denominator(&self, t: &ExprTree, span: Span) -> PResult<()> {
        let mut names = BTreeSet::new();
        tree_params(t, &mut names);
        match names.iter().find(|n| !self.nonzero.contains(*n)) {
            Some(n) => self.err(
                DiagnosticKind::Invalid,
                span,
                format!("dividing by `{n}` requires `param {n} nonzero;`"),
            ),
            None => Ok(()),
        }
    }

    fn expr(&self, ast: &Ast) -> PResult<Expr> {
        let tree = self.tree(ast)?;
        let space = JetSpace::from_names(
            self.base.clone(),
            self.fields.iter().map(|f| f.name.clone()).collect(),
            self.max_order,
        );
        normalize(&tree, &space).or_else(|e| {
            let kind = match e {
                Error::MaxOrderExceeded { .. } => DiagnosticKind::OrderOverflow,
                _ => DiagnosticKind::Invalid,
            };
            self.err(kind, ast.span, e.to_string())
        })
    }

    /// A declared argument: a base variable or a jet coordinate.
    fn var(&self, ast: &Ast) -> PResult<Var> {
        let tree = match &ast.kind {
            AstKind::Name(_) | AstKind::Total(..) => self.tree(ast)?,
            _ => {
                return self.err(
                    DiagnosticKind::Invalid,
                    ast.span,
                    "arguments must be base or jet variables",
                )
            }
        };
        match tree {
            ExprTree::Base(i) => Ok(Var::Base(i)),
            ExprTree::Jet(j) => Ok(Var::Jet(j)),
            _ => self.err(
                DiagnosticKind::Invalid,
                ast.span,
                "arguments must be base or jet variables",
            ),
        }
    }
}

fn check_new_name(text: &str, taken: &mut BTreeSet<String>, (name, span): &Ident) -> PResult<()> {
    if name.starts_with("__") {
        return Err(diagnostic(
            text,
            DiagnosticKind::Invalid,
            *span,
            format!("`{name}` is reserved"),
        ));
    }
    if KEYWORDS.contains(&name.as_str()) {
        return Err(diagnostic(
            text,
            DiagnosticKind::Invalid,
            *span,
            format!("`{name}` is a keyword"),
        ));
    }
    if !taken.insert(name.clone()) {
        return Err(diagnostic(
            text,
            DiagnosticKind::Invalid,
            *span,
            format!("`{name}` is declared twice"),
        ));
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<Problem, Diagnostic> {
    let tokens = lex(text)?;
    let eof = tokens.last().map(|t| t.span).unwrap_or_default();
    let mut parser = Parser {
        text,
        tokens,
        pos: 0,
        depth: 0,
    };
    let stmts = parser.statements()?;
    let err = |kind, span, msg: String| Err(diagnostic(text, kind, span, msg));

    let mut task_ast = None;
    for s in &stmts {
        if let Stmt::Task(span, t) = s {
            if task_ast.is_some() {
                return err(DiagnosticKind::Invalid, *span, "more than one task".into());
            }
            task_ast = Some((*span, t));
        }
    }
    let Some((task_span, task_ast)) = task_ast else {
        return err(DiagnosticKind::Invalid, eof, "no task".into());
    };

    let mut taken = BTreeSet::new();
    let mut options = Options::default();
    let mut seen_options = BTreeSet::new();
    let mut base = Vec::new();
    for s in &stmts {
        let (key, span) = match s {
            Stmt::MaxOrder(sp, k) => {
                if *k > MAX_ORDER_LIMIT {
                    return err(
                        DiagnosticKind::OrderOverflow,
                        *sp,
                        format!("max_order is limited to {MAX_ORDER_LIMIT}"),
                    );
                }
                options.max_order = *k;
                ("max_order", *sp)
            }
            Stmt::Degree(sp, k) => {
                if *k > MAX_DEGREE_LIMIT {
                    return err(
                        DiagnosticKind::Invalid,
                        *sp,
                        format!("degree is limited to {MAX_DEGREE_LIMIT}"),
                    );
                }
                options.degree = *k;
                ("degree", *sp)
            }
            Stmt::OnSolutions(sp) => {
                options.on_solutions = true;
                ("on_solutions", *sp)
            }
            Stmt::Center(sp, _) => ("center", *sp),
            Stmt::Base(names) => {
                for n in names {
                    check_new_name(text, &mut taken, n)?;
                    base.push(n.0.clone());
                }
                continue;
            }
            _ => continue,
        };
        if !seen_options.insert(key) {
            return err(
                DiagnosticKind::Invalid,
                span,
                format!("option {key} is given twice"),
            );
        }
    }
    if base.is_empty() {
        return err(
            DiagnosticKind::Invalid,
            eof,
            "no base variables declared".into(),
        );
    }

    let mut fields = Vec::new();
    for s in &stmts {
        if let Stmt::Field(name, args) = s {
            check_new_name(text, &mut taken, name)?;
            let args = match args {
                None => (0..base.len()).collect(),
                Some(list) => {
                    let mut idx = Vec::new();
                    for (a, span) in list {
                        let Some(i) = base.iter().position(|b| b == a) else {
                            return err(
                                DiagnosticKind::UnknownIdentifier,
                                *span,
                                format!("`{a}` is not a base variable"),
                            );
                        };
                        if idx.contains(&i) {
                            return err(
                                DiagnosticKind::Invalid,
                                *span,
                                format!("`{a}` is listed twice"),
                            );
                        }
                        idx.push(i);
                    }
                    idx.sort();
                    idx
                }
            };
            fields.push(FieldDecl {
                name: name.0.clone(),
                args,
            });
        }
    }
    if fields.is_empty() {
        return err(DiagnosticKind::Invalid, eof, "no fields declared".into());
    }

    let sugar = base.iter().all(|b| b.chars().count() == 1);
    let mut scope = Scope {
        text,
        base,
        fields,
        params: BTreeSet::new(),
        nonzero: BTreeSet::new(),
        arity: BTreeMap::new(),
        sugar,
        max_order: options.max_order,
    };

    let mut params = Vec::new();
    for s in &stmts {
        let name = match s {
            Stmt::Param(name, nonzero) => {
                params.push(ParamDecl {
                    name: name.0.clone(),
                    nonzero: *nonzero,
                });
                name
            }
            Stmt::Function(name, args) | Stmt::Unknown(name, args) => {
                scope.arity.insert(name.0.clone(), args.len());
                name
            }
            _ => continue,
        };
        check_new_name(text, &mut taken, name)?;
        if scope.sugar_jet(&name.0).is_some() {
            return err(
                DiagnosticKind::Invalid,
                name.1,
                format!("`{}` would shadow a jet variable", name.0),
            );
        }
    }
    scope.params = params.iter().map(|p| p.name.clone()).collect();
    scope.nonzero = params
        .iter()
        .filter(|p| p.nonzero)
        .map(|p| p.name.clone())
        .collect();

    let mut functions = Vec::new();
    let mut unknowns = Vec::new();
    let mut equations: Vec<Equation> = Vec::new();
    let mut eq_names = BTreeSet::new();
    for s in &stmts {
        match s {
            Stmt::Function(name, args) | Stmt::Unknown(name, args) => {
                let mut vars = Vec::new();
                for a in args {
                    let v = scope.var(a)?;
                    if vars.contains(&v) {
                        return err(
                            DiagnosticKind::Invalid,
                            a.span,
                            "argument listed twice".into(),
                        );
                    }
                    vars.push(v);
                }
                if matches!(s, Stmt::Function(..)) {
                    functions.push(FunctionDecl {
                        name: name.0.clone(),
                        args: vars,
                    });
                } else {
                    unknowns.push(Unknown::new(&name.0, vars));
                }
            }
            Stmt::Eq(name, ast) => {
                if name.0.starts_with("__") {
                    return err(
                        DiagnosticKind::Invalid,
                        name.1,
                        format!("`{}` is reserved", name.0),
                    );
                }
                if !eq_names.insert(name.0.clone()) {
                    return err(
                        DiagnosticKind::Invalid,
                        name.1,
                        format!("equation `{}` is declared twice", name.0),
                    );
                }
                equations.push(Equation {
                    name: name.0.clone(),
                    expr: scope.expr(ast)?,
                });
            }
            Stmt::Center(span, list) => {
                if list.len() != scope.fields.len() {
                    return err(
                        DiagnosticKind::Invalid,
                        *span,
                        "the centre needs one entry per field".into(),
                    );
                }
                let mut center = Vec::new();
                for a in list {
                    let e = scope.expr(a)?;
                    if !e.is_jet_free() {
                        return err(
                            DiagnosticKind::Invalid,
                            a.span,
                            "the centre must not contain jet variables".into(),
                        );
                    }
                    center.push(e);
                }
                options.center = Some(center);
            }
            _ => {}
        }
    }
    if equations.is_empty() {
        return err(DiagnosticKind::Invalid, eof, "no equations".into());
    }

    let unknown_name = |(n, span): &Ident| -> PResult<String> {
        if unknowns.iter().any(|u| u.name == *n) {
            Ok(n.clone())
        } else {
            Err(diagnostic(
                text,
                DiagnosticKind::UnknownIdentifier,
                *span,
                format!("`{n}` is not a declared unknown"),
            ))
        }
    };
    let n_eq = equations.len();
    let task = match task_ast {
        TaskAst::Plain(name) => match name.as_str() {
            "check" => Task::Check,
            "lagrangian" => Task::Lagrangian,
            "helmholtz" => Task::Helmholtz,
            _ => Task::Representatives,
        },
        TaskAst::Diagonal(names) => {
            if names.len() != n_eq {
                return err(
                    DiagnosticKind::Invalid,
                    task_span,
                    format!("the multiplier needs {n_eq} diagonal entries"),
                );
            }
            Task::MultiplierDiagonal(names.iter().map(unknown_name).collect::<PResult<_>>()?)
        }
        TaskAst::Matrix(rows) => {
            if rows.len() != n_eq || rows.iter().any(|r| r.len() != n_eq) {
                return err(
                    DiagnosticKind::Invalid,
                    task_span,
                    format!("the multiplier matrix must be {n_eq}×{n_eq}"),
                );
            }
            Task::MultiplierMatrix(
                rows.iter()
                    .map(|r| r.iter().map(unknown_name).collect::<PResult<Vec<_>>>())
                    .collect::<PResult<_>>()?,
            )
        }
        TaskAst::Nonlinear(names) => {
            if !names.is_empty() && names.len() != scope.fields.len() {
                return err(
                    DiagnosticKind::Invalid,
                    task_span,
                    "one transform per field".into(),
                );
            }
            Task::Nonlinear(names.iter().map(unknown_name).collect::<PResult<_>>()?)
        }
    };

    Ok(Problem {
        base: scope.base,
        fields: scope.fields,
        params,
        functions,
        unknowns,
        equations,
        task,
        options,
    })
}

/// Comma-separated expressions in the namespace of `problem`, as used for
/// a homotopy centre given on the command line.
pub fn parse_expr_list(problem: &Problem, text: &str) -> Result<Vec<Expr>, Diagnostic> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        text,
        tokens,
        pos: 0,
        depth: 0,
    };
    let mut asts = Vec::new();
    if parser.peek().tok != Tok::Eof {
        loop {
            asts.push(parser.expr()?);
            if !parser.eat_punct(',') {
                break;
            }
        }
    }
    let t = parser.peek().clone();
    if t.tok != Tok::Eof {
        return parser.error(
            t.span,
            format!(
                "expected `,` or end of input, found {}",
                Parser::describe(&t.tok)
            ),
        );
    }
    let mut arity: BTreeMap<String, usize> = problem
        .functions
        .iter()
        .map(|f| (f.name.clone(), f.args.len()))
        .collect();
    arity.extend(
        problem
            .unknowns
            .iter()
            .map(|u| (u.name.clone(), u.args.len())),
    );
    let scope = Scope {
        text,
        base: problem.base.clone(),
        fields: problem.fields.clone(),
        params: problem.params.iter().map(|p| p.name.clone()).collect(),
        nonzero: problem.nonzero_params().into_iter().collect(),
        arity,
        sugar: problem.base.iter().all(|b| b.chars().count() == 1),
        max_order: problem.options.max_order,
    };
    asts.iter().map(|a| scope.expr(a)).collect()
}

// ---------------------------------------------------------------- printer

/// Canonical text of a problem. Options at their defaults are omitted.
pub fn print(p: &Problem) -> String {
    let space = p.space();
    let e = |x: &Expr| display::render(x, &space, Style::Ascii);
    let v = |x: &Var| e(&Expr::var(x));
    let mut out = String::new();
    out.push_str(&format!("base {};\n", p.base.join(", ")));
    for f in &p.fields {
        let args: Vec<&str> = f.args.iter().map(|&i| p.base[i].as_str()).collect();
        out.push_str(&format!("field {}({});\n", f.name, args.join(", ")));
    }
    for prm in &p.params {
        out.push_str(&format!(
            "param {}{};\n",
            prm.name,
            if prm.nonzero { " nonzero" } else { "" }
        ));
    }
    for f in &p.functions {
        out.push_str(&declaration("function", &f.name, &f.args, &v));
    }
    for u in &p.unknowns {
        out.push_str(&declaration("unknown", &u.name, &u.args, &v));
    }
    let defaults = Options::default();
    if p.options.max_order != defaults.max_order {
        out.push_str(&format!("option max_order {};\n", p.options.max_order));
    }
    if p.options.on_solutions {
        out.push_str("option on_solutions;\n");
    }
    if p.options.degree != defaults.degree {
        out.push_str(&format!("option degree {};\n", p.options.degree));
    }
    if let Some(center) = &p.options.center {
        let items: Vec<String> = center.iter().map(e).collect();
        out.push_str(&format!("option center({});\n", items.join(", ")));
    }
    for eq in &p.equations {
        out.push_str(&format!("eq {}: {};\n", eq.name, e(&eq.expr)));
    }
    let task = match &p.task {
        Task::MultiplierDiagonal(names) => format!("multiplier diag({})", names.join(", ")),
        Task::MultiplierMatrix(rows) => {
            let rows: Vec<String> = rows.iter().map(|r| r.join(", ")).collect();
            format!("multiplier matrix({})", rows.join("; "))
        }
        Task::Nonlinear(names) if names.is_empty() => "nonlinear".to_string(),
        Task::Nonlinear(names) => format!("nonlinear({})", names.join(", ")),
        other => other.name().to_string(),
    };
    out.push_str(&format!("task {task};\n"));
    out
}

fn declaration(kw: &str, name: &str, args: &[Var], v: &dyn Fn(&Var) -> String) -> String {
    if args.is_empty() {
        format!("{kw} {name};\n")
    } else {
        let a: Vec<String> = args.iter().map(v).collect();
        format!("{kw} {name}({});\n", a.join(", "))
    }
}
