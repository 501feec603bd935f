use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::{Atom, Expr, JetVar, Monomial, MultiIndex, Names};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    /// Linear ASCII that the problem parser reads back.
    Ascii,
    /// Standalone math-mode LaTeX.
    Latex,
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a dyn Names,
    style: Style,
}

impl<'a> ExprDisplay<'a> {
    pub fn new(expr: &'a Expr, names: &'a dyn Names, style: Style) -> Self {
        ExprDisplay { expr, names, style }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self.expr, self.names, self.style))
    }
}

/// Display order: higher jet order first, then higher jet degree, then
/// reverse canonical order. Constants come last.
fn display_terms(e: &Expr) -> Vec<(&Monomial, &Rational)> {
    let mut terms: Vec<_> = e.terms().collect();
    terms.sort_by(|(a, _), (b, _)| {
        let ka = (
            a.jet_order().map(|o| o as i64).unwrap_or(-1),
            a.jet_degree(),
        );
        let kb = (
            b.jet_order().map(|o| o as i64).unwrap_or(-1),
            b.jet_degree(),
        );
        kb.cmp(&ka).then_with(|| b.cmp(a))
    });
    terms
}

pub(crate) fn render(e: &Expr, names: &dyn Names, style: Style) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (m, c)) in display_terms(e).into_iter().enumerate() {
        let neg = c.is_negative();
        match (k, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        let abs = c.abs();
        if m.is_one() {
            out.push_str(&rational_str(&abs, style));
            continue;
        }
        if !abs.is_one() {
            out.push_str(&rational_str(&abs, style));
            out.push_str(if style == Style::Ascii { "*" } else { " " });
        }
        out.push_str(&monomial_str(m, names, style));
    }
    out
}

fn rational_str(r: &Rational, style: Style) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    match style {
        Style::Ascii => format!("{}/{}", r.numer(), r.denom()),
        Style::Latex => format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom()),
    }
}

fn monomial_str(m: &Monomial, names: &dyn Names, style: Style) -> String {
    let sep = if style == Style::Ascii { "*" } else { " " };
    let parts: Vec<String> = m
        .factors()
        .iter()
        .map(|(a, e)| {
            let base = atom_str(a, names, style);
            match (e, style) {
                (1, _) => base,
                (e, Style::Ascii) => format!("{base}^{e}"),
                (e, Style::Latex) => format!("{base}^{{{e}}}"),
            }
        })
        .collect();
    parts.join(sep)
}

pub(crate) fn jet_str(j: &JetVar, names: &dyn Names, style: Style) -> String {
    let field = names.field_name(j.field);
    if j.index.is_empty() {
        return match style {
            Style::Ascii => field,
            Style::Latex => latex_ident(&field),
        };
    }
    match style {
        Style::Ascii if names.subscript_sugar() => {
            format!("{field}_{}", index_letters(&j.index, names, ""))
        }
        Style::Ascii => {
            let specs: Vec<String> = j
                .index
                .counts()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| {
                    if c == 1 {
                        names.base_name(i)
                    } else {
                        format!("{{{},{}}}", names.base_name(i), c)
                    }
                })
                .collect();
            format!("D[{field},{}]", specs.join(","))
        }
        Style::Latex => {
            let sep = if names.subscript_sugar() { "" } else { " " };
            format!(
                "{}_{{{}}}",
                latex_ident(&field),
                index_letters(&j.index, names, sep)
            )
        }
    }
}

pub(crate) fn index_letters(index: &MultiIndex, names: &dyn Names, sep: &str) -> String {
    index
        .directions()
        .into_iter()
        .map(|i| names.base_name(i))
        .collect::<Vec<_>>()
        .join(sep)
}

fn atom_str(a: &Atom, names: &dyn Names, style: Style) -> String {
    let wrap = |inner: &Expr| render(inner, names, style);
    match (a, style) {
        (Atom::Param(p), Style::Ascii) => p.to_string(),
        (Atom::Param(p), Style::Latex) => latex_ident(p),
        (Atom::Base(i), Style::Ascii) => names.base_name(*i),
        (Atom::Base(i), Style::Latex) => latex_ident(&names.base_name(*i)),
        (Atom::Jet(j), _) => jet_str(j, names, style),
        (Atom::Func(app), Style::Ascii) => {
            let args: Vec<String> = app.args.iter().map(wrap).collect();
            let head = if app.is_underived() {
                app.name.to_string()
            } else {
                let d: Vec<String> = app.deriv.iter().map(u32::to_string).collect();
                format!("Derivative[{}][{}]", d.join(","), app.name)
            };
            if args.is_empty() {
                head
            } else {
                format!("{head}({})", args.join(", "))
            }
        }
        (Atom::Func(app), Style::Latex) => {
            let mut head = latex_ident(&app.name);
            if !app.is_underived() {
                let mut sub = String::new();
                for (slot, &n) in app.deriv.iter().enumerate() {
                    let label = match app.args[slot].as_atom() {
                        Some(Atom::Base(_)) | Some(Atom::Jet(_)) => {
                            atom_str(app.args[slot].as_atom().unwrap(), names, style)
                        }
                        _ => format!("{}", slot + 1),
                    };
                    for _ in 0..n {
                        if !sub.is_empty() {
                            sub.push(' ');
                        }
                        sub.push_str(&label);
                    }
                }
                let _ = write!(head, "_{{{sub}}}");
            }
            if app.args.is_empty() {
                head
            } else {
                let args: Vec<String> = app.args.iter().map(wrap).collect();
                format!("{head}({})", args.join(", "))
            }
        }
        (Atom::Exp(arg), Style::Ascii) => format!("exp({})", wrap(arg)),
        (Atom::Exp(arg), Style::Latex) => format!("e^{{{}}}", wrap(arg)),
        (Atom::Sin(arg), Style::Ascii) => format!("sin({})", wrap(arg)),
        (Atom::Sin(arg), Style::Latex) => format!("\\sin\\left({}\\right)", wrap(arg)),
        (Atom::Cos(arg), Style::Ascii) => format!("cos({})", wrap(arg)),
        (Atom::Cos(arg), Style::Latex) => format!("\\cos\\left({}\\right)", wrap(arg)),
    }
}

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi",
    "omega",
];

pub(crate) fn latex_ident(name: &str) -> String {
    let stem = name.trim_end_matches(|c: char| c.is_ascii_digit());
    let digits = &name[stem.len()..];
    let stem_tex = if GREEK.contains(&stem) {
        format!("\\{stem}")
    } else if stem.contains('_') {
        let (a, b) = stem.split_once('_').unwrap();
        format!("{a}_{{{}}}", b.replace('_', ","))
    } else if stem.chars().count() > 1 {
        format!("\\mathrm{{{stem}}}")
    } else {
        stem.to_string()
    };
    if digits.is_empty() || stem.contains('_') {
        format!("{stem_tex}{digits}")
    } else {
        format!("{stem_tex}_{{{digits}}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{integer, rational, IndexNames};

    struct TX;
    impl Names for TX {
        fn base_name(&self, i: usize) -> String {
            ["t", "x"][i].to_string()
        }
        fn field_name(&self, _: usize) -> String {
            "u".to_string()
        }
        fn subscript_sugar(&self) -> bool {
            true
        }
    }

    #[test]
    fn ascii_orders_by_jet_order() {
        let e = &(&Expr::jet(0, MultiIndex::from_counts(&[2]))
            + &(&Expr::param("b") * &Expr::jet(0, MultiIndex::unit(0))))
            + &Expr::field(0);
        assert_eq!(e.display(&TX, Style::Ascii).to_string(), "u_tt + b*u_t + u");
    }

    #[test]
    fn ascii_coefficients_and_signs() {
        let ut = Expr::jet(0, MultiIndex::unit(0));
        let e = &ut.pow(2).unwrap().scale(&rational(-1, 2))
            + &Expr::field(0).pow(2).unwrap().scale(&rational(1, 2));
        assert_eq!(
            e.display(&TX, Style::Ascii).to_string(),
            "-1/2*u_t^2 + 1/2*u^2"
        );
        assert_eq!(
            e.display(&TX, Style::Latex).to_string(),
            "-\\frac{1}{2} u_{t}^{2} + \\frac{1}{2} u^{2}"
        );
        assert_eq!(
            Expr::constant(integer(-3))
                .display(&TX, Style::Ascii)
                .to_string(),
            "-3"
        );
    }

    #[test]
    fn explicit_derivative_notation_without_sugar() {
        let e = Expr::jet(0, MultiIndex::from_counts(&[2, 1]));
        assert_eq!(
            e.display(&IndexNames, Style::Ascii).to_string(),
            "D[u0,{x0,2},x1]"
        );
    }

    #[test]
    fn latex_identifiers() {
        assert_eq!(latex_ident("lambda"), "\\lambda");
        assert_eq!(latex_ident("C1"), "C_{1}");
        assert_eq!(latex_ident("b"), "b");
    }
}
