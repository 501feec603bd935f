//! Seeded generators and oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varic_core::forms::{DeltaBasis, FunctionalForm};
use varic_core::jet::euler_lagrange_all;
use varic_core::variationality::integrate_exact;
use varic_core::{Expr, JetSpace, JetVar, LinDiffOp, MultiIndex, Rational, Var};

pub fn space_t() -> JetSpace {
    JetSpace::new(&["t"], &["u"])
}

pub fn space_tx() -> JetSpace {
    JetSpace::new(&["t", "x"], &["u"])
}

pub fn space_xy() -> JetSpace {
    JetSpace::new(&["t"], &["x", "y"])
}

pub fn jet(field: usize, counts: &[u32]) -> Expr {
    Expr::jet(field, MultiIndex::from_counts(counts))
}

pub fn jv(field: usize, counts: &[u32]) -> Var {
    Var::Jet(JetVar::new(field, MultiIndex::from_counts(counts)))
}

pub fn db(field: usize, counts: &[u32]) -> DeltaBasis {
    DeltaBasis::new(field, MultiIndex::from_counts(counts))
}

pub fn t() -> Expr {
    Expr::base(0)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "vp"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

/// Deterministic random source for symbolic test data.
pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    pub fn nonzero(&mut self, bound: i64) -> i64 {
        loop {
            let k = self.int(-bound, bound);
            if k != 0 {
                return k;
            }
        }
    }

    /// Jet coordinates of every field up to `order`, plus the base
    /// coordinates.
    pub fn atoms(space: &JetSpace, order: u32) -> Vec<Expr> {
        let mut out: Vec<Expr> = (0..space.base_count()).map(Expr::base).collect();
        for f in 0..space.field_count() {
            for i in space.multi_indices_up_to(order) {
                out.push(Expr::jet(f, i));
            }
        }
        out
    }

    /// Random polynomial with at most `terms` terms of degree at most
    /// `degree` in the given atoms.
    pub fn poly(&mut self, atoms: &[Expr], terms: usize, degree: usize) -> Expr {
        let mut e = Expr::zero();
        let n = self.int(1, terms as i64) as usize;
        for _ in 0..n {
            let mut m = Expr::int(self.nonzero(3));
            let d = self.int(0, degree as i64) as usize;
            for _ in 0..d {
                let a = &atoms[self.int(0, atoms.len() as i64 - 1) as usize];
                m = &m * a;
            }
            e += &m;
        }
        e
    }

    pub fn jet_poly(&mut self, space: &JetSpace, order: u32, terms: usize, degree: usize) -> Expr {
        self.poly(&Self::atoms(space, order), terms, degree)
    }

    /// Polynomial of exact degree `degree` in the first base variable.
    pub fn poly_t(&mut self, degree: usize) -> Expr {
        let mut e = Expr::zero();
        for k in 0..=degree {
            let c = if k == degree {
                self.nonzero(3)
            } else {
                self.int(-3, 3)
            };
            e += &(&Expr::int(c) * &t().pow(k as i32).unwrap());
        }
        e
    }

    pub fn one_form(&mut self, space: &JetSpace, order: u32, terms: usize) -> FunctionalForm {
        let mut f = FunctionalForm::zero(1);
        let indices = space.multi_indices_up_to(order);
        for _ in 0..self.int(1, terms as i64) {
            let field = self.int(0, space.field_count() as i64 - 1) as usize;
            let index = indices[self.int(0, indices.len() as i64 - 1) as usize].clone();
            let c = self.jet_poly(space, order, 3, 2);
            f = f.add(&FunctionalForm::monomial(
                c,
                vec![DeltaBasis::new(field, index)],
            ));
        }
        f
    }

    pub fn operator(&mut self, space: &JetSpace, order: u32) -> LinDiffOp {
        let mut op = LinDiffOp::zero();
        for i in space.multi_indices_up_to(order) {
            if self.int(0, 2) > 0 {
                let c = self.jet_poly(space, 1, 2, 2);
                op.add_term(i, c);
            }
        }
        op
    }

    /// A second-order linear system in two unknowns with polynomial
    /// coefficients in `t`; variational ones come from a quadratic
    /// Lagrangian.
    pub fn linear_system(&mut self, variational: bool) -> Vec<Expr> {
        let s = space_xy();
        if variational {
            let vars: Vec<Expr> = [0u32, 1]
                .iter()
                .flat_map(|&k| [jet(0, &[k]), jet(1, &[k])])
                .collect();
            let mut l = Expr::zero();
            for a in 0..vars.len() {
                for b in a..vars.len() {
                    if self.int(0, 1) == 1 {
                        l += &(&(&self.poly_t(1) * &vars[a]) * &vars[b]);
                    }
                }
            }
            return euler_lagrange_all(&s.clone().with_max_order(4), &l).unwrap();
        }
        (0..2)
            .map(|_| {
                let mut e = Expr::zero();
                for f in 0..2 {
                    for k in 0..=2u32 {
                        e += &(&self.poly_t(1) * &jet(f, &[k]));
                    }
                }
                e
            })
            .collect()
    }
}

/// `f(t)` with every derivative up to `order` vanishing at `0` and `1`
/// below `order`: `(t(1 − t))^order · p(t)`.
pub fn bump(order: u32, p: &Expr) -> Expr {
    let w = &t() * &(&Expr::one() - &t());
    &w.pow(order as i32).unwrap() * p
}

/// Replaces every jet `u^α_{t^k}` by `d^k φ^α / dt^k` (one base variable).
pub fn on_section(e: &Expr, sections: &[Expr]) -> Expr {
    let mut b = BTreeMap::new();
    for j in e.jet_vars() {
        let k = j.index.count(0);
        b.insert(
            Var::Jet(j.clone()),
            sections[j.field].diff_n(&Var::Base(0), k),
        );
    }
    e.substitute(&b).unwrap()
}

/// `∫₀¹ ω(φ)(η)` for a 1-form, one base variable.
pub fn pair_one(form: &FunctionalForm, phi: &[Expr], eta: &[Expr]) -> Rational {
    let mut integrand = Expr::zero();
    for (factors, c) in form.terms() {
        let d = &factors[0];
        let v = eta[d.field].diff_n(&Var::Base(0), d.index.count(0));
        integrand += &(&on_section(c, phi) * &v);
    }
    integrate_exact(&integrand, &[(q(0, 1), q(1, 1))]).unwrap()
}

/// `∫₀¹ ω(φ)(η, ζ)` for a 2-form, one base variable.
pub fn pair_two(form: &FunctionalForm, phi: &[Expr], eta: &[Expr], zeta: &[Expr]) -> Rational {
    let d = |w: &[Expr], b: &DeltaBasis| w[b.field].diff_n(&Var::Base(0), b.index.count(0));
    let mut integrand = Expr::zero();
    for (factors, c) in form.terms() {
        let (a, b) = (&factors[0], &factors[1]);
        let alt = &(&d(eta, a) * &d(zeta, b)) - &(&d(eta, b) * &d(zeta, a));
        integrand += &(&on_section(c, phi) * &alt);
    }
    integrate_exact(&integrand, &[(q(0, 1), q(1, 1))]).unwrap()
}
