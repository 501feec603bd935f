use std::cmp::Ordering;
use std::sync::Arc;

use super::Expr;

/// Derivative counts per base coordinate. Trailing zeros are trimmed so the
/// representation is canonical regardless of how many base variables exist.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn unit(direction: usize) -> Self {
        Self::empty().incremented(direction)
    }

    pub fn from_counts(counts: &[u32]) -> Self {
        let mut v = counts.to_vec();
        while v.last() == Some(&0) {
            v.pop();
        }
        MultiIndex(v)
    }

    /// Builds the multi-index of a sequence of directions, e.g. `[0, 0, 1]`.
    pub fn from_directions(dirs: &[usize]) -> Self {
        dirs.iter().fold(Self::empty(), |m, &d| m.incremented(d))
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn count(&self, direction: usize) -> u32 {
        self.0.get(direction).copied().unwrap_or(0)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn incremented(&self, direction: usize) -> Self {
        let mut v = self.0.clone();
        if v.len() <= direction {
            v.resize(direction + 1, 0);
        }
        v[direction] += 1;
        MultiIndex(v)
    }

    pub fn decremented(&self, direction: usize) -> Option<Self> {
        if self.count(direction) == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[direction] -= 1;
        Some(Self::from_counts(&v))
    }

    pub fn add(&self, other: &MultiIndex) -> Self {
        let n = self.0.len().max(other.0.len());
        let v: Vec<u32> = (0..n).map(|i| self.count(i) + other.count(i)).collect();
        Self::from_counts(&v)
    }

    /// `self - other` when `other` is contained componentwise in `self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<Self> {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(self.count(i).checked_sub(other.count(i))?);
        }
        Some(Self::from_counts(&v))
    }

    /// The directions with multiplicity, in ascending order.
    pub fn directions(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The jet coordinate `u^field_index`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub field: usize,
    pub index: MultiIndex,
}

impl JetVar {
    pub fn new(field: usize, index: MultiIndex) -> Self {
        JetVar { field, index }
    }

    pub fn field(field: usize) -> Self {
        JetVar::new(field, MultiIndex::empty())
    }

    pub fn order(&self) -> u32 {
        self.index.order()
    }

    pub fn prolonged(&self, direction: usize) -> Self {
        JetVar::new(self.field, self.index.incremented(direction))
    }
}

/// Application of a named function symbol, possibly with partial
/// derivatives taken with respect to its argument slots.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FnApp {
    pub name: Arc<str>,
    pub args: Vec<Expr>,
    pub deriv: Vec<u32>,
}

impl FnApp {
    pub fn new(name: impl Into<Arc<str>>, args: Vec<Expr>) -> Self {
        let deriv = vec![0; args.len()];
        FnApp {
            name: name.into(),
            args,
            deriv,
        }
    }

    pub fn is_underived(&self) -> bool {
        self.deriv.iter().all(|&d| d == 0)
    }

    pub fn derivative_order(&self) -> u32 {
        self.deriv.iter().sum()
    }

    pub fn with_slot_derivative(&self, slot: usize) -> Self {
        let mut d = self.clone();
        d.deriv[slot] += 1;
        d
    }
}

/// Indivisible factor of a monomial. The variant order is the kind order of
/// the canonical form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Param(Arc<str>),
    Base(usize),
    Jet(JetVar),
    Func(FnApp),
    Exp(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
}

impl Atom {
    pub fn as_var(&self) -> Option<Var> {
        match self {
            Atom::Param(p) => Some(Var::Param(p.clone())),
            Atom::Base(i) => Some(Var::Base(*i)),
            Atom::Jet(j) => Some(Var::Jet(j.clone())),
            _ => None,
        }
    }

    pub fn is_transcendental(&self) -> bool {
        matches!(self, Atom::Exp(_) | Atom::Sin(_) | Atom::Cos(_))
    }
}

/// Something an expression can be differentiated by or substituted for.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Param(Arc<str>),
    Base(usize),
    Jet(JetVar),
}

impl Var {
    pub fn to_atom(&self) -> Atom {
        match self {
            Var::Param(p) => Atom::Param(p.clone()),
            Var::Base(i) => Atom::Base(*i),
            Var::Jet(j) => Atom::Jet(j.clone()),
        }
    }

    pub fn jet(field: usize, index: MultiIndex) -> Var {
        Var::Jet(JetVar::new(field, index))
    }
}
