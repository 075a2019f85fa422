//! Immutable symbolic expressions.
//!
//! An [`Expr`] is a reference-counted tree. Construction goes through smart
//! constructors that flatten nested sums and products, fold numeric factors
//! into a single leading coefficient and drop neutral elements; anything
//! beyond that is the job of [`Expr::normalize`].

mod diff;
mod normal;
mod parse;
mod poly;
mod print;
mod subst;

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::context::VariableContext;
use crate::error::Result;

pub use diff::{partial, total_derivative, total_derivative_many};
pub use normal::primitive_numerator;
pub use parse::parse;
pub use subst::substitute;

pub type Rational = num_rational::BigRational;

/// Kind of a declared name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Independent,
    Parameter,
    Dependent,
    Function,
}

/// An independent variable or a parameter.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub kind: SymbolKind,
    pub name: Arc<str>,
}

/// A dependent variable differentiated along a multi-index.
///
/// The index is kept sorted in the declaration order of the owning context,
/// so `u_xy` and `u_yx` are the same atom. An empty index is the dependent
/// variable itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DerivAtom {
    pub base: Arc<str>,
    pub index: Vec<Arc<str>>,
}

impl DerivAtom {
    pub fn order(&self) -> usize {
        self.index.len()
    }

    /// True if `self` is `other` differentiated zero or more times.
    pub fn extends(&self, other: &DerivAtom) -> bool {
        self.base == other.base && multiset_difference(&self.index, &other.index).is_some()
    }
}

/// `big - small` as multisets, if `small` is contained in `big`.
pub(crate) fn multiset_difference(big: &[Arc<str>], small: &[Arc<str>]) -> Option<Vec<Arc<str>>> {
    let mut rest: Vec<Arc<str>> = big.to_vec();
    for s in small {
        let pos = rest.iter().position(|b| b == s)?;
        rest.remove(pos);
    }
    Some(rest)
}

/// Application `f^(prime)(arg)` of a declared arbitrary function.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncApp {
    pub name: Arc<str>,
    pub prime: u32,
    pub arg: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(Rational),
    Sym(Symbol),
    Deriv(DerivAtom),
    Func(FuncApp),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, i64),
    Ln(Expr),
    Exp(Expr),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl core::fmt::Debug for Expr {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn wrap(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(q: Rational) -> Self {
        Self::wrap(Node::Num(q))
    }

    pub fn int(i: i64) -> Self {
        Self::num(Rational::from_integer(BigInt::from(i)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::num(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn symbol(kind: SymbolKind, name: Arc<str>) -> Self {
        Self::wrap(Node::Sym(Symbol { kind, name }))
    }

    pub fn deriv(atom: DerivAtom) -> Self {
        Self::wrap(Node::Deriv(atom))
    }

    pub fn func(name: Arc<str>, prime: u32, arg: Expr) -> Self {
        Self::wrap(Node::Func(FuncApp { name, prime, arg }))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|q| q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|q| q.is_one())
    }

    /// Sum; nested sums are flattened and literal zeros dropped.
    pub fn add(terms: Vec<Expr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Add(inner) => flat.extend(inner.iter().cloned()),
                Node::Num(q) if q.is_zero() => {}
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Self::zero(),
            1 => flat.pop().unwrap(),
            _ => Self::wrap(Node::Add(flat)),
        }
    }

    /// Product; nested products are flattened and numeric factors folded into
    /// one leading coefficient.
    pub fn mul(factors: Vec<Expr>) -> Self {
        let mut coeff = Rational::one();
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f.node() {
                Node::Num(q) => coeff *= q,
                Node::Mul(inner) => {
                    for g in inner {
                        match g.node() {
                            Node::Num(q) => coeff *= q,
                            _ => flat.push(g.clone()),
                        }
                    }
                }
                _ => flat.push(f),
            }
        }
        if coeff.is_zero() {
            return Self::zero();
        }
        if flat.is_empty() {
            return Self::num(coeff);
        }
        if !coeff.is_one() {
            flat.insert(0, Self::num(coeff));
        }
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        Self::wrap(Node::Mul(flat))
    }

    /// Integer power. `0^k` with `k < 0` is left unevaluated; normalization
    /// reports it as a division by zero.
    pub fn pow(base: Expr, k: i64) -> Self {
        if k == 0 {
            return Self::one();
        }
        if k == 1 {
            return base;
        }
        match base.node() {
            Node::Num(q) if !(q.is_zero() && k < 0) => Self::num(rational_pow(q, k)),
            Node::Pow(inner, j) => Self::pow(inner.clone(), j * k),
            _ => Self::wrap(Node::Pow(base, k)),
        }
    }

    pub fn ln(arg: Expr) -> Self {
        match arg.node() {
            Node::Exp(inner) => inner.clone(),
            _ if arg.is_one() => Self::zero(),
            _ => Self::wrap(Node::Ln(arg)),
        }
    }

    pub fn exp(arg: Expr) -> Self {
        match arg.node() {
            Node::Ln(inner) => inner.clone(),
            _ if arg.is_zero() => Self::one(),
            _ => Self::wrap(Node::Exp(arg)),
        }
    }

    pub fn recip(self) -> Self {
        Self::pow(self, -1)
    }

    pub fn scale(&self, q: &Rational) -> Self {
        Self::mul(vec![Self::num(q.clone()), self.clone()])
    }

    /// Parse `text` against the declarations of `ctx`.
    pub fn parse(text: &str, ctx: &VariableContext) -> Result<Self> {
        parse::parse(text, ctx)
    }

    /// Canonical form: an expanded rational function over atoms with
    /// rational coefficients, printed in a fixed term order.
    pub fn normalize(&self) -> Result<Self> {
        normal::normalize(self)
    }

    /// Normalizes and reports whether the result is the literal zero.
    pub fn normalizes_to_zero(&self) -> Result<bool> {
        Ok(self.normalize()?.is_zero())
    }

    /// Rebuilds the tree bottom-up, giving `f` the chance to replace each
    /// atom (symbol, derivative atom or function application). Function
    /// arguments are rewritten before `f` sees the application.
    pub fn map_atoms<F>(&self, f: &mut F) -> Result<Expr>
    where
        F: FnMut(&Expr) -> Result<Option<Expr>>,
    {
        Ok(match self.node() {
            Node::Num(_) => self.clone(),
            Node::Sym(_) | Node::Deriv(_) => f(self)?.unwrap_or_else(|| self.clone()),
            Node::Func(app) => {
                let arg = app.arg.map_atoms(f)?;
                let rebuilt = if arg == app.arg {
                    self.clone()
                } else {
                    Expr::func(app.name.clone(), app.prime, arg)
                };
                f(&rebuilt)?.unwrap_or(rebuilt)
            }
            Node::Add(ts) => Expr::add(ts.iter().map(|t| t.map_atoms(f)).collect::<Result<_>>()?),
            Node::Mul(ts) => Expr::mul(ts.iter().map(|t| t.map_atoms(f)).collect::<Result<_>>()?),
            Node::Pow(b, k) => Expr::pow(b.map_atoms(f)?, *k),
            Node::Ln(a) => Expr::ln(a.map_atoms(f)?),
            Node::Exp(a) => Expr::exp(a.map_atoms(f)?),
        })
    }

    /// Calls `f` on every node, parents before children.
    pub fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self.node() {
            Node::Num(_) | Node::Sym(_) | Node::Deriv(_) => {}
            Node::Func(app) => app.arg.visit(f),
            Node::Add(ts) | Node::Mul(ts) => ts.iter().for_each(|t| t.visit(f)),
            Node::Pow(b, _) => b.visit(f),
            Node::Ln(a) | Node::Exp(a) => a.visit(f),
        }
    }

    /// All derivative atoms occurring anywhere in the expression.
    pub fn deriv_atoms(&self) -> BTreeSet<DerivAtom> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Deriv(d) = e.node() {
                out.insert(d.clone());
            }
        });
        out
    }

    /// Names of all symbols, dependents and functions occurring in the
    /// expression.
    pub fn names(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| match e.node() {
            Node::Sym(s) => {
                out.insert(s.name.clone());
            }
            Node::Deriv(d) => {
                out.insert(d.base.clone());
                out.extend(d.index.iter().cloned());
            }
            Node::Func(app) => {
                out.insert(app.name.clone());
            }
            _ => {}
        });
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.names().iter().any(|n| &**n == name)
    }

    /// Highest derivative order of any dependent variable in the expression.
    pub fn max_order(&self) -> usize {
        self.deriv_atoms().iter().map(DerivAtom::order).max().unwrap_or(0)
    }

    /// True when the expression contains no variables at all (parameters
    /// and numbers only).
    pub fn is_constant(&self) -> bool {
        let mut constant = true;
        self.visit(&mut |e| match e.node() {
            Node::Deriv(_) | Node::Func(_) => constant = false,
            Node::Sym(s) if s.kind != SymbolKind::Parameter => constant = false,
            _ => {}
        });
        constant
    }
}

pub(crate) fn rational_pow(q: &Rational, k: i64) -> Rational {
    let base = if k < 0 { q.recip() } else { q.clone() };
    let mut acc = Rational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= &base;
    }
    acc
}

impl From<i64> for Expr {
    fn from(i: i64) -> Self {
        Expr::int(i)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(vec![self.clone(), rhs.clone()])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, -rhs])
    }
}

impl ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::add(vec![self.clone(), -rhs.clone()])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(vec![self.clone(), rhs.clone()])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs.recip()])
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::mul(vec![Expr::int(-1), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl core::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::add(iter.collect())
    }
}

impl core::iter::Product for Expr {
    fn product<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::mul(iter.collect())
    }
}
