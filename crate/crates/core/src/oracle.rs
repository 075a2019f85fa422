//! Numeric verification of symbolic identities.
//!
//! Dependent variables are bound to random polynomials in their arguments,
//! arbitrary functions to random univariate polynomials, and expressions are
//! evaluated at random points. Evaluation is exact rational arithmetic; only
//! `ln` and `exp` round through `f64`, and their results are fed back as
//! exact rationals so that repeated uses of one atom stay consistent.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{DerivAtom, Expr, Node, Rational, SymbolKind};

/// Absolute tolerance of every numeric verdict.
pub const TOLERANCE: f64 = 1e-9;
/// Denominators smaller than this in magnitude make a sample singular.
pub const SINGULAR_EPS: f64 = 1e-3;

const MAX_DEGREE: u32 = 4;
const FUNCTION_DEGREE: usize = 3;
const ATTEMPTS_PER_SAMPLE: u64 = 25;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("singular point")]
    Singular,
    #[error("{0} outside its domain")]
    Domain(String),
    #[error("`{0}` is not bound")]
    Unbound(String),
    #[error("overflow in {0}")]
    Overflow(String),
}

/// Polynomial in named variables with rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    vars: Vec<Arc<str>>,
    terms: Vec<(Vec<u32>, Rational)>,
}

impl MultiPoly {
    pub fn new(vars: Vec<Arc<str>>, terms: Vec<(Vec<u32>, Rational)>) -> Self {
        MultiPoly { vars, terms }
    }

    fn random(vars: Vec<Arc<str>>, rng: &mut ChaCha8Rng) -> Self {
        let mut exps = Vec::new();
        monomials_up_to(vars.len(), MAX_DEGREE, &mut Vec::new(), &mut exps);
        let terms = exps.into_iter().map(|e| (e, random_coefficient(rng))).collect();
        MultiPoly { vars, terms }
    }

    pub fn derivative(&self, var: &str) -> MultiPoly {
        let Some(i) = self.vars.iter().position(|v| &**v == var) else {
            return MultiPoly { vars: self.vars.clone(), terms: Vec::new() };
        };
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|(e, q)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (e2, q * Rational::from_integer(BigInt::from(e[i])))
            })
            .collect();
        MultiPoly { vars: self.vars.clone(), terms }
    }

    pub fn eval(&self, point: &BTreeMap<Arc<str>, Rational>) -> core::result::Result<Rational, EvalError> {
        let mut vals = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            vals.push(point.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.to_string()))?);
        }
        let mut acc = Rational::zero();
        for (e, q) in &self.terms {
            let mut t = q.clone();
            for (x, k) in vals.iter().zip(e) {
                for _ in 0..*k {
                    t *= x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// The polynomial as an expression over `ctx`'s independents.
    pub fn to_expr(&self, ctx: &VariableContext) -> Result<Expr> {
        let mut terms = Vec::new();
        for (e, q) in &self.terms {
            let mut f = alloc::vec![Expr::num(q.clone())];
            for (v, k) in self.vars.iter().zip(e) {
                f.push(Expr::pow(ctx.symbol(v)?, *k as i64));
            }
            terms.push(Expr::mul(f));
        }
        Ok(Expr::add(terms))
    }
}

fn monomials_up_to(nvars: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == nvars {
        out.push(prefix.clone());
        return;
    }
    for k in 0..=budget {
        prefix.push(k);
        monomials_up_to(nvars, budget - k, prefix, out);
        prefix.pop();
    }
}

/// Univariate polynomial, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<Rational>,
}

impl UniPoly {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        UniPoly { coeffs }
    }

    pub fn nth_derivative(&self, n: u32) -> UniPoly {
        let mut c = self.coeffs.clone();
        for _ in 0..n {
            c = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, q)| q * Rational::from_integer(BigInt::from(i)))
                .collect();
        }
        UniPoly { coeffs: c }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }
}

/// Concrete values for every symbol of a context.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericBinding {
    pub dependents: BTreeMap<Arc<str>, MultiPoly>,
    pub functions: BTreeMap<Arc<str>, UniPoly>,
    pub parameters: BTreeMap<Arc<str>, Rational>,
    pub point: BTreeMap<Arc<str>, Rational>,
    pub seed: u64,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// Rational in [-2, 2] with denominator 64.
fn random_coordinate(rng: &mut ChaCha8Rng) -> Rational {
    let k = uniform(rng, 257) as i64 - 128;
    Rational::new(BigInt::from(k), BigInt::from(64))
}

/// Rational p/q with |p| <= 8 and q in {1, 2, 4}.
fn random_coefficient(rng: &mut ChaCha8Rng) -> Rational {
    let p = uniform(rng, 17) as i64 - 8;
    let q = [1i64, 2, 4][uniform(rng, 3) as usize];
    Rational::new(BigInt::from(p), BigInt::from(q))
}

impl NumericBinding {
    /// Deterministic random binding for every symbol of `ctx`.
    pub fn random(ctx: &VariableContext, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point = ctx.independents().iter().map(|v| (v.clone(), random_coordinate(&mut rng))).collect();
        let parameters = ctx.parameters().iter().map(|p| (p.clone(), random_coordinate(&mut rng))).collect();
        let dependents = ctx
            .dependents()
            .iter()
            .map(|d| (d.name.clone(), MultiPoly::random(d.args.clone(), &mut rng)))
            .collect();
        let functions = ctx
            .functions()
            .iter()
            .map(|f| {
                let c = (0..=FUNCTION_DEGREE).map(|_| random_coefficient(&mut rng)).collect();
                (f.name.clone(), UniPoly::new(c))
            })
            .collect();
        NumericBinding { dependents, functions, parameters, point, seed }
    }
}

trait Scalar: Clone {
    fn lift(q: Rational) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn recip(&self) -> core::result::Result<Self, EvalError>;
    fn exp(&self) -> core::result::Result<Self, EvalError>;
    fn ln(&self) -> core::result::Result<Self, EvalError>;
    fn value(&self) -> &Rational;

    fn powi(&self, k: i64) -> core::result::Result<Self, EvalError> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut acc = Self::lift(Rational::one());
        for _ in 0..k.unsigned_abs() {
            acc = acc.times(&base);
        }
        Ok(acc)
    }
}

fn small(q: &Rational) -> bool {
    q.abs().to_f64().is_some_and(|v| v < SINGULAR_EPS)
}

fn float_to_rational(v: f64, what: &str) -> core::result::Result<Rational, EvalError> {
    if !v.is_finite() {
        return Err(EvalError::Overflow(what.to_string()));
    }
    Rational::from_float(v).ok_or_else(|| EvalError::Overflow(what.to_string()))
}

fn exp_rational(q: &Rational) -> core::result::Result<Rational, EvalError> {
    let x = q.to_f64().ok_or_else(|| EvalError::Overflow("exp".into()))?;
    if x.abs() > 40.0 {
        return Err(EvalError::Overflow("exp".into()));
    }
    float_to_rational(libm::exp(x), "exp")
}

fn ln_rational(q: &Rational) -> core::result::Result<Rational, EvalError> {
    if !q.is_positive() || small(q) {
        return Err(EvalError::Domain("ln".into()));
    }
    let x = q.to_f64().ok_or_else(|| EvalError::Overflow("ln".into()))?;
    float_to_rational(libm::log(x), "ln")
}

impl Scalar for Rational {
    fn lift(q: Rational) -> Self {
        q
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> core::result::Result<Self, EvalError> {
        if self.is_zero() || small(self) {
            return Err(EvalError::Singular);
        }
        Ok(Rational::recip(self))
    }
    fn exp(&self) -> core::result::Result<Self, EvalError> {
        exp_rational(self)
    }
    fn ln(&self) -> core::result::Result<Self, EvalError> {
        ln_rational(self)
    }
    fn value(&self) -> &Rational {
        self
    }
}

/// Value with a first-order tangent.
#[derive(Clone, Debug)]
struct Dual {
    v: Rational,
    d: Rational,
}

impl Scalar for Dual {
    fn lift(q: Rational) -> Self {
        Dual { v: q, d: Rational::zero() }
    }
    fn plus(&self, o: &Self) -> Self {
        Dual { v: &self.v + &o.v, d: &self.d + &o.d }
    }
    fn times(&self, o: &Self) -> Self {
        Dual { v: &self.v * &o.v, d: &self.v * &o.d + &self.d * &o.v }
    }
    fn recip(&self) -> core::result::Result<Self, EvalError> {
        let r = <Rational as Scalar>::recip(&self.v)?;
        let d = -(&self.d * &r * &r);
        Ok(Dual { v: r, d })
    }
    fn exp(&self) -> core::result::Result<Self, EvalError> {
        let e = exp_rational(&self.v)?;
        Ok(Dual { d: &e * &self.d, v: e })
    }
    fn ln(&self) -> core::result::Result<Self, EvalError> {
        let l = ln_rational(&self.v)?;
        Ok(Dual { v: l, d: &self.d / &self.v })
    }
    fn value(&self) -> &Rational {
        &self.v
    }
}

/// How atoms are valued: plain or along a direction.
trait Leaves<S: Scalar> {
    fn symbol(&self, name: &str, kind: SymbolKind) -> core::result::Result<S, EvalError>;
    fn deriv(&self, atom: &DerivAtom) -> core::result::Result<S, EvalError>;
    fn func(&self, name: &str, prime: u32, arg: &S) -> core::result::Result<S, EvalError>;
}

struct Plain<'a>(&'a NumericBinding);

fn symbol_value(b: &NumericBinding, name: &str, kind: SymbolKind) -> core::result::Result<Rational, EvalError> {
    let map = if kind == SymbolKind::Parameter { &b.parameters } else { &b.point };
    map.get(name).cloned().ok_or_else(|| EvalError::Unbound(name.to_string()))
}

fn deriv_poly(b: &NumericBinding, atom: &DerivAtom) -> core::result::Result<MultiPoly, EvalError> {
    let mut p = b.dependents.get(&atom.base).cloned().ok_or_else(|| EvalError::Unbound(atom.base.to_string()))?;
    for v in &atom.index {
        p = p.derivative(v);
    }
    Ok(p)
}

fn func_poly<'b>(b: &'b NumericBinding, name: &str) -> core::result::Result<&'b UniPoly, EvalError> {
    b.functions.get(name).ok_or_else(|| EvalError::Unbound(name.to_string()))
}

impl Leaves<Rational> for Plain<'_> {
    fn symbol(&self, name: &str, kind: SymbolKind) -> core::result::Result<Rational, EvalError> {
        symbol_value(self.0, name, kind)
    }
    fn deriv(&self, atom: &DerivAtom) -> core::result::Result<Rational, EvalError> {
        deriv_poly(self.0, atom)?.eval(&self.0.point)
    }
    fn func(&self, name: &str, prime: u32, arg: &Rational) -> core::result::Result<Rational, EvalError> {
        Ok(func_poly(self.0, name)?.nth_derivative(prime).eval(arg))
    }
}

struct Directional<'a> {
    binding: &'a NumericBinding,
    var: &'a str,
}

impl Leaves<Dual> for Directional<'_> {
    fn symbol(&self, name: &str, kind: SymbolKind) -> core::result::Result<Dual, EvalError> {
        let v = symbol_value(self.binding, name, kind)?;
        let d = if kind == SymbolKind::Independent && name == self.var { Rational::one() } else { Rational::zero() };
        Ok(Dual { v, d })
    }
    fn deriv(&self, atom: &DerivAtom) -> core::result::Result<Dual, EvalError> {
        let p = deriv_poly(self.binding, atom)?;
        Ok(Dual { v: p.eval(&self.binding.point)?, d: p.derivative(self.var).eval(&self.binding.point)? })
    }
    fn func(&self, name: &str, prime: u32, arg: &Dual) -> core::result::Result<Dual, EvalError> {
        let f = func_poly(self.binding, name)?;
        let v = f.nth_derivative(prime).eval(&arg.v);
        let d = f.nth_derivative(prime + 1).eval(&arg.v) * &arg.d;
        Ok(Dual { v, d })
    }
}

fn eval_with<S: Scalar, L: Leaves<S>>(e: &Expr, leaves: &L) -> core::result::Result<S, EvalError> {
    Ok(match e.node() {
        Node::Num(q) => S::lift(q.clone()),
        Node::Sym(s) => leaves.symbol(&s.name, s.kind)?,
        Node::Deriv(d) => leaves.deriv(d)?,
        Node::Func(app) => {
            let a = eval_with(&app.arg, leaves)?;
            leaves.func(&app.name, app.prime, &a)?
        }
        Node::Add(ts) => {
            let mut acc = S::lift(Rational::zero());
            for t in ts {
                acc = acc.plus(&eval_with(t, leaves)?);
            }
            acc
        }
        Node::Mul(fs) => {
            let mut acc = S::lift(Rational::one());
            for f in fs {
                acc = acc.times(&eval_with(f, leaves)?);
            }
            acc
        }
        Node::Pow(b, k) => eval_with(b, leaves)?.powi(*k)?,
        Node::Ln(a) => eval_with(a, leaves)?.ln()?,
        Node::Exp(a) => eval_with(a, leaves)?.exp()?,
    })
}

/// Exact value of `e` under `binding` (up to rounding inside `ln`/`exp`).
pub fn eval_exact(e: &Expr, binding: &NumericBinding) -> core::result::Result<Rational, EvalError> {
    eval_with(e, &Plain(binding))
}

/// Value of `e` under `binding` as a float.
pub fn eval_numeric(e: &Expr, binding: &NumericBinding) -> core::result::Result<f64, EvalError> {
    let q = eval_exact(e, binding)?;
    q.to_f64().ok_or_else(|| EvalError::Overflow("result".into()))
}

/// Value and partial derivative along the independent variable `var` of the
/// function obtained by composing `e` with the bound polynomials. Computed
/// with dual numbers, without symbolic differentiation.
pub fn eval_directional(
    e: &Expr,
    binding: &NumericBinding,
    var: &str,
) -> core::result::Result<(f64, f64), EvalError> {
    let d: Dual = eval_with(e, &Directional { binding, var })?;
    let to = |q: &Rational| q.to_f64().ok_or_else(|| EvalError::Overflow("result".into()));
    Ok((to(d.value())?, to(&d.d)?))
}

/// Outcome of a randomized check.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub max_abs_residual: f64,
    /// Samples that evaluated without hitting a singular point.
    pub evaluated: usize,
    /// No sample could be evaluated; never counts as a pass.
    pub inconclusive: bool,
}

/// Draws `samples` bindings and points and checks `|e| <= 1e-9` at each.
/// Points where a denominator is below 1e-3 in magnitude, or a logarithm is
/// out of its domain, are redrawn.
pub fn verify_zero(e: &Expr, ctx: &VariableContext, samples: usize, seed: u64) -> Verdict {
    let mut max = 0.0f64;
    let mut evaluated = 0;
    for i in 0..samples.max(1) as u64 {
        for attempt in 0..ATTEMPTS_PER_SAMPLE {
            let s = mix(mix(seed ^ mix(i)).wrapping_add(attempt));
            let binding = NumericBinding::random(ctx, s);
            match eval_exact(e, &binding) {
                Ok(v) => {
                    let r = v.abs().to_f64().unwrap_or(f64::INFINITY);
                    max = max.max(r);
                    evaluated += 1;
                    break;
                }
                Err(EvalError::Singular | EvalError::Domain(_) | EvalError::Overflow(_)) => continue,
                Err(EvalError::Unbound(_)) => {
                    return Verdict { pass: false, max_abs_residual: f64::INFINITY, evaluated, inconclusive: true }
                }
            }
        }
    }
    let inconclusive = evaluated == 0;
    Verdict { pass: !inconclusive && max <= TOLERANCE, max_abs_residual: max, evaluated, inconclusive }
}

pub fn verify_equal(a: &Expr, b: &Expr, ctx: &VariableContext, samples: usize, seed: u64) -> Verdict {
    verify_zero(&(a - b), ctx, samples, seed)
}

/// Zero test used by every symbolic decision: normalize and compare with
/// zero, then confirm with a few random numeric samples. A disagreement is
/// a hard error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroTest {
    pub seed: u64,
    pub samples: usize,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest { seed: 0x5EED, samples: 5 }
    }
}

impl ZeroTest {
    pub fn with_seed(seed: u64) -> Self {
        ZeroTest { seed, ..Self::default() }
    }

    pub fn is_zero(&self, e: &Expr, ctx: &VariableContext) -> Result<bool> {
        let symbolic = e.normalize()?.is_zero();
        let numeric = verify_zero(e, ctx, self.samples, self.seed);
        if numeric.inconclusive || numeric.pass == symbolic {
            return Ok(symbolic);
        }
        Err(Error::ZeroCheckDisagreement(format!(
            "{e} (normal form says {}, max residual {:e})",
            if symbolic { "zero" } else { "nonzero" },
            numeric.max_abs_residual
        )))
    }
}
