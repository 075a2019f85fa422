//! Sparse Laurent polynomials over expression atoms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::{One, Zero};

use super::{Expr, Rational};

/// Product of atoms raised to nonzero integer powers, sorted by atom.
///
/// Ordered lexicographically on exponent vectors, with smaller atoms more
/// significant. This is a monomial order on the nonnegative part, which the
/// exact division below relies on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub(crate) struct Monomial(pub(crate) Vec<(Expr, i64)>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some((_, e)), None) => return e.cmp(&0),
                (None, Some((_, f))) => return 0.cmp(f),
                (Some((x, e)), Some((y, f))) => match x.cmp(y) {
                    Ordering::Equal => {
                        if e != f {
                            return e.cmp(f);
                        }
                        i += 1;
                        j += 1;
                    }
                    Ordering::Less => return e.cmp(&0),
                    Ordering::Greater => return 0.cmp(f),
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub(crate) fn one() -> Self {
        Monomial(Vec::new())
    }

    pub(crate) fn atom(a: Expr, k: i64) -> Self {
        if k == 0 {
            Self::one()
        } else {
            Monomial(alloc::vec![(a, k)])
        }
    }

    pub(crate) fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(x), None) => {
                    out.push(x.clone());
                    i += 1;
                }
                (None, Some(y)) => {
                    out.push(y.clone());
                    j += 1;
                }
                (Some((x, e)), Some((y, f))) => match x.cmp(y) {
                    Ordering::Less => {
                        out.push((x.clone(), *e));
                        i += 1;
                    }
                    Ordering::Greater => {
                        out.push((y.clone(), *f));
                        j += 1;
                    }
                    Ordering::Equal => {
                        if e + f != 0 {
                            out.push((x.clone(), e + f));
                        }
                        i += 1;
                        j += 1;
                    }
                },
                (None, None) => unreachable!(),
            }
        }
        Monomial(out)
    }

    pub(crate) fn inv(&self) -> Monomial {
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), -e)).collect())
    }

    pub(crate) fn pow(&self, k: i64) -> Monomial {
        if k == 0 {
            return Self::one();
        }
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), e * k)).collect())
    }

    /// `self / other` if the quotient has no negative exponents.
    pub(crate) fn div_nonneg(&self, other: &Monomial) -> Option<Monomial> {
        let q = self.mul(&other.inv());
        q.0.iter().all(|(_, e)| *e > 0).then_some(q)
    }

    fn exponent(&self, atom: &Expr) -> i64 {
        self.0.iter().find(|(a, _)| a == atom).map_or(0, |(_, e)| *e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub(crate) struct Poly {
    pub(crate) terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub(crate) fn zero() -> Self {
        Self::default()
    }

    pub(crate) fn constant(q: Rational) -> Self {
        Self::term(Monomial::one(), q)
    }

    pub(crate) fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub(crate) fn term(m: Monomial, q: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(m, q);
        }
        Poly { terms }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, q) = self.terms.iter().next().unwrap();
                m.is_one().then(|| q.clone())
            }
            _ => None,
        }
    }

    pub(crate) fn single_term(&self) -> Option<(&Monomial, &Rational)> {
        (self.terms.len() == 1).then(|| self.terms.iter().next().unwrap())
    }

    pub(crate) fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    fn add_term(&mut self, m: Monomial, q: Rational) {
        if q.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(c) => {
                *c += q;
                if c.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, q);
            }
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let (mut big, small) = if self.terms.len() >= other.terms.len() {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        for (m, q) in &small.terms {
            big.add_term(m.clone(), q.clone());
        }
        big
    }

    pub(crate) fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, q)| (m.clone(), -q)).collect() }
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, q1) in &self.terms {
            for (m2, q2) in &other.terms {
                out.add_term(m1.mul(m2), q1 * q2);
            }
        }
        out
    }

    pub(crate) fn mul_term(&self, m: &Monomial, q: &Rational) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m2, q2)| (m2.mul(m), q2 * q)).collect() }
    }

    pub(crate) fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// The largest monomial dividing every term (exponents may be negative).
    pub(crate) fn monomial_content(&self) -> Monomial {
        let mut atoms: Vec<Expr> = Vec::new();
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                if !atoms.contains(a) {
                    atoms.push(a.clone());
                }
            }
        }
        atoms.sort();
        let mut out = Vec::new();
        for a in atoms {
            let min = self.terms.keys().map(|m| m.exponent(&a)).min().unwrap_or(0);
            if min != 0 {
                out.push((a, min));
            }
        }
        Monomial(out)
    }

    /// Splits `self = c * m * p` with `p` free of monomial factors, nonnegative
    /// exponents and leading coefficient one.
    pub(crate) fn primitive_parts(&self) -> (Rational, Monomial, Poly) {
        let m = self.monomial_content();
        let c = self.leading().map(|(_, q)| q.clone()).unwrap_or_else(Rational::one);
        let p = self.mul_term(&m.inv(), &c.recip());
        (c, m, p)
    }

    /// Exact quotient by a polynomial with nonnegative exponents and no
    /// monomial content, or `None` if it does not divide.
    pub(crate) fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (lm, lc) = divisor.leading()?;
        // shift into the nonnegative orthant
        let content = self.monomial_content();
        let shift = Monomial(content.0.iter().filter(|(_, e)| *e < 0).cloned().collect());
        let mut rem = self.mul_term(&shift.inv(), &Rational::one());
        let mut quot = Poly::zero();
        while let Some((m, c)) = rem.leading() {
            let mq = m.div_nonneg(lm).or_else(|| (m == lm).then(Monomial::one))?;
            let cq = c / lc;
            rem = rem.sub(&divisor.mul_term(&mq, &cq));
            quot.add_term(mq, cq);
        }
        Some(quot.mul_term(&shift, &Rational::one()))
    }
}
