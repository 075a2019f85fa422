//! Lie point symmetry generators and their prolongation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Signed;

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{total_derivative_many, DerivAtom, Expr, Node};

/// `X = xi^i d/dx^i + eta^a d/du^a` with coefficients free of derivatives.
///
/// Coefficients are stored in the declaration order of the context the
/// generator was built over; every variable has an entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    name: String,
    xi: Vec<(Arc<str>, Expr)>,
    eta: Vec<(Arc<str>, Expr)>,
}

fn check_point_coefficient(name: &str, key: &str, e: &Expr, ctx: &VariableContext) -> Result<()> {
    ctx.check_expr(e).map_err(|err| Error::InvalidGenerator(format!("{name}: {key} = {e}: {err}")))?;
    if e.deriv_atoms().iter().any(|a| a.order() > 0) {
        return Err(Error::InvalidGenerator(format!(
            "{name}: {key} = {e} depends on derivatives; only point symmetries are supported"
        )));
    }
    Ok(())
}

/// Splits at commas that are not inside parentheses.
pub(crate) fn split_top_level(text: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&text[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

impl Generator {
    pub fn new(name: &str, ctx: &VariableContext, xi: Vec<Expr>, eta: Vec<Expr>) -> Result<Self> {
        if xi.len() != ctx.independents().len() || eta.len() != ctx.dependents().len() {
            return Err(Error::Dimension(format!(
                "{name}: expected {} xi and {} eta coefficients",
                ctx.independents().len(),
                ctx.dependents().len()
            )));
        }
        let xi: Vec<_> = ctx.independents().iter().cloned().zip(xi).collect();
        let eta: Vec<_> = ctx.dependents().iter().map(|d| d.name.clone()).zip(eta).collect();
        for (v, e) in &xi {
            check_point_coefficient(name, &format!("xi_{v}"), e, ctx)?;
        }
        for (u, e) in &eta {
            check_point_coefficient(name, &format!("eta_{u}"), e, ctx)?;
        }
        Ok(Generator { name: name.to_string(), xi, eta })
    }

    pub fn zero(name: &str, ctx: &VariableContext) -> Self {
        Generator {
            name: name.to_string(),
            xi: ctx.independents().iter().map(|v| (v.clone(), Expr::zero())).collect(),
            eta: ctx.dependents().iter().map(|d| (d.name.clone(), Expr::zero())).collect(),
        }
    }

    /// Builds a generator from `xi_<var>` / `eta_<dep>` assignments; missing
    /// coefficients are zero.
    pub fn from_assignments(name: &str, ctx: &VariableContext, assignments: &[(&str, Expr)]) -> Result<Self> {
        let mut xi: Vec<Expr> = ctx.independents().iter().map(|_| Expr::zero()).collect();
        let mut eta: Vec<Expr> = ctx.dependents().iter().map(|_| Expr::zero()).collect();
        let mut seen: Vec<&str> = Vec::new();
        for (key, value) in assignments {
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::InvalidGenerator(format!("{name}: `{key}` assigned twice")));
            }
            seen.push(key);
            let slot = if let Some(v) = key.strip_prefix("xi_") {
                ctx.independent_position(v).map(|i| &mut xi[i])
            } else if let Some(u) = key.strip_prefix("eta_") {
                ctx.dependents().iter().position(|d| &*d.name == u).map(|i| &mut eta[i])
            } else {
                None
            };
            let slot = slot.ok_or_else(|| Error::InvalidGenerator(format!("{name}: unknown coefficient `{key}`")))?;
            *slot = value.clone();
        }
        Self::new(name, ctx, xi, eta)
    }

    /// Parses `xi_t = 1, xi_x = c1` style text.
    pub fn parse(name: &str, text: &str, ctx: &VariableContext) -> Result<Self> {
        let mut assignments = Vec::new();
        for part in split_top_level(text, ',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidGenerator(format!("{name}: expected `coefficient = expression` in `{part}`")))?;
            assignments.push((key.trim(), Expr::parse(value, ctx)?));
        }
        Self::from_assignments(name, ctx, &assignments)
    }

    /// `sum_k c_k X_k` for constant coefficients `c_k`.
    pub fn linear_combination(name: &str, ctx: &VariableContext, terms: &[(Expr, &Generator)]) -> Result<Self> {
        let mut xi: Vec<Expr> = ctx.independents().iter().map(|_| Expr::zero()).collect();
        let mut eta: Vec<Expr> = ctx.dependents().iter().map(|_| Expr::zero()).collect();
        for (c, g) in terms {
            if !c.is_constant() {
                return Err(Error::InvalidGenerator(format!("{name}: coefficient {c} is not constant")));
            }
            if g.xi.len() != xi.len() || g.eta.len() != eta.len() {
                return Err(Error::Dimension(format!("{} does not match the context", g.name)));
            }
            for (acc, (_, e)) in xi.iter_mut().zip(&g.xi) {
                *acc = &*acc + &(c * e);
            }
            for (acc, (_, e)) in eta.iter_mut().zip(&g.eta) {
                *acc = &*acc + &(c * e);
            }
        }
        let xi = xi.iter().map(Expr::normalize).collect::<Result<_>>()?;
        let eta = eta.iter().map(Expr::normalize).collect::<Result<_>>()?;
        Self::new(name, ctx, xi, eta)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn xi(&self) -> &[(Arc<str>, Expr)] {
        &self.xi
    }

    pub fn eta(&self) -> &[(Arc<str>, Expr)] {
        &self.eta
    }

    pub fn xi_for(&self, var: &str) -> Option<&Expr> {
        self.xi.iter().find(|(v, _)| &**v == var).map(|(_, e)| e)
    }

    pub fn eta_for(&self, dep: &str) -> Option<&Expr> {
        self.eta.iter().find(|(u, _)| &**u == dep).map(|(_, e)| e)
    }

    pub fn is_zero(&self) -> Result<bool> {
        for (_, e) in self.xi.iter().chain(&self.eta) {
            if !e.normalizes_to_zero()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `W = eta^a - xi^j u^a_j`.
    pub fn characteristic(&self, alpha: &str, ctx: &VariableContext) -> Result<Expr> {
        let eta = self.eta_for(alpha).ok_or_else(|| Error::NotDependent(alpha.to_string()))?;
        let mut terms = alloc::vec![eta.clone()];
        for (v, xi) in &self.xi {
            if !xi.is_zero() {
                terms.push(-(xi * &ctx.derivative(alpha, &[v])?));
            }
        }
        Ok(Expr::add(terms))
    }

    /// Prolonged coefficient `zeta_J = D_J(W) + xi^j u_{jJ}` of the
    /// derivative atom `u_J` (for `J` empty this is `eta`). Normalized.
    pub fn zeta(&self, atom: &DerivAtom, ctx: &VariableContext) -> Result<Expr> {
        if atom.index.is_empty() {
            return self
                .eta_for(&atom.base)
                .cloned()
                .ok_or_else(|| Error::NotDependent(atom.base.to_string()));
        }
        let w = self.characteristic(&atom.base, ctx)?;
        let mut terms = alloc::vec![total_derivative_many(&w, &atom.index, ctx)?];
        for (v, xi) in &self.xi {
            if xi.is_zero() {
                continue;
            }
            let mut index: Vec<&str> = atom.index.iter().map(|s| &**s).collect();
            index.push(v);
            terms.push(xi * &ctx.derivative(&atom.base, &index)?);
        }
        Expr::add(terms).normalize()
    }

    /// All prolonged coefficients up to `order`.
    pub fn prolong(&self, order: usize, ctx: &VariableContext) -> Result<Prolongation> {
        let mut zeta = BTreeMap::new();
        for dep in ctx.dependents() {
            let mut layer: Vec<Vec<Arc<str>>> = alloc::vec![Vec::new()];
            for _ in 0..order {
                let mut next = Vec::new();
                for idx in &layer {
                    // non-decreasing argument positions enumerate each multiset once
                    let start = idx.last().and_then(|v| dep.args.iter().position(|a| a == v)).unwrap_or(0);
                    for a in &dep.args[start..] {
                        let mut j = idx.clone();
                        j.push(a.clone());
                        next.push(j);
                    }
                }
                for j in &next {
                    let atom = DerivAtom { base: dep.name.clone(), index: ctx.sort_index(j.clone()) };
                    let z = self.zeta(&atom, ctx)?;
                    zeta.insert(atom, z);
                }
                layer = next;
            }
        }
        Ok(Prolongation { order, zeta })
    }

    /// `X(e)`: the prolonged generator applied to `e`, normalized.
    /// Prolonged coefficients are computed for the atoms that occur.
    pub fn apply(&self, e: &Expr, ctx: &VariableContext) -> Result<Expr> {
        let mut terms = Vec::new();
        for (v, xi) in &self.xi {
            if xi.is_zero() {
                continue;
            }
            let d = e.partial(&ctx.symbol(v)?);
            if !d.is_zero() {
                terms.push(xi * &d);
            }
        }
        for atom in e.deriv_atoms() {
            let d = e.partial(&Expr::deriv(atom.clone()));
            if d.is_zero() {
                continue;
            }
            let z = self.zeta(&atom, ctx)?;
            if !z.is_zero() {
                terms.push(z * d);
            }
        }
        Expr::add(terms).normalize()
    }
}

impl fmt::Display for Generator {
    /// Vector-field form, e.g. `t*d_t + x*d_x`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in self.xi.iter().chain(&self.eta) {
            if c.is_zero() {
                continue;
            }
            let negative = match c.node() {
                Node::Num(q) => q.is_negative(),
                Node::Mul(fs) => fs[0].as_num().is_some_and(|q| q.is_negative()),
                _ => false,
            };
            let c = &if negative { -c } else { c.clone() };
            match (first, negative) {
                (true, true) => f.write_str("-")?,
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
                (true, false) => {}
            }
            first = false;
            match c.node() {
                _ if c.is_one() => write!(f, "d_{v}")?,
                Node::Add(_) => write!(f, "({c})*d_{v}")?,
                _ => write!(f, "{c}*d_{v}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Prolonged coefficients `zeta^a_J` keyed by the atom `u^a_J`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prolongation {
    pub order: usize,
    zeta: BTreeMap<DerivAtom, Expr>,
}

impl Prolongation {
    pub fn get(&self, atom: &DerivAtom) -> Option<&Expr> {
        self.zeta.get(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DerivAtom, &Expr)> {
        self.zeta.iter()
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> VariableContext {
        VariableContext::build(&["t", "x", "y"], &["u"], &["c1", "c2"], &["f", "g"]).unwrap()
    }

    fn p(s: &str) -> Expr {
        Expr::parse(s, &ctx()).unwrap()
    }

    fn atom(s: &str) -> DerivAtom {
        p(s).deriv_atoms().into_iter().next().unwrap()
    }

    #[test]
    fn characteristic_examples() {
        let c = ctx();
        let x1 = Generator::parse("X1", "xi_t=1", &c).unwrap();
        assert_eq!(x1.characteristic("u", &c).unwrap().normalize().unwrap(), p("-D(u,t)").normalize().unwrap());
        let x4 = Generator::parse("X4", "xi_t = t, xi_x = x, xi_y = y, eta_u = 0", &c).unwrap();
        let w = x4.characteristic("u", &c).unwrap();
        assert!((w - p("-t*D(u,t) - x*D(u,x) - y*D(u,y)")).normalizes_to_zero().unwrap());
        let s = Generator::parse("S", "eta_u = u", &c).unwrap();
        assert_eq!(s.characteristic("u", &c).unwrap(), p("u"));
    }

    #[test]
    fn prolongation_examples() {
        let c = ctx();
        let x1 = Generator::parse("X1", "xi_t=1", &c).unwrap();
        assert!(x1.zeta(&atom("D(u,x)"), &c).unwrap().is_zero());
        let x4 = Generator::parse("X4", "xi_t = t, xi_x = x, xi_y = y", &c).unwrap();
        assert_eq!(x4.zeta(&atom("D(u,t)"), &c).unwrap(), p("-D(u,t)").normalize().unwrap());
        let s = Generator::parse("S", "eta_u = u", &c).unwrap();
        assert_eq!(s.zeta(&atom("D(u,x)"), &c).unwrap(), p("D(u,x)"));
        let pr = x4.prolong(2, &c).unwrap();
        assert_eq!(pr.len(), 3 + 6);
        assert_eq!(pr.get(&atom("D(u,t,x)")).unwrap(), &p("-2*D(u,t,x)").normalize().unwrap());
    }

    #[test]
    fn apply_examples() {
        let c = ctx();
        let x1 = Generator::parse("X1", "xi_t=1", &c).unwrap();
        assert!(x1.apply(&p("-D(u,t)"), &c).unwrap().is_zero());
        let x4 = Generator::parse("X4", "xi_t = t, xi_x = x, xi_y = y", &c).unwrap();
        assert_eq!(x4.apply(&p("-D(u,t)"), &c).unwrap(), p("D(u,t)"));
        let x2 = Generator::parse("X2", "xi_x=1", &c).unwrap();
        assert!(x2.apply(&p("f(u)*D(u,x)"), &c).unwrap().is_zero());
        let s = Generator::parse("S", "eta_u = u", &c).unwrap();
        assert_eq!(s.apply(&p("f(u)"), &c).unwrap(), p("u*f'(u)").normalize().unwrap());
    }

    #[test]
    fn rejects_bad_generators() {
        let c = ctx();
        assert!(matches!(Generator::parse("B", "xi_t = D(u,x)", &c), Err(Error::InvalidGenerator(_))));
        assert!(matches!(Generator::parse("B", "xi_z = 1", &c), Err(Error::InvalidGenerator(_))));
        assert!(matches!(Generator::parse("B", "xi_t = 1, xi_t = 2", &c), Err(Error::InvalidGenerator(_))));
    }

    #[test]
    fn combination_and_display() {
        let c = ctx();
        let x1 = Generator::parse("X1", "xi_t=1", &c).unwrap();
        let x2 = Generator::parse("X2", "xi_x=1", &c).unwrap();
        let x3 = Generator::parse("X3", "xi_y=1", &c).unwrap();
        let x = Generator::linear_combination("X", &c, &[(Expr::one(), &x1), (p("c1"), &x2), (p("c2"), &x3)]).unwrap();
        assert_eq!(x.to_string(), "d_t + c1*d_x + c2*d_y");
        assert!(Generator::linear_combination("X", &c, &[(p("t"), &x1)]).is_err());
        assert_eq!(Generator::zero("Z", &c).to_string(), "0");
    }
}
