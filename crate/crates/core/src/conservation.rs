//! PDE systems, conserved vectors, divergence checks and the association
//! bracket.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{DerivAtom, Expr};
use crate::oracle::ZeroTest;
use crate::symmetry::Generator;

/// Substitution passes allowed before giving up.
pub const MAX_PASSES: usize = 50;

/// `lhs = 0`, solved for `leading` when reducing modulo the system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: Expr,
    pub leading: DerivAtom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdeSystem {
    ctx: VariableContext,
    equations: Vec<Equation>,
    solved: Vec<(Expr, Expr)>,
}

/// Coefficient of `atom` in `lhs` and the value of `atom` on solutions,
/// provided `lhs` is linear in it with a coefficient of lower order.
fn solve_for(lhs: &Expr, atom: &DerivAtom) -> Result<(Expr, Expr)> {
    let l = Expr::deriv(atom.clone());
    let a = lhs.partial(&l).normalize()?;
    if a.is_zero() {
        return Err(Error::VanishingLeadingCoefficient(l.to_string()));
    }
    if a.deriv_atoms().iter().any(|b| b.order() >= atom.order()) {
        return Err(Error::NonLinearLeading(l.to_string()));
    }
    let rest = (lhs - &(&a * &l)).normalize()?;
    if rest.deriv_atoms().contains(atom) {
        return Err(Error::NonLinearLeading(l.to_string()));
    }
    let value = (-(rest / a.clone())).normalize()?;
    Ok((a, value))
}

/// Position key of a multi-index; smaller keys rank higher.
fn rank_key(atom: &DerivAtom, ctx: &VariableContext) -> (usize, usize, Vec<usize>) {
    let dep = ctx.dependents().iter().position(|d| d.name == atom.base).unwrap_or(usize::MAX);
    let idx = atom.index.iter().map(|v| ctx.independent_position(v).unwrap_or(usize::MAX)).collect();
    (usize::MAX - atom.order(), dep, idx)
}

impl PdeSystem {
    pub fn new(ctx: VariableContext, equations: Vec<Equation>) -> Result<Self> {
        let mut solved = Vec::with_capacity(equations.len());
        for (i, eq) in equations.iter().enumerate() {
            ctx.check_expr(&eq.lhs)?;
            if equations[..i].iter().any(|e| e.leading == eq.leading) {
                return Err(Error::DuplicateLeading(Expr::deriv(eq.leading.clone()).to_string()));
            }
            if ctx.dependent(&eq.leading.base).is_none() {
                return Err(Error::NotDependent(eq.leading.base.to_string()));
            }
            let (_, value) = solve_for(&eq.lhs, &eq.leading)?;
            solved.push((Expr::deriv(eq.leading.clone()), value));
        }
        Ok(PdeSystem { ctx, equations, solved })
    }

    /// Picks the leading derivative of each equation: among the highest-order
    /// atoms the equation is solvable for, the first in ranking order
    /// (declaration order of dependents, then of multi-index variables).
    pub fn with_ranked_leading(ctx: VariableContext, lhs: Vec<Expr>) -> Result<Self> {
        let mut equations: Vec<Equation> = Vec::new();
        for e in lhs {
            let mut atoms: Vec<DerivAtom> = e.deriv_atoms().into_iter().collect();
            atoms.sort_by_key(|a| rank_key(a, &ctx));
            let mut chosen = None;
            let mut last_err = None;
            for a in &atoms {
                if equations.iter().any(|eq| &eq.leading == a) {
                    continue;
                }
                match solve_for(&e, a) {
                    Ok(_) => {
                        chosen = Some(a.clone());
                        break;
                    }
                    Err(err) => last_err = Some(err),
                }
            }
            let leading = chosen.ok_or_else(|| {
                last_err.unwrap_or_else(|| Error::Invalid(format!("equation {e} = 0 has no derivative to solve for")))
            })?;
            equations.push(Equation { lhs: e, leading });
        }
        Self::new(ctx, equations)
    }

    pub fn ctx(&self) -> &VariableContext {
        &self.ctx
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    /// Leading atoms with their values on solutions.
    pub fn solved(&self) -> &[(Expr, Expr)] {
        &self.solved
    }

    /// Highest derivative order in the system.
    pub fn order(&self) -> usize {
        self.equations.iter().map(|e| e.lhs.max_order()).max().unwrap_or(0)
    }

    fn needs_pass(&self, e: &Expr) -> bool {
        e.deriv_atoms().iter().any(|a| self.equations.iter().any(|eq| a.extends(&eq.leading)))
    }

    /// Eliminates leading derivatives and their derivatives. Returns the
    /// expression of the last substitution pass before normalization
    /// together with its normal form.
    pub fn reduce_mod_raw(&self, e: &Expr) -> Result<(Expr, Expr)> {
        let mut raw = e.clone();
        let mut current = e.normalize()?;
        for _ in 0..MAX_PASSES {
            if !self.needs_pass(&current) {
                return Ok((raw, current));
            }
            raw = current.substitute(&self.solved, &self.ctx)?;
            current = raw.normalize()?;
        }
        if self.needs_pass(&current) {
            return Err(Error::NonTerminating(MAX_PASSES));
        }
        Ok((raw, current))
    }

    /// `e` evaluated on solutions of the system, normalized.
    pub fn reduce_mod(&self, e: &Expr) -> Result<Expr> {
        Ok(self.reduce_mod_raw(e)?.1)
    }

    /// Zero test on solutions of the system.
    pub fn vanishes_on_solutions(&self, e: &Expr, zt: &ZeroTest) -> Result<bool> {
        let (raw, _) = self.reduce_mod_raw(e)?;
        zt.is_zero(&raw, &self.ctx)
    }

    /// Convenience check that `X` maps solutions to solutions.
    pub fn admits(&self, x: &Generator, zt: &ZeroTest) -> Result<bool> {
        for eq in &self.equations {
            if !self.vanishes_on_solutions(&x.apply(&eq.lhs, &self.ctx)?, zt)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Components `T^i` aligned with the independents of the system's context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConservedVector {
    components: Vec<Expr>,
    system: Arc<PdeSystem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergenceCheck {
    pub holds: bool,
    /// `D_i T^i` on solutions, normalized.
    pub residual: Expr,
    /// The divergence vanishes without using the system.
    pub trivial: bool,
}

impl ConservedVector {
    /// Builds the vector after checking its divergence vanishes on solutions.
    pub fn new(components: Vec<Expr>, system: Arc<PdeSystem>, zt: &ZeroTest) -> Result<Self> {
        let t = Self::new_unchecked(components, system)?;
        let check = t.check_divergence(zt)?;
        if !check.holds {
            return Err(Error::NotConserved(check.residual.to_string()));
        }
        Ok(t)
    }

    /// Builds the vector without the divergence check.
    pub fn new_unchecked(components: Vec<Expr>, system: Arc<PdeSystem>) -> Result<Self> {
        let n = system.ctx().dim();
        if components.len() != n {
            return Err(Error::Dimension(format!("{} components for {n} independent variables", components.len())));
        }
        for c in &components {
            system.ctx().check_expr(c)?;
        }
        Ok(ConservedVector { components, system })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn system(&self) -> &Arc<PdeSystem> {
        &self.system
    }

    pub fn ctx(&self) -> &VariableContext {
        self.system.ctx()
    }

    /// `sum_i D_i T^i`, not normalized.
    pub fn divergence(&self) -> Result<Expr> {
        let ctx = self.ctx();
        let terms = ctx
            .independents()
            .iter()
            .zip(&self.components)
            .map(|(v, t)| t.total_derivative(v, ctx))
            .collect::<Result<_>>()?;
        Ok(Expr::add(terms))
    }

    pub fn check_divergence(&self, zt: &ZeroTest) -> Result<DivergenceCheck> {
        let div = self.divergence()?;
        let trivial = zt.is_zero(&div, self.ctx())?;
        if trivial {
            return Ok(DivergenceCheck { holds: true, residual: Expr::zero(), trivial });
        }
        let (raw, residual) = self.system.reduce_mod_raw(&div)?;
        let holds = zt.is_zero(&raw, self.ctx())?;
        Ok(DivergenceCheck { holds, residual, trivial })
    }
}

/// `T*^i = X(T^i) + T^i D_j xi^j - T^j D_j xi^i`, normalized but not
/// reduced modulo any system.
pub fn bracket(components: &[Expr], x: &Generator, ctx: &VariableContext) -> Result<Vec<Expr>> {
    let vars = ctx.independents();
    if components.len() != vars.len() {
        return Err(Error::Dimension(format!("{} components for {} variables", components.len(), vars.len())));
    }
    let xi: Vec<Expr> = x.xi().iter().map(|(_, e)| e.clone()).collect();
    // dxi[i][j] = D_j xi^i
    let mut dxi = Vec::with_capacity(vars.len());
    for c in &xi {
        dxi.push(vars.iter().map(|v| c.total_derivative(v, ctx)).collect::<Result<Vec<_>>>()?);
    }
    let div = Expr::add((0..vars.len()).map(|j| dxi[j][j].clone()).collect());
    let mut out = Vec::with_capacity(vars.len());
    for (i, t) in components.iter().enumerate() {
        let mut terms = alloc::vec![x.apply(t, ctx)?, t * &div];
        for (j, tj) in components.iter().enumerate() {
            if !dxi[i][j].is_zero() {
                terms.push(-(tj * &dxi[i][j]));
            }
        }
        out.push(Expr::add(terms).normalize()?);
    }
    Ok(out)
}

/// Verdict of the association test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Association {
    /// Every bracket component vanishes on solutions; `identically` when no
    /// use of the system was needed.
    Associated { identically: bool },
    NotAssociated { component: String, residual: Expr },
    /// The generator itself is zero.
    TrivialBracket,
}

impl Association {
    pub fn is_associated(&self) -> bool {
        matches!(self, Association::Associated { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Association::Associated { .. } => "associated",
            Association::NotAssociated { .. } => "not associated",
            Association::TrivialBracket => "trivial-bracket",
        }
    }
}

/// Tests `[T, X] = 0` on solutions of the system.
pub fn association(t: &ConservedVector, x: &Generator, zt: &ZeroTest) -> Result<Association> {
    if x.is_zero()? {
        return Ok(Association::TrivialBracket);
    }
    let ctx = t.ctx();
    let b = bracket(t.components(), x, ctx)?;
    let mut identically = true;
    for (v, c) in ctx.independents().iter().zip(&b) {
        if zt.is_zero(c, ctx)? {
            continue;
        }
        identically = false;
        let (raw, residual) = t.system().reduce_mod_raw(c)?;
        if !zt.is_zero(&raw, ctx)? {
            return Ok(Association::NotAssociated { component: v.to_string(), residual });
        }
    }
    Ok(Association::Associated { identically })
}

pub fn is_associated(t: &ConservedVector, x: &Generator, zt: &ZeroTest) -> Result<bool> {
    Ok(association(t, x, zt)?.is_associated())
}

/// Errors with the offending bracket component unless `X` is associated.
pub fn require_associated(t: &ConservedVector, x: &Generator, zt: &ZeroTest) -> Result<()> {
    match association(t, x, zt)? {
        Association::Associated { .. } => Ok(()),
        Association::NotAssociated { component, residual } => Err(Error::NotAssociated {
            generator: x.name().to_string(),
            component,
            residual: residual.to_string(),
        }),
        Association::TrivialBracket => {
            Err(Error::InvalidGenerator(format!("{} is the zero generator", x.name())))
        }
    }
}
