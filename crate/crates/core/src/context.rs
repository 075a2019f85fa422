//! Declared names and their roles.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{DerivAtom, Expr, SymbolKind};

/// A dependent variable together with the independents it depends on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dependent {
    pub name: Arc<str>,
    pub args: Vec<Arc<str>>,
}

/// An arbitrary function of one argument, e.g. `f(u)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: Arc<str>,
    pub signature: Vec<Arc<str>>,
}

const RESERVED: [&str; 3] = ["D", "ln", "exp"];

/// The declared variables of a problem.
///
/// The order of `independents` is the canonical order of multi-indices and
/// the row/column order of every Jacobian matrix built over this context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableContext {
    independents: Vec<Arc<str>>,
    dependents: Vec<Dependent>,
    parameters: Vec<Arc<str>>,
    functions: Vec<FunctionDecl>,
}

impl VariableContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Convenience constructor: every dependent depends on all independents
    /// and every function takes the first dependent as argument.
    pub fn build(indeps: &[&str], deps: &[&str], params: &[&str], funcs: &[&str]) -> Result<Self> {
        let mut ctx = Self::new();
        for v in indeps {
            ctx.declare_independent(v)?;
        }
        for d in deps {
            ctx.declare_dependent(d, None)?;
        }
        for p in params {
            ctx.declare_parameter(p)?;
        }
        let first_dep: Vec<Arc<str>> = ctx.dependents.first().map(|d| d.name.clone()).into_iter().collect();
        for f in funcs {
            ctx.declare_function(f, first_dep.clone())?;
        }
        Ok(ctx)
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && name.chars().all(|c| c.is_ascii_alphanumeric());
        if !valid || RESERVED.contains(&name) {
            return Err(Error::Invalid(format!("`{name}` is not a valid identifier")));
        }
        if self.kind_of(name).is_some() {
            return Err(Error::Duplicate(name.to_string()));
        }
        Ok(())
    }

    pub fn declare_independent(&mut self, name: &str) -> Result<()> {
        self.check_fresh(name)?;
        self.independents.push(name.into());
        Ok(())
    }

    /// Declares a dependent variable; `args = None` means it depends on every
    /// independent declared so far.
    pub fn declare_dependent(&mut self, name: &str, args: Option<Vec<Arc<str>>>) -> Result<()> {
        self.check_fresh(name)?;
        let args = match args {
            Some(a) => {
                for v in &a {
                    if self.independent_position(v).is_none() {
                        return Err(Error::NotIndependent(v.to_string()));
                    }
                }
                self.sort_index(a)
            }
            None => self.independents.clone(),
        };
        self.dependents.push(Dependent { name: name.into(), args });
        Ok(())
    }

    pub fn declare_parameter(&mut self, name: &str) -> Result<()> {
        self.check_fresh(name)?;
        self.parameters.push(name.into());
        Ok(())
    }

    pub fn declare_function(&mut self, name: &str, signature: Vec<Arc<str>>) -> Result<()> {
        self.check_fresh(name)?;
        if signature.len() != 1 {
            return Err(Error::Invalid(format!(
                "function `{name}` must take exactly one dependent variable"
            )));
        }
        for s in &signature {
            if self.dependent(s).is_none() {
                return Err(Error::NotDependent(s.to_string()));
            }
        }
        self.functions.push(FunctionDecl { name: name.into(), signature });
        Ok(())
    }

    pub fn independents(&self) -> &[Arc<str>] {
        &self.independents
    }

    pub fn dependents(&self) -> &[Dependent] {
        &self.dependents
    }

    pub fn parameters(&self) -> &[Arc<str>] {
        &self.parameters
    }

    pub fn functions(&self) -> &[FunctionDecl] {
        &self.functions
    }

    pub fn dim(&self) -> usize {
        self.independents.len()
    }

    pub fn kind_of(&self, name: &str) -> Option<SymbolKind> {
        if self.independents.iter().any(|v| &**v == name) {
            Some(SymbolKind::Independent)
        } else if self.parameters.iter().any(|v| &**v == name) {
            Some(SymbolKind::Parameter)
        } else if self.dependents.iter().any(|d| &*d.name == name) {
            Some(SymbolKind::Dependent)
        } else if self.functions.iter().any(|f| &*f.name == name) {
            Some(SymbolKind::Function)
        } else {
            None
        }
    }

    pub fn independent_position(&self, name: &str) -> Option<usize> {
        self.independents.iter().position(|v| &**v == name)
    }

    pub fn dependent(&self, name: &str) -> Option<&Dependent> {
        self.dependents.iter().find(|d| &*d.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| &*f.name == name)
    }

    /// Sorts a multi-index into declaration order.
    pub fn sort_index(&self, mut index: Vec<Arc<str>>) -> Vec<Arc<str>> {
        index.sort_by_key(|v| self.independent_position(v).unwrap_or(usize::MAX));
        index
    }

    /// The symbol expression for an independent variable or parameter.
    pub fn symbol(&self, name: &str) -> Result<Expr> {
        match self.kind_of(name) {
            Some(kind @ (SymbolKind::Independent | SymbolKind::Parameter)) => {
                Ok(Expr::symbol(kind, self.interned(name)))
            }
            Some(SymbolKind::Dependent) => self.derivative(name, &[]),
            _ => Err(Error::Undeclared { name: name.to_string(), position: 0 }),
        }
    }

    fn interned(&self, name: &str) -> Arc<str> {
        self.independents
            .iter()
            .chain(self.parameters.iter())
            .find(|v| &***v == name)
            .cloned()
            .unwrap_or_else(|| name.into())
    }

    /// The derivative atom `base` differentiated along `vars`. Returns zero
    /// if some variable is not an argument of `base`.
    pub fn derivative(&self, base: &str, vars: &[&str]) -> Result<Expr> {
        let dep = self.dependent(base).ok_or_else(|| Error::NotDependent(base.to_string()))?;
        let mut index = Vec::with_capacity(vars.len());
        for v in vars {
            let pos = self.independent_position(v).ok_or_else(|| Error::NotIndependent(v.to_string()))?;
            if !dep.args.iter().any(|a| **a == **v) {
                return Ok(Expr::zero());
            }
            index.push(self.independents[pos].clone());
        }
        Ok(Expr::deriv(DerivAtom { base: dep.name.clone(), index: self.sort_index(index) }))
    }

    /// `f(arg)` for a declared function.
    pub fn apply_function(&self, name: &str, prime: u32, arg: Expr) -> Result<Expr> {
        let f = self.function(name).ok_or_else(|| Error::Undeclared { name: name.to_string(), position: 0 })?;
        Ok(Expr::func(f.name.clone(), prime, arg))
    }

    /// `f(u)` applied to its declared signature.
    pub fn function_default(&self, name: &str) -> Result<Expr> {
        let f = self.function(name).ok_or_else(|| Error::Undeclared { name: name.to_string(), position: 0 })?;
        let arg = self.derivative(&f.signature[0], &[])?;
        Ok(Expr::func(f.name.clone(), 0, arg))
    }

    /// Every declared name, in declaration order by kind.
    pub fn all_names(&self) -> Vec<Arc<str>> {
        self.independents
            .iter()
            .cloned()
            .chain(self.dependents.iter().map(|d| d.name.clone()))
            .chain(self.parameters.iter().cloned())
            .chain(self.functions.iter().map(|f| f.name.clone()))
            .collect()
    }

    /// Checks that every name in `e` is declared here and that derivative
    /// atoms only use their dependent's arguments.
    pub fn check_expr(&self, e: &Expr) -> Result<()> {
        for atom in e.deriv_atoms() {
            let dep = self.dependent(&atom.base).ok_or_else(|| Error::IncompleteChange(atom.base.to_string()))?;
            for v in &atom.index {
                if !dep.args.contains(v) {
                    return Err(Error::IncompleteChange(format!("{}_{}", atom.base, v)));
                }
            }
        }
        for n in e.names() {
            if self.kind_of(&n).is_none() {
                return Err(Error::IncompleteChange(n.to_string()));
            }
        }
        Ok(())
    }

    /// Copy of this context with one independent variable removed from the
    /// independents and from every dependent's argument list.
    pub fn without_independent(&self, name: &str) -> Self {
        let mut out = self.clone();
        out.independents.retain(|v| &**v != name);
        for d in &mut out.dependents {
            d.args.retain(|v| &**v != name);
        }
        out
    }

    /// Restricts the argument list of a dependent variable.
    pub fn set_dependent_args(&mut self, name: &str, args: Vec<Arc<str>>) -> Result<()> {
        let sorted = self.sort_index(args);
        let dep = self
            .dependents
            .iter_mut()
            .find(|d| &*d.name == name)
            .ok_or_else(|| Error::NotDependent(name.to_string()))?;
        dep.args = sorted;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_kinds_fixed() {
        let mut ctx = VariableContext::build(&["t", "x"], &["u"], &["c"], &["f"]).unwrap();
        assert_eq!(ctx.kind_of("u"), Some(SymbolKind::Dependent));
        assert_eq!(ctx.kind_of("f"), Some(SymbolKind::Function));
        assert!(matches!(ctx.declare_parameter("x"), Err(Error::Duplicate(_))));
        assert!(ctx.declare_independent("D").is_err());
    }

    #[test]
    fn multi_index_sorted_by_declaration() {
        let ctx = VariableContext::build(&["t", "x", "y"], &["u"], &[], &[]).unwrap();
        assert_eq!(ctx.derivative("u", &["y", "t"]).unwrap(), ctx.derivative("u", &["t", "y"]).unwrap());
    }

    #[test]
    fn derivative_outside_arguments_is_zero() {
        let mut ctx = VariableContext::build(&["r", "s", "q"], &[], &[], &[]).unwrap();
        ctx.declare_dependent("w", Some(alloc::vec!["r".into(), "s".into()])).unwrap();
        assert!(ctx.derivative("w", &["q"]).unwrap().is_zero());
        assert!(!ctx.derivative("w", &["s", "r"]).unwrap().is_zero());
    }
}
