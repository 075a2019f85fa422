//! Canonical coordinates, coordinate changes and the transformation of
//! conserved vectors and generators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::conservation::bracket;
use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{DerivAtom, Expr, Node, SymbolKind};
use crate::matrix::Matrix;
use crate::oracle::ZeroTest;
use crate::symmetry::Generator;

/// How a generator moves one variable.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Motion {
    Fixed,
    /// `c d/dv` with `c` constant.
    Translation(Expr),
    /// `a v d/dv` with `a` constant.
    Scaling(Expr),
}

fn classify(gen: &str, key: &str, c: &Expr, var: &Expr) -> Result<Motion> {
    let c = c.normalize()?;
    if c.is_zero() {
        return Ok(Motion::Fixed);
    }
    if c.is_constant() {
        return Ok(Motion::Translation(c));
    }
    let ratio = (c.clone() / var.clone()).normalize()?;
    if ratio.is_constant() {
        return Ok(Motion::Scaling(ratio));
    }
    Err(Error::UnsupportedGenerator(format!(
        "{gen}: {key} = {c} is neither a constant nor a constant multiple of the variable"
    )))
}

/// Replaces independent symbols and undifferentiated dependents by name.
pub(crate) fn replace_names(e: &Expr, map: &BTreeMap<Arc<str>, Expr>) -> Result<Expr> {
    e.map_atoms(&mut |a| {
        Ok(match a.node() {
            Node::Sym(s) if s.kind == SymbolKind::Independent => map.get(&s.name).cloned(),
            Node::Deriv(d) if d.index.is_empty() => map.get(&d.base).cloned(),
            _ => None,
        })
    })
}

fn sym(name: &Arc<str>) -> Expr {
    Expr::symbol(SymbolKind::Independent, name.clone())
}

fn dep_atom(name: &Arc<str>) -> Expr {
    Expr::deriv(DerivAtom { base: name.clone(), index: Vec::new() })
}

/// New context: `independents` in order, dependents renamed and depending
/// on every new independent except `canonical`, same parameters, functions
/// re-signed to the renamed dependents.
fn new_context(
    old: &VariableContext,
    independents: &[Arc<str>],
    dependents: &[(Arc<str>, Arc<str>)],
    canonical: Option<&str>,
) -> Result<VariableContext> {
    let mut ctx = VariableContext::new();
    for v in independents {
        ctx.declare_independent(v)?;
    }
    let args: Vec<Arc<str>> = independents.iter().filter(|v| Some(&***v) != canonical).cloned().collect();
    for (new, _) in dependents {
        ctx.declare_dependent(new, Some(args.clone()))?;
    }
    for p in old.parameters() {
        ctx.declare_parameter(p)?;
    }
    for f in old.functions() {
        let sig = f
            .signature
            .iter()
            .map(|s| {
                dependents
                    .iter()
                    .find(|(_, old)| old == s)
                    .map(|(new, _)| new.clone())
                    .ok_or_else(|| Error::IncompleteChange(s.to_string()))
            })
            .collect::<Result<_>>()?;
        ctx.declare_function(&f.name, sig)?;
    }
    Ok(ctx)
}

/// Naming and pivot choices for canonical coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CanonicalOptions {
    /// `(new, old)` pairs. Their order is the order of the new independents;
    /// the name paired with the pivot becomes the canonical variable.
    pub names: Vec<(String, String)>,
    /// Old independent variable the canonical variable is built from.
    pub pivot: Option<String>,
    /// Suffix for generated names when `names` is empty.
    pub suffix: String,
}

/// Similarity variables and the canonical variable of a generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalResult {
    /// Invariant independents, in new order, defined in old variables.
    pub invariants: Vec<(Arc<str>, Expr)>,
    /// The variable `q` with `X = d/dq`.
    pub canonical: (Arc<str>, Expr),
    /// New dependents, defined in old variables.
    pub dependents: Vec<(Arc<str>, Expr)>,
    /// Old variable names mapped to expressions in the new ones.
    pub inverse: Vec<(Arc<str>, Expr)>,
    /// Context over the new variables, canonical variable included.
    pub context: VariableContext,
    /// Order of the new independents.
    pub order: Vec<Arc<str>>,
}

impl CanonicalResult {
    /// New independents with their definitions, in new order.
    pub fn forward(&self) -> Vec<(Arc<str>, Expr)> {
        self.order
            .iter()
            .map(|n| {
                if *n == self.canonical.0 {
                    self.canonical.clone()
                } else {
                    self.invariants.iter().find(|(m, _)| m == n).cloned().expect("every new name is defined")
                }
            })
            .collect()
    }
}

/// Old and new names, paired.
type NamePairs = Vec<(Arc<str>, Arc<str>)>;

fn resolve_names(
    ctx: &VariableContext,
    opts: &CanonicalOptions,
) -> Result<(NamePairs, NamePairs)> {
    let olds: Vec<Arc<str>> = ctx
        .independents()
        .iter()
        .cloned()
        .chain(ctx.dependents().iter().map(|d| d.name.clone()))
        .collect();
    let pairs: Vec<(Arc<str>, Arc<str>)> = if opts.names.is_empty() {
        let mut taken: Vec<Arc<str>> = ctx.parameters().to_vec();
        taken.extend(ctx.functions().iter().map(|f| f.name.clone()));
        let suffix = if opts.suffix.is_empty() { "1" } else { &opts.suffix };
        olds.iter()
            .map(|o| {
                let mut name = format!("{o}{suffix}");
                let mut k = 2;
                while taken.iter().any(|t| **t == *name) {
                    name = format!("{o}{suffix}{k}");
                    k += 1;
                }
                taken.push(name.as_str().into());
                (Arc::from(name.as_str()), o.clone())
            })
            .collect()
    } else {
        let mut pairs = Vec::new();
        for (n, o) in &opts.names {
            let o = olds
                .iter()
                .find(|v| ***v == **o)
                .ok_or_else(|| Error::Invalid(format!("`{o}` in a name pairing is not a variable")))?;
            if pairs.iter().any(|(_, p): &(Arc<str>, Arc<str>)| p == o) {
                return Err(Error::Invalid(format!("`{o}` is paired twice")));
            }
            pairs.push((Arc::from(n.as_str()), o.clone()));
        }
        if let Some(missing) = olds.iter().find(|o| !pairs.iter().any(|(_, p)| p == *o)) {
            return Err(Error::Invalid(format!("no new name given for `{missing}`")));
        }
        pairs
    };
    let (ind, dep): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(_, o)| ctx.independent_position(o).is_some());
    Ok((ind, dep))
}

/// Canonical coordinates for generators made of translations and scalings.
///
/// With a translation pivot `x_p` (coefficient `c_p`) the canonical variable
/// is `x_p/c_p`; with a scaling pivot (`a_p x_p d/dx_p`) it is
/// `ln(x_p)/a_p`. The other variables become invariants: differences for
/// translations, quotients or exponential factors for scalings.
pub fn canonical_coordinates(
    x: &Generator,
    ctx: &VariableContext,
    opts: &CanonicalOptions,
    zt: &ZeroTest,
) -> Result<CanonicalResult> {
    let mut motions = Vec::new();
    for (v, c) in x.xi() {
        motions.push(classify(x.name(), &format!("xi_{v}"), c, &sym(v))?);
    }
    let mut dep_motions = Vec::new();
    for (u, c) in x.eta() {
        dep_motions.push(classify(x.name(), &format!("eta_{u}"), c, &dep_atom(u))?);
    }
    if motions.iter().all(|m| *m == Motion::Fixed) {
        return Err(Error::NoIndependentComponent);
    }
    let vars = ctx.independents();
    let pivot = match &opts.pivot {
        Some(p) => {
            let i = ctx.independent_position(p).ok_or_else(|| Error::NotIndependent(p.clone()))?;
            if motions[i] == Motion::Fixed {
                return Err(Error::Invalid(format!("{} does not move the pivot `{p}`", x.name())));
            }
            i
        }
        None => motions
            .iter()
            .position(|m| matches!(m, Motion::Translation(_)))
            .or_else(|| motions.iter().position(|m| matches!(m, Motion::Scaling(_))))
            .expect("some coefficient is nonzero"),
    };

    let (ind_names, dep_names) = resolve_names(ctx, opts)?;
    let new_of = |old: &Arc<str>| ind_names.iter().find(|(_, o)| o == old).map(|(n, _)| n.clone()).unwrap();
    let q_name = new_of(&vars[pivot]);
    let q = sym(&q_name);
    let xp = sym(&vars[pivot]);

    // canonical variable in old variables, and the pivot in new ones
    let (q_def, pivot_inverse) = match &motions[pivot] {
        Motion::Translation(c) => (xp.clone() / c.clone(), c * &q),
        Motion::Scaling(a) => (Expr::ln(xp.clone()) / a.clone(), Expr::exp(a * &q)),
        Motion::Fixed => unreachable!(),
    };

    let mut invariants = Vec::new();
    let mut inverse = Vec::new();
    for (j, v) in vars.iter().enumerate() {
        if j == pivot {
            inverse.push((v.clone(), pivot_inverse.clone()));
            continue;
        }
        let z = new_of(v);
        let zs = sym(&z);
        let xj = sym(v);
        let (def, inv) = match (&motions[j], &motions[pivot]) {
            (Motion::Fixed, _) => (xj.clone(), zs.clone()),
            (Motion::Translation(c), _) => (&xj - &(c * &q_def), &zs + &(c * &q)),
            (Motion::Scaling(a), Motion::Translation(_)) => {
                (&xj * &Expr::exp(-(a * &q_def)), &zs * &Expr::exp(a * &q))
            }
            (Motion::Scaling(a), Motion::Scaling(ap)) => {
                let ratio = (a.clone() / ap.clone()).normalize()?;
                match ratio.as_num().filter(|r| r.is_integer()).and_then(|r| num_traits::ToPrimitive::to_i64(r.numer())) {
                    Some(k) => (&xj * &Expr::pow(xp.clone(), -k), &zs * &Expr::exp(a * &q)),
                    None => (
                        Expr::ln(xj.clone()) / a.clone() - q_def.clone(),
                        Expr::exp(a * &(&zs + &q)),
                    ),
                }
            }
            (_, Motion::Fixed) => unreachable!(),
        };
        invariants.push((z, def.normalize()?));
        inverse.push((v.clone(), inv.normalize()?));
    }

    let mut dependents = Vec::new();
    for (u, m) in x.eta().iter().map(|(u, _)| u).zip(&dep_motions) {
        let w = dep_names.iter().find(|(_, o)| o == u).map(|(n, _)| n.clone()).unwrap();
        let ua = dep_atom(u);
        let wa = dep_atom(&w);
        let (def, inv) = match m {
            Motion::Fixed => (ua.clone(), wa.clone()),
            Motion::Translation(e) => (&ua - &(e * &q_def), &wa + &(e * &q)),
            Motion::Scaling(b) => (&ua * &Expr::exp(-(b * &q_def)), &wa * &Expr::exp(b * &q)),
        };
        dependents.push((w, def.normalize()?));
        inverse.push((u.clone(), inv.normalize()?));
    }

    let order: Vec<Arc<str>> = ind_names.iter().map(|(n, _)| n.clone()).collect();
    invariants.sort_by_key(|(n, _)| order.iter().position(|o| o == n));
    let dep_pairs: Vec<(Arc<str>, Arc<str>)> = dep_names.clone();
    let context = new_context(ctx, &order, &dep_pairs, Some(&q_name))?;
    let q_def = q_def.normalize()?;

    for (name, def) in invariants.iter().chain(&dependents) {
        if !zt.is_zero(&x.apply(def, ctx)?, ctx)? {
            return Err(Error::Invalid(format!("{} does not leave {name} = {def} invariant", x.name())));
        }
    }
    if !zt.is_zero(&(x.apply(&q_def, ctx)? - Expr::one()), ctx)? {
        return Err(Error::Invalid(format!("{} is not d/d{q_name} for {q_name} = {q_def}", x.name())));
    }
    Ok(CanonicalResult { invariants, canonical: (q_name, q_def), dependents, inverse, context, order })
}

/// An invertible point change of variables with its Jacobian matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateChange {
    old: VariableContext,
    new: VariableContext,
    forward: Vec<(Arc<str>, Expr)>,
    dependents: Vec<(Arc<str>, Expr)>,
    inverse: BTreeMap<Arc<str>, Expr>,
    canonical: Option<Arc<str>>,
    /// `D_i x~_k`, rows old, columns new, in old variables.
    a_inv: Matrix,
    /// Inverse of `a_inv`: `D~_k x_i`, rows new, columns old.
    a: Matrix,
    jacobian: Expr,
    a_inv_new: Matrix,
    a_new: Matrix,
    jacobian_new: Expr,
}

impl CoordinateChange {
    /// The change defined by canonical coordinates.
    pub fn from_canonical(cr: &CanonicalResult, old: &VariableContext, zt: &ZeroTest) -> Result<Self> {
        Self::from_parts(
            old.clone(),
            cr.context.clone(),
            cr.forward(),
            cr.dependents.clone(),
            cr.inverse.iter().cloned().collect(),
            Some(cr.canonical.0.clone()),
            zt,
        )
    }

    /// Assembles a change from definitions and their inverse, checking that
    /// the inverse really inverts.
    pub fn from_parts(
        old: VariableContext,
        new: VariableContext,
        forward: Vec<(Arc<str>, Expr)>,
        dependents: Vec<(Arc<str>, Expr)>,
        inverse: BTreeMap<Arc<str>, Expr>,
        canonical: Option<Arc<str>>,
        zt: &ZeroTest,
    ) -> Result<Self> {
        let n = old.dim();
        if forward.len() != n || new.dim() != n {
            return Err(Error::Dimension(format!("{} new independents for {n} old ones", forward.len())));
        }
        for (name, def) in &forward {
            old.check_expr(def)?;
            if !def.deriv_atoms().is_empty() {
                return Err(Error::Invalid(format!("{name} = {def}: new independents may not involve dependents")));
            }
        }
        for (name, def) in &dependents {
            old.check_expr(def)?;
            if def.max_order() > 0 {
                return Err(Error::Invalid(format!("{name} = {def} involves derivatives")));
            }
        }
        for v in old.independents().iter().chain(old.dependents().iter().map(|d| &d.name)) {
            let e = inverse.get(v).ok_or_else(|| Error::IncompleteChange(format!("no inverse for `{v}`")))?;
            new.check_expr(e)?;
        }
        // the inverse must undo the definitions
        for (name, def) in forward.iter().chain(&dependents) {
            let back = replace_names(def, &inverse)?;
            let target = match new.kind_of(name) {
                Some(SymbolKind::Dependent) => dep_atom(name),
                _ => sym(name),
            };
            if !zt.is_zero(&(back - target), &new)? {
                return Err(Error::DegenerateChange(format!("the inverse map does not invert {name} = {def}")));
            }
        }
        let vars = old.independents().to_vec();
        let a_inv = Matrix::from_fn(n, |i, k| forward[k].1.total_derivative(&vars[i], &old)?.normalize())?;
        let a = a_inv.inverse()?;
        let jacobian = a.det()?;
        let to_new = |e: &Expr| replace_names(e, &inverse)?.normalize();
        let a_inv_new = a_inv.map(to_new)?;
        let a_new = a.map(to_new)?;
        let jacobian_new = to_new(&jacobian)?;
        if jacobian_new.is_zero() {
            return Err(Error::DegenerateChange("the Jacobian determinant vanishes".into()));
        }
        Ok(CoordinateChange {
            old,
            new,
            forward,
            dependents,
            inverse,
            canonical,
            a_inv,
            a,
            jacobian,
            a_inv_new,
            a_new,
            jacobian_new,
        })
    }

    /// A change given by definitions in old variables, as written in a
    /// problem file. New independents are the definitions free of
    /// dependents, in the order given. Without explicit `inverse` lines the
    /// independents must be affine with constant coefficients and each
    /// dependent definition of the form `a*u + b`.
    pub fn from_definitions(
        old: &VariableContext,
        definitions: &[(String, Expr)],
        canonical: Option<&str>,
        inverse: Option<&[(String, String)]>,
        zt: &ZeroTest,
    ) -> Result<Self> {
        let mut forward = Vec::new();
        let mut dependents = Vec::new();
        let mut dep_pairs = Vec::new();
        for (name, def) in definitions {
            let name: Arc<str> = name.as_str().into();
            let deps: Vec<DerivAtom> = def.deriv_atoms().into_iter().collect();
            match deps.as_slice() {
                [] => forward.push((name, def.clone())),
                [u] if u.index.is_empty() => {
                    dep_pairs.push((name.clone(), u.base.clone()));
                    dependents.push((name, def.clone()));
                }
                _ => {
                    return Err(Error::Invalid(format!(
                        "{name} = {def}: a new dependent must involve exactly one old dependent"
                    )))
                }
            }
        }
        if let Some(missing) = old.dependents().iter().find(|d| !dep_pairs.iter().any(|(_, o)| *o == d.name)) {
            return Err(Error::IncompleteChange(format!("no new dependent defined from `{}`", missing.name)));
        }
        if let Some(q) = canonical {
            if !forward.iter().any(|(n, _)| &**n == q) {
                return Err(Error::Invalid(format!("canonical variable `{q}` is not a new independent")));
            }
        }
        let order: Vec<Arc<str>> = forward.iter().map(|(n, _)| n.clone()).collect();
        let new = new_context(old, &order, &dep_pairs, canonical)?;

        let inverse_map: BTreeMap<Arc<str>, Expr> = match inverse {
            Some(lines) => lines
                .iter()
                .map(|(o, text)| Ok((Arc::from(o.as_str()), Expr::parse(text, &new)?)))
                .collect::<Result<_>>()?,
            None => affine_inverse(old, &forward, &dependents)?,
        };
        Self::from_parts(
            old.clone(),
            new,
            forward,
            dependents,
            inverse_map,
            canonical.map(Arc::from),
            zt,
        )
    }

    pub fn old_context(&self) -> &VariableContext {
        &self.old
    }

    /// Context over the new variables, canonical variable included.
    pub fn new_context(&self) -> &VariableContext {
        &self.new
    }

    /// New context without the canonical variable.
    pub fn reduced_context(&self) -> VariableContext {
        match &self.canonical {
            Some(q) => self.new.without_independent(q),
            None => self.new.clone(),
        }
    }

    pub fn canonical(&self) -> Option<&str> {
        self.canonical.as_deref()
    }

    pub fn forward(&self) -> &[(Arc<str>, Expr)] {
        &self.forward
    }

    pub fn dependents(&self) -> &[(Arc<str>, Expr)] {
        &self.dependents
    }

    pub fn inverse(&self) -> &BTreeMap<Arc<str>, Expr> {
        &self.inverse
    }

    /// `D_i x~_k` in old variables.
    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    /// `D~_k x_i` in old variables.
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// `det(A)` in old variables.
    pub fn jacobian(&self) -> &Expr {
        &self.jacobian
    }

    pub fn a_inv_new(&self) -> &Matrix {
        &self.a_inv_new
    }

    pub fn a_new(&self) -> &Matrix {
        &self.a_new
    }

    /// `det(A)` in new variables.
    pub fn jacobian_new(&self) -> &Expr {
        &self.jacobian_new
    }

    /// Checks that `x` is `d/dq` in these coordinates.
    pub fn check_canonical_for(&self, x: &Generator, zt: &ZeroTest) -> Result<()> {
        let q = self.canonical.as_ref().ok_or_else(|| Error::Invalid("the change has no canonical variable".into()))?;
        for (name, def) in self.forward.iter().chain(&self.dependents) {
            let target = if name == q { Expr::one() } else { Expr::zero() };
            if !zt.is_zero(&(x.apply(def, &self.old)? - target), &self.old)? {
                return Err(Error::DegenerateChange(format!(
                    "{} is not d/d{q} in these coordinates ({name} = {def})",
                    x.name()
                )));
            }
        }
        Ok(())
    }

    fn rewrite_deriv(&self, d: &DerivAtom, cache: &mut BTreeMap<DerivAtom, Expr>) -> Result<Expr> {
        if let Some(e) = cache.get(d) {
            return Ok(e.clone());
        }
        let out = match d.index.split_last() {
            None => self
                .inverse
                .get(&d.base)
                .cloned()
                .ok_or_else(|| Error::IncompleteChange(d.base.to_string()))?,
            Some((var, rest)) => {
                let parent = self.rewrite_deriv(&DerivAtom { base: d.base.clone(), index: rest.to_vec() }, cache)?;
                let i = self.old.independent_position(var).ok_or_else(|| Error::NotIndependent(var.to_string()))?;
                // D_i = sum_k (D_i x~_k) D~_k
                let mut terms = Vec::new();
                for (k, v) in self.new.independents().iter().enumerate() {
                    let c = self.a_inv_new.get(i, k);
                    if c.is_zero() {
                        continue;
                    }
                    terms.push(c * &parent.total_derivative(v, &self.new)?);
                }
                Expr::add(terms).normalize()?
            }
        };
        cache.insert(d.clone(), out.clone());
        Ok(out)
    }

    /// Rewrites an expression in old variables into the new ones.
    /// Derivatives of old dependents go through the chain rule; new
    /// dependents do not depend on the canonical variable.
    pub fn to_new(&self, e: &Expr) -> Result<Expr> {
        let mut cache = BTreeMap::new();
        let out = e.map_atoms(&mut |a| match a.node() {
            Node::Sym(s) if s.kind == SymbolKind::Independent => Ok(Some(
                self.inverse.get(&s.name).cloned().ok_or_else(|| Error::IncompleteChange(s.name.to_string()))?,
            )),
            Node::Deriv(d) => self.rewrite_deriv(d, &mut cache).map(Some),
            _ => Ok(None),
        })?;
        let out = out.normalize()?;
        self.new.check_expr(&out)?;
        Ok(out)
    }

    /// `J (A^-1)^T v`, rewritten in new variables.
    pub fn transform_components(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        let n = self.old.dim();
        if v.len() != n {
            return Err(Error::Dimension(format!("{} components for {n} variables", v.len())));
        }
        let rewritten = v.iter().map(|e| self.to_new(e)).collect::<Result<Vec<_>>>()?;
        (0..n)
            .map(|k| {
                let sum = Expr::add((0..n).map(|i| self.a_inv_new.get(i, k) * &rewritten[i]).collect());
                (&self.jacobian_new * &sum).normalize()
            })
            .collect()
    }

    /// Each component as the determinant of `A` with that row replaced by
    /// `v`, rewritten in new variables.
    pub fn transform_components_rowrep(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        (0..self.old.dim()).map(|k| self.to_new(&self.a.with_row(k, v)?.det_raw())).collect()
    }

    /// Rewrites `sum_i D_i T^i` into new variables and multiplies by `J`.
    pub fn transport_divergence(&self, v: &[Expr]) -> Result<Expr> {
        let div = Expr::add(
            self.old.independents().iter().zip(v).map(|(x, t)| t.total_derivative(x, &self.old)).collect::<Result<_>>()?,
        );
        (&self.jacobian_new * &self.to_new(&div)?).normalize()
    }

    /// `sum_k D~_k T~^k` over the new context.
    pub fn new_divergence(&self, t: &[Expr]) -> Result<Expr> {
        Expr::add(
            self.new.independents().iter().zip(t).map(|(x, c)| c.total_derivative(x, &self.new)).collect::<Result<_>>()?,
        )
        .normalize()
    }

    /// `J (A^-1)^T [T, X]` in new variables.
    pub fn transformed_bracket(&self, t: &[Expr], x: &Generator) -> Result<Vec<Expr>> {
        self.transform_components(&bracket(t, x, &self.old)?)
    }

    /// Push-forward of a point generator, with its projection onto the
    /// reduced variables when the change has a canonical variable.
    pub fn transform_generator(&self, y: &Generator, zt: &ZeroTest) -> Result<InheritedGenerator> {
        let xi = self.forward.iter().map(|(_, d)| self.to_new(&y.apply(d, &self.old)?)).collect::<Result<Vec<_>>>()?;
        let eta =
            self.dependents.iter().map(|(_, d)| self.to_new(&y.apply(d, &self.old)?)).collect::<Result<Vec<_>>>()?;
        let full = Generator::new(y.name(), &self.new, xi.clone(), eta.clone())?;
        let Some(q) = &self.canonical else {
            let verdict = if full.is_zero()? { Inheritance::Trivial } else { Inheritance::Inherited(full.clone()) };
            return Ok(InheritedGenerator { full, verdict });
        };
        let reduced = self.reduced_context();
        let kept: Vec<Expr> = self
            .new
            .independents()
            .iter()
            .zip(&xi)
            .filter(|(v, _)| *v != q)
            .map(|(_, e)| e.clone())
            .collect();
        if let Some(bad) = kept.iter().chain(&eta).find(|e| e.mentions(q)) {
            let verdict = Inheritance::NotInheritable(format!("coefficient {bad} depends on {q}"));
            return Ok(InheritedGenerator { full, verdict });
        }
        let projected = Generator::new(y.name(), &reduced, kept, eta)?;
        let verdict = if zt_zero_generator(&projected, &reduced, zt)? {
            Inheritance::Trivial
        } else {
            Inheritance::Inherited(projected)
        };
        Ok(InheritedGenerator { full, verdict })
    }
}

fn zt_zero_generator(g: &Generator, ctx: &VariableContext, zt: &ZeroTest) -> Result<bool> {
    for (_, e) in g.xi().iter().chain(g.eta()) {
        if !zt.is_zero(e, ctx)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Inverse of an affine change of independents and of dependents of the
/// form `a*u + b`.
fn affine_inverse(
    old: &VariableContext,
    forward: &[(Arc<str>, Expr)],
    dependents: &[(Arc<str>, Expr)],
) -> Result<BTreeMap<Arc<str>, Expr>> {
    let vars = old.independents();
    let n = vars.len();
    if forward.len() != n {
        return Err(Error::Dimension(format!("{} new independents for {n} old ones", forward.len())));
    }
    let need_inverse = |what: &str| {
        Error::DegenerateChange(format!("{what}; give the inverse explicitly with `inverse` lines"))
    };
    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    for (name, def) in forward {
        let mut row = Vec::new();
        let mut rest = def.clone();
        for v in vars {
            let s = sym(v);
            let c = def.partial(&s).normalize()?;
            if !c.is_constant() {
                return Err(need_inverse(&format!("{name} = {def} is not affine")));
            }
            rest = rest - &c * &s;
            row.push(c);
        }
        let rest = rest.normalize()?;
        if !rest.is_constant() {
            return Err(need_inverse(&format!("{name} = {def} is not affine")));
        }
        rows.push(row);
        offsets.push(rest);
    }
    let m_inv = Matrix::from_rows(rows)?.inverse()?;
    let shifted: Vec<Expr> = forward.iter().zip(&offsets).map(|((nm, _), b)| sym(nm) - b.clone()).collect();
    let solved = m_inv.mul_vec(&shifted)?;
    let mut out = BTreeMap::new();
    for (v, e) in vars.iter().zip(solved) {
        out.insert(v.clone(), e.normalize()?);
    }
    for (w, def) in dependents {
        let u = def.deriv_atoms().into_iter().next().expect("a dependent definition mentions its dependent");
        let ua = Expr::deriv(u.clone());
        let a = def.partial(&ua).normalize()?;
        let b = (def - &(&a * &ua)).normalize()?;
        if a.is_zero() || !a.deriv_atoms().is_empty() || !b.deriv_atoms().is_empty() {
            return Err(need_inverse(&format!("{w} = {def} is not of the form a*{u} + b", u = ua)));
        }
        let a_new = replace_names(&a, &out)?;
        let b_new = replace_names(&b, &out)?;
        out.insert(u.base.clone(), ((dep_atom(w) - b_new) / a_new).normalize()?);
    }
    Ok(out)
}

/// Result of pushing a generator through a change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InheritedGenerator {
    /// Full push-forward over the new context.
    pub full: Generator,
    pub verdict: Inheritance,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inheritance {
    /// Projection onto the reduced variables.
    Inherited(Generator),
    /// The projection vanishes.
    Trivial,
    NotInheritable(String),
}

impl InheritedGenerator {
    pub fn projected(&self) -> Option<&Generator> {
        match &self.verdict {
            Inheritance::Inherited(g) => Some(g),
            _ => None,
        }
    }

    pub fn require(&self) -> Result<&Generator> {
        match &self.verdict {
            Inheritance::Inherited(g) => Ok(g),
            Inheritance::Trivial => Err(Error::NotInheritable(format!("{} projects to zero", self.full.name()))),
            Inheritance::NotInheritable(why) => Err(Error::NotInheritable(format!("{}: {why}", self.full.name()))),
        }
    }

    pub fn label(&self) -> &'static str {
        match &self.verdict {
            Inheritance::Inherited(_) => "inherited",
            Inheritance::Trivial => "trivial",
            Inheritance::NotInheritable(_) => "not inheritable",
        }
    }
}

/// `(new, old)` pairs as written `r:y s:x`.
pub fn parse_name_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.split_whitespace()
        .map(|p| {
            p.split_once(':')
                .map(|(n, o)| (n.to_string(), o.to_string()))
                .ok_or_else(|| Error::Invalid(format!("expected `new:old`, found `{p}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> VariableContext {
        VariableContext::build(&["t", "x", "y"], &["u"], &["c1", "c2"], &["f", "g"]).unwrap()
    }

    fn names(s: &str) -> CanonicalOptions {
        CanonicalOptions { names: parse_name_pairs(s).unwrap(), ..Default::default() }
    }

    #[test]
    fn translation_combination() {
        let c = ctx();
        let zt = ZeroTest::default();
        let x = Generator::parse("X", "xi_t=1, xi_x=c1, xi_y=c2", &c).unwrap();
        let cr = canonical_coordinates(&x, &c, &names("r:y s:x q:t w:u"), &zt).unwrap();
        let p = |s: &str| Expr::parse(s, &c).unwrap().normalize().unwrap();
        assert_eq!(cr.invariants[0], ("r".into(), p("y - c2*t")));
        assert_eq!(cr.invariants[1], ("s".into(), p("x - c1*t")));
        assert_eq!(cr.canonical, ("q".into(), p("t")));
        assert_eq!(cr.dependents[0], ("w".into(), p("u")));
        let ch = CoordinateChange::from_canonical(&cr, &c, &zt).unwrap();
        assert_eq!(ch.jacobian(), &Expr::int(-1));
        assert!(ch.a().mul(ch.a_inv()).unwrap().is_identity().unwrap());
    }

    #[test]
    fn scaling_pair() {
        let c = VariableContext::build(&["r", "s"], &["w"], &[], &[]).unwrap();
        let zt = ZeroTest::default();
        let y = Generator::parse("Y", "xi_r=r, xi_s=s", &c).unwrap();
        let cr = canonical_coordinates(&y, &c, &names("n:s m:r v:w"), &zt).unwrap();
        let p = |s: &str| Expr::parse(s, &c).unwrap().normalize().unwrap();
        assert_eq!(cr.invariants[0].1, p("s/r"));
        assert_eq!(cr.canonical.1, p("ln(r)"));
        let ch = CoordinateChange::from_canonical(&cr, &c, &zt).unwrap();
        let r2 = p("r^2");
        assert!((ch.jacobian().clone() + r2).normalizes_to_zero().unwrap());
    }

    #[test]
    fn single_translation_and_errors() {
        let c = ctx();
        let zt = ZeroTest::default();
        let x2 = Generator::parse("X2", "xi_x=1", &c).unwrap();
        let cr = canonical_coordinates(&x2, &c, &CanonicalOptions::default(), &zt).unwrap();
        assert_eq!(&*cr.canonical.0, "x1");
        assert_eq!(cr.invariants.iter().map(|(_, e)| e.to_string()).collect::<Vec<_>>(), ["t", "y"]);
        let bad = Generator::parse("B", "xi_t=t^2", &c).unwrap();
        assert!(matches!(
            canonical_coordinates(&bad, &c, &CanonicalOptions::default(), &zt),
            Err(Error::UnsupportedGenerator(_))
        ));
        let z = Generator::parse("Z", "eta_u=u", &c).unwrap();
        assert!(matches!(
            canonical_coordinates(&z, &c, &CanonicalOptions::default(), &zt),
            Err(Error::NoIndependentComponent)
        ));
    }

    #[test]
    fn mixed_scalings_use_logs_for_fractional_ratios() {
        let c = VariableContext::build(&["x", "y"], &["u"], &[], &[]).unwrap();
        let zt = ZeroTest::default();
        let g = Generator::parse("G", "xi_x=x, xi_y=1/2*y, eta_u=2*u", &c).unwrap();
        let cr = canonical_coordinates(&g, &c, &CanonicalOptions::default(), &zt).unwrap();
        assert_eq!(cr.canonical.1, Expr::parse("ln(x)", &c).unwrap());
        assert!(cr.invariants[0].1.to_string().contains("ln"));
        assert_eq!(cr.dependents[0].1, Expr::parse("u/x^2", &c).unwrap().normalize().unwrap());
        CoordinateChange::from_canonical(&cr, &c, &zt).unwrap();
    }

    #[test]
    fn user_affine_change() {
        let c = ctx();
        let zt = ZeroTest::default();
        let p = |s: &str| Expr::parse(s, &c).unwrap();
        let defs: Vec<(String, Expr)> = [("r", "y - c2*t"), ("s", "x - c1*t"), ("q", "t"), ("w", "u")]
            .iter()
            .map(|(n, e)| (n.to_string(), p(e)))
            .collect();
        let ch = CoordinateChange::from_definitions(&c, &defs, Some("q"), None, &zt).unwrap();
        let x = Generator::parse("X", "xi_t=1, xi_x=c1, xi_y=c2", &c).unwrap();
        ch.check_canonical_for(&x, &zt).unwrap();
        let x4 = Generator::parse("X4", "xi_t=t, xi_x=x, xi_y=y", &c).unwrap();
        assert!(ch.check_canonical_for(&x4, &zt).is_err());
        let nonaffine = [("r".to_string(), p("y^2")), ("s".into(), p("x")), ("q".into(), p("t")), ("w".into(), p("u"))];
        assert!(matches!(
            CoordinateChange::from_definitions(&c, &nonaffine, Some("q"), None, &zt),
            Err(Error::DegenerateChange(_))
        ));
    }

    #[test]
    fn identity_change_is_identity() {
        let c = ctx();
        let zt = ZeroTest::default();
        let defs: Vec<(String, Expr)> =
            ["t", "x", "y", "u"].iter().map(|n| (n.to_string(), Expr::parse(n, &c).unwrap())).collect();
        let ch = CoordinateChange::from_definitions(&c, &defs, None, None, &zt).unwrap();
        assert_eq!(ch.jacobian(), &Expr::one());
        assert!(ch.a().is_identity().unwrap());
        let t: Vec<Expr> =
            ["-D(u,t)", "f(u)*D(u,x)", "g(u)*D(u,y)"].iter().map(|s| Expr::parse(s, &c).unwrap()).collect();
        let tt = ch.transform_components(&t).unwrap();
        for (a, b) in t.iter().zip(&tt) {
            assert_eq!(&a.normalize().unwrap(), b);
        }
    }
}
