//! The iterated double-reduction driver.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::conservation::{association, Association, ConservedVector, DivergenceCheck, PdeSystem};
use crate::context::VariableContext;
use crate::coordinates::{
    canonical_coordinates, replace_names, CanonicalOptions, CanonicalResult, CoordinateChange, InheritedGenerator,
};
use crate::error::{Error, Result};
use crate::expr::{primitive_numerator, Expr, SymbolKind};
use crate::oracle::ZeroTest;
use crate::symmetry::Generator;

/// How a stage picks its generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// The first associated generator of the pool.
    FirstDeclared,
    /// A linear combination such as `X1 + c1*X2 + c2*X3` of pool members.
    Combination(String),
    /// All associated generators combined as `X_a + p1*X_b + p2*X_c + ...`
    /// with the declared parameters `p1, p2, ...` as coefficients.
    Exhaustive,
}

/// Coordinates supplied by hand for one stage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChangeSpec {
    /// `name = expression in the stage's variables`.
    pub definitions: Vec<(String, String)>,
    pub canonical: Option<String>,
    /// `old variable = expression in the new ones`; derived when absent.
    pub inverse: Option<Vec<(String, String)>>,
}

/// Per-stage overrides.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StagePlan {
    pub selection: Option<SelectionStrategy>,
    /// `(new, old)` name pairs for the canonical coordinates.
    pub names: Vec<(String, String)>,
    pub pivot: Option<String>,
    pub change: Option<ChangeSpec>,
    /// Extra generators for this stage: name and `xi_.. = ..` text.
    pub inject: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineOptions {
    pub strategy: SelectionStrategy,
    /// Plans keyed by stage number, starting at 1.
    pub stages: BTreeMap<usize, StagePlan>,
    pub zero_test: ZeroTest,
    /// Name of the integration constant.
    pub constant: String,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            strategy: SelectionStrategy::FirstDeclared,
            stages: BTreeMap::new(),
            zero_test: ZeroTest::default(),
            constant: "C".into(),
        }
    }
}

/// Parses a linear combination of named generators with constant
/// coefficients.
pub fn parse_combination(text: &str, gens: &[Generator], ctx: &VariableContext) -> Result<Generator> {
    let mut ext = ctx.clone();
    for g in gens {
        ext.declare_parameter(g.name())
            .map_err(|_| Error::Invalid(format!("generator name `{}` clashes with a declared name", g.name())))?;
    }
    let e = Expr::parse(text, &ext)?.normalize()?;
    let marker = |g: &Generator| Expr::symbol(SymbolKind::Parameter, g.name().into());
    let mut terms = Vec::new();
    let mut rest = e.clone();
    for g in gens {
        let m = marker(g);
        let c = e.partial(&m).normalize()?;
        if c.is_zero() {
            continue;
        }
        if gens.iter().any(|h| c.mentions(h.name())) || !c.is_constant() {
            return Err(Error::Invalid(format!("`{text}` is not linear in the generators")));
        }
        rest = rest - &c * &m;
        terms.push((c, g));
    }
    if !rest.normalize()?.is_zero() {
        return Err(Error::Invalid(format!("`{text}` has a term without a generator")));
    }
    if terms.is_empty() {
        return Err(Error::Invalid(format!("`{text}` names no generator")));
    }
    Generator::linear_combination(text.trim(), ctx, &terms)
}

pub type AssociationTable = Vec<(String, Association)>;

pub fn association_table(t: &ConservedVector, gens: &[Generator], zt: &ZeroTest) -> Result<AssociationTable> {
    gens.iter().map(|g| Ok((g.name().to_string(), association(t, g, zt)?))).collect()
}

/// Chooses a generator associated with `t`, or `None` if the strategy finds
/// none.
pub fn select_associated(
    t: &ConservedVector,
    gens: &[Generator],
    strategy: &SelectionStrategy,
    zt: &ZeroTest,
) -> Result<Option<Generator>> {
    let ctx = t.ctx();
    match strategy {
        SelectionStrategy::FirstDeclared => {
            for g in gens {
                if association(t, g, zt)?.is_associated() {
                    return Ok(Some(g.clone()));
                }
            }
            Ok(None)
        }
        SelectionStrategy::Combination(text) => {
            let g = parse_combination(text, gens, ctx)?;
            Ok(association(t, &g, zt)?.is_associated().then_some(g))
        }
        SelectionStrategy::Exhaustive => {
            let mut assoc = Vec::new();
            for g in gens {
                if association(t, g, zt)?.is_associated() {
                    assoc.push(g);
                }
            }
            let Some((first, rest)) = assoc.split_first() else { return Ok(None) };
            let mut terms = alloc::vec![(Expr::one(), *first)];
            let mut name = String::from(first.name());
            for (p, g) in ctx.parameters().iter().zip(rest) {
                terms.push((Expr::symbol(SymbolKind::Parameter, p.clone()), *g));
                name.push_str(&format!(" + {p}*{}", g.name()));
            }
            let g = Generator::linear_combination(&name, ctx, &terms)?;
            Ok(association(t, &g, zt)?.is_associated().then_some(g))
        }
    }
}

/// One application of the fundamental reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionStep {
    pub generator: Generator,
    pub association: Association,
    /// Present unless the coordinates were supplied by hand.
    pub canonical: Option<CanonicalResult>,
    pub change: CoordinateChange,
    /// All transformed components, the canonical one included.
    pub transformed: Vec<Expr>,
    /// Name and value of the dropped component `T^q`.
    pub dropped: (Arc<str>, Expr),
    /// `D_q T^q` vanishes.
    pub dropped_is_divergence_free: bool,
    /// The transformed bracket of the used generator vanishes.
    pub transformed_bracket_vanishes: bool,
    pub reduced_system: Arc<PdeSystem>,
    pub reduced_t: ConservedVector,
    pub divergence: DivergenceCheck,
    pub inherited: Vec<InheritedGenerator>,
}

/// Transformed equations with nonvanishing factors cleared, free of the
/// canonical variable, each solved for its top-ranked derivative.
fn reduced_system(sys: &PdeSystem, ch: &CoordinateChange, q: &str) -> Result<PdeSystem> {
    let mut lhs = Vec::new();
    for eq in sys.equations() {
        let e = primitive_numerator(&ch.to_new(&eq.lhs)?)?;
        if e.mentions(q) {
            return Err(Error::Invalid(format!(
                "the transformed equation {e} = 0 depends on {q}; the generator is not a symmetry of the system"
            )));
        }
        lhs.push(e);
    }
    PdeSystem::with_ranked_leading(ch.reduced_context(), lhs)
}

/// Reduces `t` by the associated generator `x`.
pub fn reduce_once(
    t: &ConservedVector,
    x: &Generator,
    plan: &StagePlan,
    pool: &[Generator],
    zt: &ZeroTest,
) -> Result<ReductionStep> {
    let ctx = t.ctx();
    let verdict = association(t, x, zt)?;
    match &verdict {
        Association::Associated { .. } => {}
        Association::NotAssociated { component, residual } => {
            return Err(Error::NotAssociated {
                generator: x.name().to_string(),
                component: component.clone(),
                residual: residual.to_string(),
            })
        }
        Association::TrivialBracket => {
            return Err(Error::InvalidGenerator(format!("{} is the zero generator", x.name())))
        }
    }
    let (canonical, change) = match &plan.change {
        Some(spec) => {
            let defs = spec
                .definitions
                .iter()
                .map(|(n, e)| Ok((n.clone(), Expr::parse(e, ctx)?)))
                .collect::<Result<Vec<_>>>()?;
            let canonical = spec
                .canonical
                .as_deref()
                .ok_or_else(|| Error::Invalid("a coordinate change for a reduction needs `canonical = ...`".into()))?;
            let ch = CoordinateChange::from_definitions(ctx, &defs, Some(canonical), spec.inverse.as_deref(), zt)?;
            ch.check_canonical_for(x, zt)?;
            (None, ch)
        }
        None => {
            let opts = CanonicalOptions { names: plan.names.clone(), pivot: plan.pivot.clone(), suffix: String::new() };
            let cr = canonical_coordinates(x, ctx, &opts, zt)?;
            let ch = CoordinateChange::from_canonical(&cr, ctx, zt)?;
            (Some(cr), ch)
        }
    };
    let q: Arc<str> = change.canonical().expect("reductions always have a canonical variable").into();
    let qi = change.new_context().independent_position(&q).expect("canonical variable is an independent");

    let transformed = change.transform_components(t.components())?;
    let dropped = (q.clone(), transformed[qi].clone());
    let dq = dropped.1.total_derivative(&q, change.new_context())?;
    let dropped_is_divergence_free = zt.is_zero(&dq, change.new_context())?;

    // J (A^-1)^T [T, X], first as an identity, else on solutions
    let mut transformed_bracket_vanishes = true;
    for c in change.transformed_bracket(t.components(), x)? {
        transformed_bracket_vanishes &= zt.is_zero(&c, change.new_context())?;
    }
    if !transformed_bracket_vanishes {
        let on_solutions = crate::conservation::bracket(t.components(), x, ctx)?
            .iter()
            .map(|c| t.system().reduce_mod(c))
            .collect::<Result<Vec<_>>>()?;
        transformed_bracket_vanishes = true;
        for c in change.transform_components(&on_solutions)? {
            transformed_bracket_vanishes &= zt.is_zero(&c, change.new_context())?;
        }
    }

    let system = Arc::new(reduced_system(t.system(), &change, &q)?);
    let kept: Vec<Expr> = transformed.iter().enumerate().filter(|(i, _)| *i != qi).map(|(_, e)| e.clone()).collect();
    if let Some(bad) = kept.iter().find(|e| e.mentions(&q)) {
        return Err(Error::Invalid(format!("reduced component {bad} still depends on {q}")));
    }
    let reduced_t = ConservedVector::new_unchecked(kept, system.clone())?;
    let divergence = reduced_t.check_divergence(zt)?;
    if !divergence.holds {
        return Err(Error::NotConserved(divergence.residual.to_string()));
    }
    let inherited = pool.iter().map(|g| change.transform_generator(g, zt)).collect::<Result<Vec<_>>>()?;
    Ok(ReductionStep {
        generator: x.clone(),
        association: verdict,
        canonical,
        change,
        transformed,
        dropped,
        dropped_is_divergence_free,
        transformed_bracket_vanishes,
        reduced_system: system,
        reduced_t,
        divergence,
        inherited,
    })
}

/// `lhs = constant` with `D_var lhs = 0` on solutions of the final system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirstIntegral {
    pub lhs: Expr,
    pub var: Arc<str>,
    pub dependents: Vec<Arc<str>>,
    pub constant: String,
    pub system: Arc<PdeSystem>,
    /// Highest derivative order in `lhs`.
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Final {
    FirstIntegral(FirstIntegral),
    /// No associated generator at some stage.
    Incomplete { diagnostic: String, system: Arc<PdeSystem>, t: ConservedVector },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionTrace {
    pub initial: DivergenceCheck,
    /// Association table of each stage, including a final failing one.
    pub tables: Vec<AssociationTable>,
    pub steps: Vec<ReductionStep>,
    pub end: Final,
    pub original_order: usize,
    /// Variables of the last stage expressed in the original ones.
    pub back_substitution: Vec<(Arc<str>, Expr)>,
}

impl ReductionTrace {
    pub fn first_integral(&self) -> Option<&FirstIntegral> {
        match &self.end {
            Final::FirstIntegral(fi) => Some(fi),
            Final::Incomplete { .. } => None,
        }
    }

    pub fn final_order(&self) -> Option<usize> {
        self.first_integral().map(|fi| fi.order)
    }

    pub fn is_complete(&self) -> bool {
        self.first_integral().is_some()
    }
}

fn stage_pool(base: &[Generator], plan: &StagePlan, ctx: &VariableContext) -> Result<Vec<Generator>> {
    let mut pool = base.to_vec();
    for (name, text) in &plan.inject {
        pool.retain(|g| g.name() != name);
        pool.push(Generator::parse(name, text, ctx)?);
    }
    Ok(pool)
}

/// Reduces until one independent variable remains and returns the trace,
/// ending in the first integral `T^n = C` or in a diagnostic.
pub fn run_pipeline(t: &ConservedVector, gens: &[Generator], opts: &PipelineOptions) -> Result<ReductionTrace> {
    let zt = &opts.zero_test;
    let initial = t.check_divergence(zt)?;
    if !initial.holds {
        return Err(Error::NotConserved(initial.residual.to_string()));
    }
    let original_order = t.system().order();
    let names = |ctx: &VariableContext| -> Vec<Arc<str>> {
        ctx.independents().iter().cloned().chain(ctx.dependents().iter().map(|d| d.name.clone())).collect()
    };
    let mut defs: BTreeMap<Arc<str>, Expr> = BTreeMap::new();
    for n in names(t.ctx()) {
        defs.insert(n.clone(), t.ctx().symbol(&n)?);
    }
    let mut current = t.clone();
    let mut pool = gens.to_vec();
    let mut steps = Vec::new();
    let mut tables = Vec::new();
    let empty = StagePlan::default();
    let end = loop {
        let ctx = current.ctx().clone();
        if ctx.dim() <= 1 {
            let var = ctx.independents().first().cloned().ok_or_else(|| Error::Invalid("no independent variable".into()))?;
            let lhs = current.components()[0].clone();
            let order = lhs.max_order();
            break Final::FirstIntegral(FirstIntegral {
                lhs,
                var,
                dependents: ctx.dependents().iter().map(|d| d.name.clone()).collect(),
                constant: opts.constant.clone(),
                system: current.system().clone(),
                order,
            });
        }
        let stage = steps.len() + 1;
        let plan = opts.stages.get(&stage).unwrap_or(&empty);
        let candidates = stage_pool(&pool, plan, &ctx)?;
        tables.push(association_table(&current, &candidates, zt)?);
        let strategy = plan.selection.as_ref().unwrap_or(&opts.strategy);
        let Some(x) = select_associated(&current, &candidates, strategy, zt)? else {
            break Final::Incomplete {
                diagnostic: format!("stage {stage}: no associated generator among the candidates"),
                system: current.system().clone(),
                t: current.clone(),
            };
        };
        let step = reduce_once(&current, &x, plan, &candidates, zt)?;
        let ch = &step.change;
        let mut next_defs = BTreeMap::new();
        for (n, def) in ch.forward().iter().chain(ch.dependents()) {
            next_defs.insert(n.clone(), replace_names(def, &defs)?.normalize()?);
        }
        let reduced_ctx = ch.reduced_context();
        next_defs.retain(|n, _| names(&reduced_ctx).contains(n));
        defs = next_defs;
        pool = step.inherited.iter().filter_map(|ig| ig.projected().cloned()).collect();
        current = step.reduced_t.clone();
        steps.push(step);
    };
    let back_substitution = names(current.ctx()).into_iter().filter_map(|n| defs.get(&n).map(|e| (n, e.clone()))).collect();
    Ok(ReductionTrace { initial, tables, steps, end, original_order, back_substitution })
}
