//! The checks behind each subcommand, rendered as plain-text reports.

use std::fmt::Write as _;

use dred_core::conservation::{association, bracket, Association};
use dred_core::oracle::{verify_zero, Verdict};
use dred_core::pipeline::{parse_combination, reduce_once, run_pipeline, Final, ReductionStep};
use dred_core::{ConservedVector, Expr, Generator, PipelineOptions, SelectionStrategy, VariableContext, ZeroTest};

use crate::problem::Problem;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CommandError(pub String);

impl From<dred_core::Error> for CommandError {
    fn from(e: dred_core::Error) -> Self {
        CommandError(e.to_string())
    }
}

impl From<String> for CommandError {
    fn from(e: String) -> Self {
        CommandError(e)
    }
}

type Result<T> = std::result::Result<T, CommandError>;

/// Numeric verification settings shared by every command.
#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { samples: 100, seed: 0x5EED }
    }
}

impl Settings {
    pub fn zero_test(&self) -> ZeroTest {
        ZeroTest::with_seed(self.seed)
    }
}

/// A generator given by name or as a linear combination.
#[derive(Clone, Debug)]
pub enum Target {
    Gen(String),
    Combo(String),
}

impl Target {
    fn resolve(&self, problem: &Problem) -> Result<Generator> {
        match self {
            Target::Gen(name) => Ok(problem.generator(name)?.clone()),
            Target::Combo(text) => parse_combination(text, &problem.generators, &problem.context)
                .map_err(|e| CommandError(format!("malformed combination `{text}`: {e}"))),
        }
    }
}

/// An expression in the machine-readable dump, with the context it
/// parses in.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub key: String,
    pub expr: Expr,
    pub context: VariableContext,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    text: String,
    pub canonical: Vec<Canonical>,
    failures: usize,
    checks: usize,
}

impl Report {
    fn line(&mut self, indent: usize, s: impl AsRef<str>) {
        let _ = writeln!(self.text, "{:indent$}{}", "", s.as_ref(), indent = indent);
    }

    fn check(&mut self, indent: usize, pass: bool, what: impl AsRef<str>) {
        self.checks += 1;
        if !pass {
            self.failures += 1;
        }
        self.line(indent, format!("[{}] {}", if pass { "PASS" } else { "FAIL" }, what.as_ref()));
    }

    fn numeric(&mut self, indent: usize, what: &str, v: &Verdict, expect_zero: bool) -> bool {
        let pass = !v.inconclusive && v.pass == expect_zero;
        let detail = if v.inconclusive {
            format!("inconclusive, only {} usable samples", v.evaluated)
        } else {
            format!("max residual {:.3e} over {} samples", v.max_abs_residual, v.evaluated)
        };
        self.check(indent, pass, format!("{what} ({detail})"));
        pass
    }

    fn emit(&mut self, key: impl Into<String>, expr: &Expr, context: &VariableContext) {
        self.canonical.push(Canonical { key: key.into(), expr: expr.clone(), context: context.clone() });
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// `key = expression`, one per line.
    pub fn canonical_text(&self) -> String {
        self.canonical.iter().map(|c| format!("{} = {}\n", c.key, c.expr)).collect()
    }

    fn finish(mut self) -> Self {
        let summary = if self.passed() {
            format!("result: PASS ({} checks)", self.checks)
        } else {
            format!("result: FAIL ({} of {} checks failed)", self.failures, self.checks)
        };
        self.line(0, summary);
        self
    }
}

fn header(r: &mut Report, p: &Problem) {
    let c = &p.context;
    r.line(
        0,
        format!(
            "problem {}: {} independents, {} dependent(s), {} parameters, {} functions, {} generators",
            p.name,
            c.independents().len(),
            c.dependents().len(),
            c.parameters().len(),
            c.functions().len(),
            p.generators.len()
        ),
    );
}

fn components(r: &mut Report, indent: usize, key: &str, t: &ConservedVector) {
    for (v, e) in t.ctx().independents().iter().zip(t.components()) {
        r.line(indent, format!("T^{v} = {e}"));
        r.emit(format!("{key}.T^{v}"), e, t.ctx());
    }
}

/// The divergence modulo the system: symbolic verdict plus a numeric check
/// of the substituted but unnormalized expression.
fn divergence_checks(r: &mut Report, indent: usize, key: &str, t: &ConservedVector, s: &Settings) -> Result<()> {
    let check = t.check_divergence(&s.zero_test())?;
    r.line(indent, format!("divergence on solutions: {}", check.residual));
    r.emit(format!("{key}.divergence"), &check.residual, t.ctx());
    r.check(indent, check.holds, "divergence vanishes symbolically");
    let (raw, _) = t.system().reduce_mod_raw(&t.divergence()?)?;
    r.numeric(indent, "divergence vanishes numerically", &verify_zero(&raw, t.ctx(), s.samples, s.seed), true);
    if check.trivial {
        r.line(indent, "note: the divergence vanishes identically, so the conservation law is trivial");
    }
    Ok(())
}

pub fn check_div(p: &Problem, s: &Settings) -> Result<Report> {
    let mut r = Report::default();
    input_section(&mut r, p, s)?;
    Ok(r.finish())
}

fn describe(a: &Association) -> String {
    match a {
        Association::Associated { identically: true } => "bracket vanishes identically".into(),
        Association::Associated { identically: false } => "bracket vanishes on solutions".into(),
        Association::NotAssociated { component, residual } => format!("{component}-component: {residual}"),
        Association::TrivialBracket => "zero generator".into(),
    }
}

/// Association of each generator with a numeric confirmation of the verdict.
fn association_checks(r: &mut Report, indent: usize, t: &ConservedVector, gens: &[Generator], s: &Settings) -> Result<()> {
    let zt = s.zero_test();
    let ctx = t.ctx();
    let width = gens.iter().map(|g| g.name().len()).max().unwrap_or(0);
    for g in gens {
        let verdict = association(t, g, &zt)?;
        r.line(indent, format!("{:width$}  {:16} {}", g.name(), verdict.label(), describe(&verdict), width = width));
    }
    for g in gens {
        let verdict = association(t, g, &zt)?;
        if matches!(verdict, Association::TrivialBracket) {
            continue;
        }
        let b = bracket(t.components(), g, ctx)?;
        let mut verdicts = Vec::new();
        for (v, c) in ctx.independents().iter().zip(&b) {
            let (raw, reduced) = t.system().reduce_mod_raw(c)?;
            r.emit(format!("bracket.{}.{v}", g.name()), &reduced, ctx);
            verdicts.push((v.clone(), verify_zero(&raw, ctx, s.samples, s.seed)));
        }
        let (what, v) = match &verdict {
            Association::NotAssociated { component, .. } => {
                let v = verdicts.iter().find(|(n, _)| **n == **component).map(|(_, v)| v.clone()).expect("named component");
                (format!("{}: {component}-component of the bracket is numerically nonzero on solutions", g.name()), v)
            }
            _ => {
                let worst = verdicts.into_iter().map(|(_, v)| v).reduce(|a, b| Verdict {
                    pass: a.pass && b.pass,
                    inconclusive: a.inconclusive || b.inconclusive,
                    evaluated: a.evaluated.min(b.evaluated),
                    max_abs_residual: a.max_abs_residual.max(b.max_abs_residual),
                });
                (format!("{}: bracket vanishes numerically on solutions", g.name()), worst.expect("at least one component"))
            }
        };
        r.numeric(indent, &what, &v, verdict.is_associated());
    }
    Ok(())
}

pub fn check_assoc(p: &Problem, target: Option<&Target>, s: &Settings) -> Result<Report> {
    let mut r = Report::default();
    header(&mut r, p);
    let t = p.conserved_vector()?;
    r.line(0, "association with the conserved vector");
    match target {
        None => association_checks(&mut r, 2, &t, &p.generators, s)?,
        Some(target) => {
            let g = target.resolve(p)?;
            association_checks(&mut r, 2, &t, std::slice::from_ref(&g), s)?;
            let associated = association(&t, &g, &s.zero_test())?.is_associated();
            r.check(2, associated, format!("{} is associated", g.name()));
        }
    }
    Ok(r.finish())
}

fn join_defs(defs: &[(std::sync::Arc<str>, Expr)], canonical: Option<&str>) -> String {
    defs.iter()
        .map(|(n, e)| if Some(&**n) == canonical { format!("{n} = {e} (canonical)") } else { format!("{n} = {e}") })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Report and checks for one reduction of `input` by `step.generator`.
fn step_report(r: &mut Report, stage: usize, input: &ConservedVector, step: &ReductionStep, s: &Settings, deep: bool) -> Result<()> {
    let key = format!("stage{stage}");
    let ch = &step.change;
    let new = ch.new_context();
    r.line(2, format!("generator {} = {}", step.generator.name(), step.generator));
    let forward: Vec<_> = ch.forward().iter().chain(ch.dependents()).cloned().collect();
    r.line(2, format!("coordinates: {}", join_defs(&forward, ch.canonical())));
    for (n, e) in &forward {
        r.emit(format!("{key}.{n}"), e, ch.old_context());
    }
    let inverse: Vec<String> = ch.inverse().iter().map(|(n, e)| format!("{n} = {e}")).collect();
    r.line(2, format!("inverse: {}", inverse.join(", ")));
    r.line(2, format!("Jacobian J = {}", ch.jacobian_new()));
    r.emit(format!("{key}.J"), ch.jacobian_new(), new);
    r.line(2, "transformed components J (A^-1)^T T");
    for (v, e) in new.independents().iter().zip(&step.transformed) {
        let note = if *v == step.dropped.0 { "  (dropped)" } else { "" };
        r.line(4, format!("T^{v} = {e}{note}"));
        r.emit(format!("{key}.T^{v}"), e, new);
    }
    for eq in step.reduced_system.equations() {
        r.line(2, format!("reduced equation: {} = 0, solved for {}", eq.lhs, Expr::deriv(eq.leading.clone())));
    }
    let kept: Vec<String> = step.reduced_t.ctx().independents().iter().map(|v| format!("D_{v} T^{v}")).collect();
    r.line(2, format!("reduced conserved form: {} = 0", kept.join(" + ")));

    let q = &step.dropped.0;
    r.check(2, step.dropped_is_divergence_free, format!("D_{q} T^{q} vanishes"));
    r.check(2, step.transformed_bracket_vanishes, "transformed bracket J (A^-1)^T [T, X] vanishes");
    let rowrep = ch.transform_components_rowrep(input.components())?;
    let mut agree = true;
    for (a, b) in rowrep.iter().zip(&step.transformed) {
        agree &= (a - b).normalizes_to_zero()?;
    }
    r.check(2, agree, "row-replacement determinants agree with J (A^-1)^T T");
    let transport = &ch.transport_divergence(input.components())? - &ch.new_divergence(&step.transformed)?;
    r.numeric(2, "J D_i T^i equals the new divergence", &verify_zero(&transport, new, s.samples, s.seed), true);
    if deep {
        let mut worst = Verdict { pass: true, max_abs_residual: 0.0, evaluated: s.samples, inconclusive: false };
        for h in input.components() {
            let hn = ch.to_new(h)?;
            for (i, nv) in new.independents().iter().enumerate() {
                let rhs = Expr::add(
                    ch.old_context()
                        .independents()
                        .iter()
                        .enumerate()
                        .map(|(k, ov)| Ok(ch.a_new().get(i, k) * &ch.to_new(&h.total_derivative(ov, ch.old_context())?)?))
                        .collect::<Result<Vec<_>>>()?,
                );
                let v = verify_zero(&(&hn.total_derivative(nv, new)? - &rhs), new, s.samples, s.seed);
                worst = Verdict {
                    pass: worst.pass && v.pass,
                    inconclusive: worst.inconclusive || v.inconclusive,
                    evaluated: worst.evaluated.min(v.evaluated),
                    max_abs_residual: worst.max_abs_residual.max(v.max_abs_residual),
                };
            }
        }
        r.numeric(2, "chain rule D~_i = (D~_i x_k) D_k on every component", &worst, true);
    }
    r.line(2, "reduced conserved vector");
    components(r, 4, &format!("{key}.reduced"), &step.reduced_t);
    divergence_checks(r, 4, &format!("{key}.reduced"), &step.reduced_t, s)?;
    if !step.inherited.is_empty() {
        r.line(2, "generators on the reduced system");
        let width = step.inherited.iter().map(|g| g.full.name().len()).max().unwrap_or(0);
        for ig in &step.inherited {
            let detail = match ig.projected() {
                Some(g) => {
                    for (v, e) in g.xi() {
                        r.emit(format!("{key}.inherited.{}.xi_{v}", g.name()), e, step.reduced_t.ctx());
                    }
                    g.to_string()
                }
                None => format!("push-forward {}", ig.full),
            };
            r.line(4, format!("{:width$}  {:16} {}", ig.full.name(), ig.label(), detail, width = width));
        }
    }
    Ok(())
}

pub fn reduce(p: &Problem, target: &Target, names: Option<&str>, pivot: Option<&str>, s: &Settings) -> Result<Report> {
    let mut r = Report::default();
    header(&mut r, p);
    let t = p.conserved_vector()?;
    let x = target.resolve(p)?;
    let mut plan = p.stages.get(&1).cloned().unwrap_or_default();
    plan.selection = None;
    if let Some(n) = names {
        plan.names = dred_core::coordinates::parse_name_pairs(n)?;
    }
    if let Some(v) = pivot {
        plan.pivot = Some(v.to_string());
    }
    let step = reduce_once(&t, &x, &plan, &p.generators, &s.zero_test())?;
    r.line(0, "reduction");
    step_report(&mut r, 1, &t, &step, s, true)?;
    Ok(r.finish())
}

/// Strategy precedence: command line, then the problem file, then the
/// first declared associated generator.
pub fn pipeline_options(p: &Problem, strategy: Option<SelectionStrategy>, s: &Settings) -> PipelineOptions {
    let mut opts = PipelineOptions { stages: p.stages.clone(), zero_test: s.zero_test(), ..PipelineOptions::default() };
    match strategy {
        Some(st) => {
            opts.strategy = st.clone();
            opts.stages.entry(1).or_default().selection = Some(st);
        }
        None => {
            if let Some(st) = &p.strategy {
                opts.strategy = st.clone();
            }
        }
    }
    opts
}

fn input_section(r: &mut Report, p: &Problem, s: &Settings) -> Result<ConservedVector> {
    header(r, p);
    let t = p.conserved_vector()?;
    r.line(0, "conserved vector");
    components(r, 2, "input", &t);
    divergence_checks(r, 2, "input", &t, s)?;
    Ok(t)
}

fn trace_section(r: &mut Report, p: &Problem, t: &ConservedVector, opts: &PipelineOptions, s: &Settings, deep: bool) -> Result<()> {
    let trace = run_pipeline(t, &p.generators, opts)?;
    let mut input = t.clone();
    for (i, table) in trace.tables.iter().enumerate() {
        r.line(0, format!("stage {}", i + 1));
        r.line(2, "association table");
        let width = table.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        for (name, a) in table {
            r.line(4, format!("{:width$}  {:16} {}", name, a.label(), describe(a), width = width));
        }
        if let Some(step) = trace.steps.get(i) {
            step_report(r, i + 1, &input, step, s, deep)?;
            input = step.reduced_t.clone();
        }
    }
    match &trace.end {
        Final::FirstIntegral(fi) => {
            r.line(0, "first integral");
            r.line(2, format!("{} = {}", fi.lhs, fi.constant));
            r.emit("first_integral", &fi.lhs, fi.system.ctx());
            let back: Vec<String> = trace.back_substitution.iter().map(|(n, e)| format!("{n} = {e}")).collect();
            r.line(2, format!("where {}", back.join(", ")));
            for (n, e) in &trace.back_substitution {
                r.emit(format!("back.{n}"), e, &p.context);
            }
            r.line(2, format!("order: {} -> {}", trace.original_order, fi.order));
            let d = fi.lhs.total_derivative(&fi.var, fi.system.ctx())?;
            let (raw, _) = fi.system.reduce_mod_raw(&d)?;
            let v = verify_zero(&raw, fi.system.ctx(), s.samples, s.seed);
            r.numeric(2, &format!("D_{} of the first integral vanishes on solutions", fi.var), &v, true);
        }
        Final::Incomplete { diagnostic, .. } => {
            r.line(0, "reduction incomplete");
            r.check(2, false, diagnostic);
        }
    }
    Ok(())
}

pub fn pipeline(p: &Problem, strategy: Option<SelectionStrategy>, s: &Settings) -> Result<Report> {
    let mut r = Report::default();
    let t = input_section(&mut r, p, s)?;
    trace_section(&mut r, p, &t, &pipeline_options(p, strategy, s), s, false)?;
    Ok(r.finish())
}

/// Every check at once: divergence, association table and the full
/// pipeline with the chain-rule identity at every stage.
pub fn verify(p: &Problem, s: &Settings) -> Result<Report> {
    let mut r = Report::default();
    let t = input_section(&mut r, p, s)?;
    r.line(0, "association with the conserved vector");
    association_checks(&mut r, 2, &t, &p.generators, s)?;
    trace_section(&mut r, p, &t, &pipeline_options(p, None, s), s, true)?;
    Ok(r.finish())
}
