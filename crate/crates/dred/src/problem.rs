//! The line-oriented problem file.
//!
//! ```text
//! vars t x y
//! deps u
//! params c1 c2
//! funcs f(u) g(u)
//! pde lead=D(u,t,t): D(u,t,t) - D(f(u)*D(u,x), x) - D(g(u)*D(u,y), y)
//! conserved -D(u,t) ; f(u)*D(u,x) ; g(u)*D(u,y)
//! sym X1: xi_t=1
//! strategy exhaustive
//! stage 2: gen = X4; names = n:s m:r v:w
//! change 1: r = y - c2*t, s = x - c1*t, q = t, w = u; canonical = q
//! ```
//!
//! `#` starts a comment. Names must be declared before they are used.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use dred_core::conservation::Equation;
use dred_core::coordinates::parse_name_pairs;
use dred_core::pipeline::parse_combination;
use dred_core::{
    ChangeSpec, ConservedVector, Expr, Generator, PdeSystem, SelectionStrategy, StagePlan, VariableContext,
};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required section(s): {0}")]
    Missing(String),
}

fn at<E: std::fmt::Display>(line: usize) -> impl Fn(E) -> LoadError {
    move |e| LoadError::Line { line, message: e.to_string() }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub context: VariableContext,
    pub system: Arc<PdeSystem>,
    pub conserved: Vec<Expr>,
    pub generators: Vec<Generator>,
    pub strategy: Option<SelectionStrategy>,
    pub stages: BTreeMap<usize, StagePlan>,
}

/// Splits at `sep` outside parentheses.
fn split_top(text: &str, sep: char) -> Vec<&str> {
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

/// Whitespace-separated words, keeping `f(u, v)` together.
fn words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = None;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c.is_whitespace() && depth == 0 {
            if let Some(s) = start.take() {
                out.push(&text[s..i]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

type Call<'a> = (&'a str, Option<Vec<Arc<str>>>);

/// `name` or `name(a, b)`.
fn call(word: &str) -> Result<Call<'_>, String> {
    match word.split_once('(') {
        None => Ok((word, None)),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| format!("unbalanced parentheses in `{word}`"))?;
            let args = inner.split(',').map(|a| Arc::from(a.trim())).filter(|a: &Arc<str>| !a.is_empty()).collect();
            Ok((name.trim(), Some(args)))
        }
    }
}

fn assignments(text: &str) -> Result<Vec<(String, String)>, String> {
    split_top(text, ',')
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("expected `name = expression` in `{s}`"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn strategy(text: &str) -> Result<SelectionStrategy, String> {
    let text = text.trim();
    match text {
        "first" => Ok(SelectionStrategy::FirstDeclared),
        "exhaustive" => Ok(SelectionStrategy::Exhaustive),
        _ => match text.strip_prefix("combo") {
            Some(c) if !c.trim().is_empty() => Ok(SelectionStrategy::Combination(c.trim().to_string())),
            _ => Err(format!("unknown strategy `{text}`; expected first, exhaustive or combo <expression>")),
        },
    }
}

/// `N: rest` after a `stage` or `change` keyword.
fn numbered(rest: &str) -> Result<(usize, &str), String> {
    let (n, body) = rest.split_once(':').ok_or("expected `<stage number>: ...`")?;
    let n: usize = n.trim().parse().map_err(|_| format!("`{}` is not a stage number", n.trim()))?;
    if n == 0 {
        return Err("stages are numbered from 1".into());
    }
    Ok((n, body))
}

fn stage_plan(body: &str, plan: &mut StagePlan) -> Result<(), String> {
    for seg in split_top(body, ';').into_iter().map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = seg.strip_prefix("sym ") {
            let (name, coeffs) = rest.split_once(':').ok_or("expected `sym NAME: coefficients`")?;
            plan.inject.push((name.trim().to_string(), coeffs.trim().to_string()));
            continue;
        }
        let (key, value) = seg.split_once('=').ok_or_else(|| format!("expected `key = value` in `{seg}`"))?;
        let value = value.trim();
        match key.trim() {
            "gen" => plan.selection = Some(SelectionStrategy::Combination(value.to_string())),
            "strategy" => plan.selection = Some(strategy(value)?),
            "names" => plan.names = parse_name_pairs(value).map_err(|e| e.to_string())?,
            "pivot" => plan.pivot = Some(value.to_string()),
            other => return Err(format!("unknown stage setting `{other}`")),
        }
    }
    Ok(())
}

fn change_spec(body: &str) -> Result<ChangeSpec, String> {
    let mut spec = ChangeSpec::default();
    for seg in split_top(body, ';').into_iter().map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = seg.strip_prefix("inverse") {
            let rest = rest.trim_start().strip_prefix(':').ok_or("expected `inverse: old = expression, ...`")?;
            spec.inverse = Some(assignments(rest)?);
        } else if let Some(rest) = seg.strip_prefix("canonical") {
            let q = rest.trim_start().strip_prefix('=').ok_or("expected `canonical = name`")?;
            spec.canonical = Some(q.trim().to_string());
        } else {
            spec.definitions.extend(assignments(seg)?);
        }
    }
    if spec.definitions.is_empty() {
        return Err("a change needs at least one definition".into());
    }
    Ok(spec)
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, LoadError> {
        let mut ctx = VariableContext::new();
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut pdes: Vec<(usize, Expr, Option<Expr>)> = Vec::new();
        let mut conserved: Option<(usize, Vec<Expr>)> = None;
        let mut generators: Vec<Generator> = Vec::new();
        let mut strat: Option<(usize, SelectionStrategy)> = None;
        let mut stages: BTreeMap<usize, StagePlan> = BTreeMap::new();
        let mut combos: Vec<(usize, String)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            let rest = rest.trim();
            let err = at::<String>(line);
            match keyword {
                "vars" | "deps" | "params" | "funcs" => {
                    let kw: &'static str = match keyword {
                        "vars" => "vars",
                        "deps" => "deps",
                        "params" => "params",
                        _ => "funcs",
                    };
                    if let Some(prev) = seen.insert(kw, line) {
                        return Err(err(format!("`{kw}` already given on line {prev}")));
                    }
                    let names = words(rest);
                    if names.is_empty() && kw != "params" && kw != "funcs" {
                        return Err(err(format!("`{kw}` needs at least one name")));
                    }
                    for w in names {
                        let (n, args) = call(w).map_err(&err)?;
                        let r = match (kw, args) {
                            ("vars", None) => ctx.declare_independent(n),
                            ("deps", args) => ctx.declare_dependent(n, args),
                            ("params", None) => ctx.declare_parameter(n),
                            ("funcs", Some(sig)) => ctx.declare_function(n, sig),
                            ("funcs", None) => return Err(err(format!("function `{n}` needs a signature like {n}(u)"))),
                            _ => return Err(err(format!("`{w}`: only plain names are allowed in `{kw}`"))),
                        };
                        r.map_err(at(line))?;
                    }
                }
                "pde" => {
                    let (lead, body) = match rest.strip_prefix("lead=") {
                        Some(r) => {
                            let (l, b) = split_colon(r).ok_or_else(|| err("expected `pde lead=ATOM: expression`".into()))?;
                            (Some(Expr::parse(l, &ctx).map_err(at(line))?), b)
                        }
                        None => (None, rest),
                    };
                    let lhs = Expr::parse(body, &ctx).map_err(at(line))?;
                    pdes.push((line, lhs, lead));
                }
                "conserved" => {
                    if let Some((prev, _)) = conserved {
                        return Err(err(format!("`conserved` already given on line {prev}")));
                    }
                    let comps = split_top(rest, ';')
                        .into_iter()
                        .map(|c| Expr::parse(c, &ctx))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(at(line))?;
                    if comps.len() != ctx.independents().len() {
                        return Err(err(format!(
                            "{} components for {} independent variables",
                            comps.len(),
                            ctx.independents().len()
                        )));
                    }
                    conserved = Some((line, comps));
                }
                "sym" => {
                    let (gname, coeffs) = rest.split_once(':').ok_or_else(|| err("expected `sym NAME: coefficients`".into()))?;
                    let gname = gname.trim();
                    if generators.iter().any(|g| g.name() == gname) {
                        return Err(err(format!("generator `{gname}` declared twice")));
                    }
                    generators.push(Generator::parse(gname, coeffs, &ctx).map_err(at(line))?);
                }
                "strategy" => {
                    if let Some((prev, _)) = strat {
                        return Err(err(format!("`strategy` already given on line {prev}")));
                    }
                    let s = strategy(rest).map_err(&err)?;
                    if let SelectionStrategy::Combination(c) = &s {
                        combos.push((line, c.clone()));
                    }
                    strat = Some((line, s));
                }
                "stage" => {
                    let (n, body) = numbered(rest).map_err(&err)?;
                    let plan = stages.entry(n).or_default();
                    stage_plan(body, plan).map_err(&err)?;
                    if n == 1 {
                        if let Some(SelectionStrategy::Combination(c)) = &plan.selection {
                            combos.push((line, c.clone()));
                        }
                    }
                }
                "change" => {
                    let (n, body) = numbered(rest).map_err(&err)?;
                    let spec = change_spec(body).map_err(&err)?;
                    if n == 1 {
                        for (_, e) in &spec.definitions {
                            Expr::parse(e, &ctx).map_err(at(line))?;
                        }
                    }
                    stages.entry(n).or_default().change = Some(spec);
                }
                other => return Err(err(format!("unknown section `{other}`"))),
            }
        }

        let mut missing = Vec::new();
        for kw in ["vars", "deps"] {
            if !seen.contains_key(kw) {
                missing.push(kw);
            }
        }
        if pdes.is_empty() {
            missing.push("pde");
        }
        if conserved.is_none() {
            missing.push("conserved");
        }
        if !missing.is_empty() {
            return Err(LoadError::Missing(missing.join(", ")));
        }

        let first = pdes[0].0;
        let system = if pdes.iter().all(|(_, _, l)| l.is_some()) {
            let mut eqs = Vec::new();
            for (line, lhs, lead) in pdes {
                let lead = lead.expect("checked above");
                let atom = match lead.node() {
                    dred_core::expr::Node::Deriv(d) => d.clone(),
                    _ => return Err(at(line)(format!("`{lead}` is not a derivative of a dependent variable"))),
                };
                eqs.push(Equation { lhs, leading: atom });
            }
            PdeSystem::new(ctx.clone(), eqs).map_err(at(first))?
        } else if pdes.iter().all(|(_, _, l)| l.is_none()) {
            PdeSystem::with_ranked_leading(ctx.clone(), pdes.into_iter().map(|(_, e, _)| e).collect()).map_err(at(first))?
        } else {
            return Err(at(first)("either every `pde` line names its `lead=` derivative or none does"));
        };
        for (line, c) in combos {
            parse_combination(&c, &generators, &ctx).map_err(at(line))?;
        }
        let (_, conserved) = conserved.expect("checked above");
        Ok(Problem {
            name: name.to_string(),
            context: ctx,
            system: Arc::new(system),
            conserved,
            generators,
            strategy: strat.map(|(_, s)| s),
            stages,
        })
    }

    pub fn conserved_vector(&self) -> dred_core::Result<ConservedVector> {
        ConservedVector::new_unchecked(self.conserved.clone(), self.system.clone())
    }

    pub fn generator(&self, name: &str) -> Result<&Generator, String> {
        self.generators.iter().find(|g| g.name() == name).ok_or_else(|| {
            let known: Vec<&str> = self.generators.iter().map(|g| g.name()).collect();
            format!("unknown generator `{name}` (declared: {})", known.join(", "))
        })
    }
}

/// Splits `D(u,t,t): rest` at the first colon outside parentheses.
fn split_colon(text: &str) -> Option<(&str, &str)> {
    let parts = split_top(text, ':');
    if parts.len() < 2 {
        return None;
    }
    let head = parts[0];
    Some((head, &text[head.len() + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_keep_calls_together() {
        assert_eq!(words("f(u) g(u, v)  h"), ["f(u)", "g(u, v)", "h"]);
        assert_eq!(call("g(u, v)").unwrap(), ("g", Some(vec!["u".into(), "v".into()])));
    }

    #[test]
    fn stage_settings() {
        let mut plan = StagePlan::default();
        stage_plan("gen = X4; names = n:s m:r v:w; pivot = s; sym Y: xi_r = r", &mut plan).unwrap();
        assert_eq!(plan.selection, Some(SelectionStrategy::Combination("X4".into())));
        assert_eq!(plan.names[0], ("n".to_string(), "s".to_string()));
        assert_eq!(plan.pivot.as_deref(), Some("s"));
        assert_eq!(plan.inject, [("Y".to_string(), "xi_r = r".to_string())]);
        assert!(stage_plan("colour = red", &mut plan).is_err());
    }

    #[test]
    fn change_settings() {
        let spec = change_spec("r = y - c2*t, q = t; canonical = q; inverse: t = q, y = r + c2*q").unwrap();
        assert_eq!(spec.definitions.len(), 2);
        assert_eq!(spec.canonical.as_deref(), Some("q"));
        assert_eq!(spec.inverse.unwrap()[1], ("y".to_string(), "r + c2*q".to_string()));
    }
}
