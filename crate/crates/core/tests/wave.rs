//! End-to-end double reduction of the nonlinear (2+1) wave equation
//! `u_tt = (f(u) u_x)_x + (g(u) u_y)_y`, checked against the published
//! closed forms.

use std::sync::Arc;

use dred_core::conservation::Equation;
use dred_core::coordinates::parse_name_pairs;
use dred_core::expr::total_derivative;
use dred_core::oracle::verify_zero;
use dred_core::pipeline::{run_pipeline, ReductionTrace};
use dred_core::{
    ConservedVector, Expr, Generator, PdeSystem, PipelineOptions, SelectionStrategy, StagePlan, VariableContext,
    ZeroTest,
};

fn ctx() -> VariableContext {
    VariableContext::build(&["t", "x", "y"], &["u"], &["c1", "c2"], &["f", "g"]).unwrap()
}

fn wave_t() -> ConservedVector {
    let c = ctx();
    let p = |s: &str| Expr::parse(s, &c).unwrap();
    let lhs = p("D(u,t,t) - D(f(u)*D(u,x), x) - D(g(u)*D(u,y), y)");
    let leading = p("D(u,t,t)").deriv_atoms().into_iter().next().unwrap();
    let sys = Arc::new(PdeSystem::new(c.clone(), vec![Equation { lhs, leading }]).unwrap());
    let comps = ["-D(u,t)", "f(u)*D(u,x)", "g(u)*D(u,y)"].iter().map(|s| p(s)).collect();
    ConservedVector::new(comps, sys, &ZeroTest::default()).unwrap()
}

fn gens() -> Vec<Generator> {
    let c = ctx();
    [("X1", "xi_t=1"), ("X2", "xi_x=1"), ("X3", "xi_y=1"), ("X4", "xi_t=t, xi_x=x, xi_y=y")]
        .iter()
        .map(|(n, s)| Generator::parse(n, s, &c).unwrap())
        .collect()
}

fn trace() -> ReductionTrace {
    let mut opts = PipelineOptions::default();
    let stage = |combo: &str, names: &str| StagePlan {
        selection: Some(SelectionStrategy::Combination(combo.into())),
        names: parse_name_pairs(names).unwrap(),
        ..Default::default()
    };
    opts.stages.insert(1, stage("X1 + c1*X2 + c2*X3", "r:y s:x q:t w:u"));
    opts.stages.insert(2, stage("X4", "n:s m:r v:w"));
    run_pipeline(&wave_t(), &gens(), &opts).unwrap()
}

fn assert_same(actual: &Expr, expected: &str, ctx: &VariableContext) {
    let e = Expr::parse(expected, ctx).unwrap();
    assert!((actual - &e).normalizes_to_zero().unwrap(), "got {actual}, expected {expected}");
}

#[test]
fn reduces_to_a_first_order_first_integral() {
    let trace = trace();
    assert!(trace.initial.holds && !trace.initial.trivial);
    assert!(trace.is_complete());
    assert_eq!(trace.steps.len(), 2);

    let s1 = &trace.steps[0];
    let c1 = s1.change.new_context();
    let names: Vec<&str> = c1.independents().iter().map(|v| &**v).collect();
    assert_eq!(names, ["r", "s", "q"]);
    assert_same(s1.change.jacobian_new(), "-1", c1);
    for (new, expected) in [("r", "y - c2*t"), ("s", "x - c1*t"), ("q", "t")] {
        let def = &s1.change.forward().iter().find(|(n, _)| &**n == new).unwrap().1;
        assert_same(def, expected, &ctx());
    }
    let expected = [
        "c2^2*D(w,r) + c2*c1*D(w,s) - g(w)*D(w,r)",
        "c1*c2*D(w,r) + c1^2*D(w,s) - f(w)*D(w,s)",
        "-c2*D(w,r) - c1*D(w,s)",
    ];
    for (t, e) in s1.transformed.iter().zip(expected) {
        assert_same(t, e, c1);
    }
    assert_eq!(&*s1.dropped.0, "q");
    assert!(s1.dropped_is_divergence_free && s1.transformed_bracket_vanishes && s1.divergence.holds);

    let x4 = s1.inherited.iter().find(|g| g.full.name() == "X4").unwrap();
    let y = x4.projected().expect("X4 is inherited");
    let rc = s1.change.reduced_context();
    assert_same(y.xi_for("r").unwrap(), "r", &rc);
    assert_same(y.xi_for("s").unwrap(), "s", &rc);
    assert!(y.eta_for("w").unwrap().is_zero());

    let s2 = &trace.steps[1];
    let c2 = s2.change.new_context();
    assert_same(s2.generator.xi_for("r").unwrap(), "r", &rc);
    let fwd = |n: &str| s2.change.forward().iter().find(|(v, _)| &**v == n).unwrap().1.clone();
    assert_same(&fwd("n"), "s/r", &rc);
    assert_same(&fwd("m"), "ln(r)", &rc);
    let tn = "D(v,n)*(-c2^2*n^2 + 2*c2*c1*n + n^2*g(v) - c1^2 + f(v))";
    assert_same(&s2.transformed[0], tn, c2);
    assert_same(&s2.transformed[1], "-D(v,n)*(-c2^2*n + c2*c1 + n*g(v))", c2);
    assert!(s2.dropped_is_divergence_free && s2.transformed_bracket_vanishes && s2.divergence.holds);

    let fi = trace.first_integral().unwrap();
    assert_eq!(&*fi.var, "n");
    assert_same(&fi.lhs, tn, fi.system.ctx());
    assert_eq!((trace.original_order, fi.order), (2, 1));

    let back = |n: &str| trace.back_substitution.iter().find(|(v, _)| &**v == n).unwrap().1.clone();
    assert_same(&back("n"), "(x - c1*t)/(y - c2*t)", &ctx());
    assert_same(&back("v"), "u", &ctx());
}

/// `u = V(N)` with `V' = C/K(V, N)` solves the original equation: the first
/// integral carries the full content of the PDE for invariant solutions.
#[test]
fn transported_solution_satisfies_the_equation() {
    let c = VariableContext::build(&["t", "x", "y"], &["u"], &["c1", "c2", "C", "v"], &["f", "g"]).unwrap();
    let p = |s: &str| Expr::parse(s, &c).unwrap();
    let d = |e: &Expr, v: &str| total_derivative(e, v, &c).unwrap();
    let n = p("(x - c1*t)/(y - c2*t)");
    let k_of = |n: &Expr| {
        let n2 = n * n;
        &(&(&p("-c2^2") * &n2) + &(&p("2*c1*c2") * n)) + &(&(&n2 * &p("g(v)")) + &p("f(v) - c1^2"))
    };
    let k = k_of(&n);
    let k_v = &(&(&n * &n) * &p("g'(v)")) + &p("f'(v)");
    let k_n = &(&(&p("-2*c2^2") * &n) + &p("2*c1*c2")) + &(&p("2*g(v)") * &n);
    let v1 = &p("C") * &k.clone().recip();
    let v2 = -(&(&p("C") * &(&(&k_v * &v1) + &k_n)) * &(&k * &k).recip());

    let (nt, nx, ny) = (d(&n, "t"), d(&n, "x"), d(&n, "y"));
    let (ntt, nxx, nyy) = (d(&nt, "t"), d(&nx, "x"), d(&ny, "y"));
    let utt = &(&v2 * &(&nt * &nt)) + &(&v1 * &ntt);
    let fux_x = &(&p("f'(v)") * &(&(&v1 * &v1) * &(&nx * &nx))) + &(&p("f(v)") * &(&(&v2 * &(&nx * &nx)) + &(&v1 * &nxx)));
    let guy_y = &(&p("g'(v)") * &(&(&v1 * &v1) * &(&ny * &ny))) + &(&p("g(v)") * &(&(&v2 * &(&ny * &ny)) + &(&v1 * &nyy)));
    let residual = &(&utt - &fux_x) - &guy_y;

    assert!(residual.normalizes_to_zero().unwrap());
    let verdict = verify_zero(&residual, &c, 100, 0x5EED);
    assert!(verdict.pass, "max residual {}", verdict.max_abs_residual);
}
