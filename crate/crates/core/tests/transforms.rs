//! Conserved-vector transport under random affine changes of variables.

use dred_core::oracle::verify_zero;
use dred_core::{CoordinateChange, Expr, VariableContext, ZeroTest};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

const OLD: [&str; 3] = ["t", "x", "y"];
const NEW: [&str; 3] = ["p1", "p2", "p3"];

#[derive(Clone, Debug)]
struct Case {
    dim: usize,
    matrix: Vec<i64>,
    offsets: Vec<i64>,
    scale: i64,
    shift: Vec<i64>,
    components: Vec<Vec<(i64, usize, usize)>>,
}

fn det(m: &[i64], n: usize) -> i64 {
    match n {
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
    }
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..=3)
        .prop_flat_map(|dim| {
            let basis = 2 * dim + 2;
            (
                Just(dim),
                proptest::collection::vec(-2i64..=2, dim * dim).prop_filter("singular", move |m| det(m, dim) != 0),
                proptest::collection::vec(-2i64..=2, dim),
                prop_oneof![Just(-2i64), Just(-1), Just(1), Just(3)],
                proptest::collection::vec(-1i64..=1, dim),
                proptest::collection::vec(
                    proptest::collection::vec((-3i64..=3, 0..basis, 0..basis), 1..5),
                    dim,
                ),
            )
        })
        .prop_map(|(dim, matrix, offsets, scale, shift, components)| Case {
            dim,
            matrix,
            offsets,
            scale,
            shift,
            components,
        })
}

impl Case {
    fn ctx(&self) -> VariableContext {
        VariableContext::build(&OLD[..self.dim], &["u"], &[], &[]).unwrap()
    }

    /// `1, u, x_i, u_{x_i}`: a monomial is a product of two basis entries.
    fn basis(&self) -> Vec<String> {
        let mut b = vec!["1".to_string(), "u".to_string()];
        b.extend(OLD[..self.dim].iter().map(|v| v.to_string()));
        b.extend(OLD[..self.dim].iter().map(|v| format!("D(u,{v})")));
        b
    }

    fn components(&self) -> Vec<Expr> {
        let ctx = self.ctx();
        let basis = self.basis();
        self.components
            .iter()
            .map(|terms| {
                let text: Vec<String> =
                    terms.iter().map(|(c, i, j)| format!("({c})*{}*{}", basis[*i], basis[*j])).collect();
                Expr::parse(&text.join(" + "), &ctx).unwrap()
            })
            .collect()
    }

    fn change(&self) -> CoordinateChange {
        let ctx = self.ctx();
        let n = self.dim;
        let mut defs = Vec::new();
        for (i, name) in NEW.iter().enumerate().take(n) {
            let row: Vec<String> = (0..n).map(|j| format!("({})*{}", self.matrix[i * n + j], OLD[j])).collect();
            defs.push((name.to_string(), format!("{} + ({})", row.join(" + "), self.offsets[i])));
        }
        let shift: Vec<String> = (0..n).map(|j| format!("({})*{}", self.shift[j], OLD[j])).collect();
        defs.push(("w".to_string(), format!("({})*u + {}", self.scale, shift.join(" + "))));
        let defs: Vec<(String, Expr)> = defs.into_iter().map(|(k, v)| (k, Expr::parse(&v, &ctx).unwrap())).collect();
        CoordinateChange::from_definitions(&ctx, &defs, None, None, &ZeroTest::default()).unwrap()
    }
}

fn config() -> Config {
    Config { cases: 20, rng_seed: RngSeed::Fixed(0xAFF1E), failure_persistence: None, ..Config::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn row_replacement_matches_matrix_form(c in case()) {
        let ch = c.change();
        let t = c.components();
        let matrix = ch.transform_components(&t).unwrap();
        let rowrep = ch.transform_components_rowrep(&t).unwrap();
        for (a, b) in matrix.iter().zip(&rowrep) {
            let diff = a - b;
            prop_assert!(diff.normalizes_to_zero().unwrap());
            prop_assert!(verify_zero(&diff, ch.new_context(), 20, 7).pass);
        }
    }

    #[test]
    fn divergence_is_transported(c in case()) {
        let ch = c.change();
        let t = c.components();
        let tt = ch.transform_components(&t).unwrap();
        let residual = ch.transport_divergence(&t).unwrap() - ch.new_divergence(&tt).unwrap();
        prop_assert!(residual.normalizes_to_zero().unwrap());
        let v = verify_zero(&residual, ch.new_context(), 100, 11);
        prop_assert!(v.pass, "max residual {}", v.max_abs_residual);
    }

    #[test]
    fn chain_rule_matrix_identity(c in case()) {
        let ch = c.change();
        let (old, new) = (ch.old_context(), ch.new_context());
        for h in c.components() {
            let hn = ch.to_new(&h).unwrap();
            for (i, nv) in new.independents().iter().enumerate() {
                let lhs = hn.total_derivative(nv, new).unwrap();
                let rhs = Expr::add(
                    old.independents()
                        .iter()
                        .enumerate()
                        .map(|(k, ov)| ch.a_new().get(i, k) * &ch.to_new(&h.total_derivative(ov, old).unwrap()).unwrap())
                        .collect(),
                );
                let v = verify_zero(&(&lhs - &rhs), new, 20, 13);
                prop_assert!(v.pass, "max residual {}", v.max_abs_residual);
            }
        }
    }
}
