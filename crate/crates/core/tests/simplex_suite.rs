//! Twenty reference linear programs plus randomized boxes, each checked
//! against a brute-force vertex enumeration.

mod common;

use budgetmech::oracle::{solve_lp, LinearProgram, LpStatus, Sense};
use common::{check_lp_case, lp_cases, vertex_optimum, TOL};
use proptest::prelude::*;

#[test]
fn reference_programs() {
    let cases = lp_cases();
    assert!(cases.len() >= 20);
    for (name, lp, expect, pointed) in &cases {
        check_lp_case(name, lp, expect, *pointed).unwrap();
    }
}
proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_boxed_programs_match_enumeration(
        c in prop::collection::vec(-3i32..=3, 3),
        rows in prop::collection::vec((prop::collection::vec(-3i32..=3, 3), 0usize..3, -4i32..=6), 1..5),
        maximize in any::<bool>(),
    ) {
        let c: Vec<f64> = c.iter().map(|&v| v as f64).collect();
        let mut lp = if maximize { LinearProgram::maximize(c) } else { LinearProgram::minimize(c) }.unwrap();
        for j in 0..3 {
            lp.set_bounds(j, 0.0, 4.0).unwrap();
        }
        for (a, s, b) in rows {
            let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            lp.add_dense(&a, [Sense::Le, Sense::Ge, Sense::Eq][s], b as f64).unwrap();
        }
        let sol = solve_lp(&lp).unwrap();
        match vertex_optimum(&lp) {
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.value - v).abs() <= TOL, "{} vs {}", sol.value, v);
                prop_assert!(sol.max_residual <= TOL);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Many more rows than variables, all `≤`: the shape solved through the dual.
    #[test]
    fn tall_programs_match_enumeration(
        c in prop::collection::vec(-2i32..=4, 2),
        rows in prop::collection::vec((prop::collection::vec(-3i32..=3, 2), -2i32..=8), 6..12),
    ) {
        let mut lp = LinearProgram::maximize(c.iter().map(|&v| v as f64).collect()).unwrap();
        lp.add_dense(&[1.0, 1.0], Sense::Le, 10.0).unwrap();
        for (a, b) in rows {
            let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            lp.add_dense(&a, Sense::Le, b as f64).unwrap();
        }
        let sol = solve_lp(&lp).unwrap();
        match vertex_optimum(&lp) {
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.value - v).abs() <= TOL, "{} vs {}", sol.value, v);
                prop_assert!(sol.max_residual <= TOL);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}
