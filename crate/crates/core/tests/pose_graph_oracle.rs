mod common;

use common::*;
use ground_slam::slam::LmConfig;

#[test]
fn final_costs_match_generic_minimizer() {
    for case in graph_cases() {
        let mut graph = case.build();
        let summary = graph.optimize(&LmConfig::default()).unwrap();
        let rel = (summary.final_cost - case.oracle_cost).abs() / case.oracle_cost;
        assert!(
            rel < 1e-6,
            "{}: {} vs {} (rel {rel:e})",
            case.name,
            summary.final_cost,
            case.oracle_cost
        );
        assert!(summary.final_cost <= summary.initial_cost);
        assert!((graph.cost() - summary.final_cost).abs() <= 1e-12 * summary.final_cost.max(1.0));
    }
}

#[test]
fn reoptimizing_is_a_fixed_point() {
    for case in graph_cases() {
        let mut graph = case.build();
        graph.optimize(&LmConfig::default()).unwrap();
        let before = graph.poses().to_vec();
        let again = graph.optimize(&LmConfig::default()).unwrap();
        assert!(again.final_cost <= again.initial_cost);
        assert!((again.initial_cost - again.final_cost) <= 1e-8 * again.initial_cost, "{}", case.name);
        for (a, b) in before.iter().zip(graph.poses()) {
            assert!(a.between(b).log().norm() < 1e-3, "{}", case.name);
        }
    }
}
