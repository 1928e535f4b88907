mod common;

use scn_cache_core::{design_contracts, verify_price_monotonicity, Solver};
use scn_cache_sim::experiments::{run_baseline_comparison, run_misreport_sweep, run_verify};
use scn_cache_sim::{build_scenario, choose_solver, SolverChoice};

#[test]
fn corpus_is_exactly_solvable_and_not_degenerate() {
    let corpus = common::corpus();
    let mut positive = 0;
    for loaded in &corpus {
        assert_eq!(
            choose_solver(&loaded.scenario, SolverChoice::Auto, None),
            Solver::Exact
        );
        assert!(loaded.scenario.grid.len() <= 6);
        let design =
            design_contracts(&loaded.scenario, loaded.true_types(), Solver::Exact).unwrap();
        positive += design.report.prices.iter().filter(|&&p| p > 0.0).count();
    }
    assert!(positive >= corpus.len());
}

#[test]
fn corpus_verify_passes() {
    for seed in [1, 4, 7] {
        let loaded = build_scenario(&common::small_config(seed)).unwrap();
        let report = run_verify(&loaded, Solver::Exact).unwrap();
        assert!(report.passed(), "seed {seed}: {:?}", report.rows);
    }
}

#[test]
fn higher_type_can_pay_less_between_symmetric_cps() {
    let loaded = build_scenario(&common::symmetric_config(2)).unwrap();
    let design = design_contracts(&loaded.scenario, loaded.true_types(), Solver::Exact).unwrap();
    assert_eq!(design.declared_types, vec![100.0, 0.0, 50.0]);
    assert_eq!(design.allocation.levels, vec![3, 0, 2]);
    let p = &design.report.prices;
    assert!(p[0] < p[2], "{p:?}");
    assert!(!verify_price_monotonicity(&loaded.scenario, &design).unwrap());
    let w = &design.allocation.welfare;
    let terms: Vec<f64> = (0..3)
        .map(|k| design.report.rates[k] - design.report.costs[k])
        .collect();
    assert!((p[0] - (design.without[0].welfare - terms[1] - terms[2])).abs() <= 1e-9 * w.abs());
    assert!((p[2] - (design.without[2].welfare - terms[0] - terms[1])).abs() <= 1e-9 * w.abs());
}

#[test]
fn truthful_sweep_rows_match_design() {
    let loaded = build_scenario(&common::small_config(3)).unwrap();
    let design = design_contracts(&loaded.scenario, loaded.true_types(), Solver::Exact).unwrap();
    let rows = run_misreport_sweep(&loaded, Solver::Exact).unwrap();
    for r in rows.iter().map(|r| &r.0).filter(|r| r.truthful) {
        assert!(r.participates);
        assert_eq!(r.price, design.report.prices[r.cp]);
        assert_eq!(r.utility, design.report.utilities[r.cp]);
    }
}

#[test]
fn baseline_gap_is_common_to_all_cps() {
    let loaded = build_scenario(&common::small_config(5)).unwrap();
    let rows = run_baseline_comparison(&loaded, Solver::Exact).unwrap();
    let gaps: Vec<f64> = rows
        .iter()
        .map(|r| r.utility_mechanism - r.utility_equal_split)
        .collect();
    for g in &gaps {
        assert!(*g >= 0.0);
        assert!(
            (g - gaps[0]).abs() <= 1e-9 * gaps[0].abs().max(1.0),
            "{gaps:?}"
        );
    }
}
