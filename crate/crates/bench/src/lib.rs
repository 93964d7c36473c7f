//! Fixtures shared by the criterion benchmarks.

use baco_core::baco::{init_datasets, BacoConfig, BacoState};
use baco_core::mdo::BudgetLedger;
use baco_core::rng::stream;
use baco_core::sampling::lhs_sample_with;
use baco_core::scalable::{make_problem, ScalableProblem, ScalableSpec};

/// `n` LHS points in `[-1, 1]^d` and a smooth response on them.
pub fn gp_dataset(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x =
        lhs_sample_with(n, &vec![(-1.0, 1.0); d], &mut stream(seed, &[])).expect("valid bounds");
    let y = x
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(k, v)| (v * (k + 1) as f64).sin() + v * v)
                .sum()
        })
        .collect();
    (x, y)
}

/// The seed-42 scalable problem right after BACO's initial DoE.
pub fn baco_after_doe(seed: u64) -> (ScalableProblem, BacoConfig, BudgetLedger, BacoState) {
    let problem = make_problem(&ScalableSpec::default()).expect("default spec");
    let config = BacoConfig {
        seed,
        ..BacoConfig::default()
    };
    let ledger = BudgetLedger::new(config.total_budget, 2);
    let state = init_datasets(&problem, &config, &ledger).expect("DoE fits the budget");
    (problem, config, ledger, state)
}
