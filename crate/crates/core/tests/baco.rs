use baco_core::baco::*;
use baco_core::mdo::{BudgetLedger, Dims, FnProblem, MdoProblem, ProblemBounds};
use baco_core::scalable::{make_problem, ScalableProblem, ScalableSpec};
use baco_core::trace::ACCEPT_TOL;

fn scalable() -> ScalableProblem {
    make_problem(&ScalableSpec::default()).unwrap()
}

fn small(seed: u64, budget: usize) -> BacoConfig {
    BacoConfig {
        seed,
        total_budget: budget,
        ..BacoConfig::default()
    }
}

#[test]
fn evaluation_accounting_is_exact() {
    let p = scalable();
    for (seed, budget) in [(0, 60), (1, 61), (2, 47)] {
        let r = solve_baco_detailed(&p, &small(seed, budget)).unwrap();
        let k = r.iterations.len();
        assert_eq!(r.run.iterations, k);
        // DoE: 2 disciplines x (6 system rows + 3 subsystem rows)
        assert_eq!(r.run.setup_evals, 18);
        assert_eq!(r.run.evals_used, 18 + 2 * k * 2, "seed {seed}");
        // stops only when another iteration would not fit
        assert!(budget - r.run.evals_used < 4);
        for (j, info) in r.iterations.iter().enumerate() {
            assert_eq!(info.evals, 18 + 4 * (j + 1));
            assert_eq!(info.fallbacks, 0);
        }
    }
}

#[test]
fn datasets_grow_in_lockstep_and_gps_see_the_pooled_rows() {
    let p = scalable();
    let r = solve_baco_detailed(&p, &small(3, 70)).unwrap();
    let k = r.iterations.len();
    assert!(k >= 10);
    assert_eq!(r.doe_sizes, vec![(3, 6), (3, 6)]);
    for (i, d) in r.state.disciplines.iter().enumerate() {
        let (lower0, upper0) = r.doe_sizes[i];
        assert_eq!(d.discrepancy.lower.len() - lower0, k);
        assert_eq!(d.discrepancy.upper.len() - upper0, k);
        // system DoE rows, subsystem DoE rows, then one row per iteration
        assert_eq!(d.local.len(), 6 + 3 + k);
        for (step, info) in r.iterations.iter().enumerate() {
            assert_eq!(info.subsystem_pooled[i], lower0 + upper0 + 2 * step);
            // system level: stale upper plus the fresh lower row
            assert_eq!(info.system_pooled[i], info.subsystem_pooled[i] + 1);
        }
        let (x, y) = d.discrepancy.pooled();
        assert_eq!(
            (x.len(), y.len()),
            (d.discrepancy.pooled_len(), d.discrepancy.pooled_len())
        );
        assert!(x.iter().all(|row| row.len() == 6));
    }
    assert_eq!(r.state.system.len(), 6 + k);
    assert_eq!(r.state.system_htot.len(), 6 + k);
}

#[test]
fn deterministic_and_seed_sensitive() {
    let p = scalable();
    let a = solve_baco(&p, &small(4, 40)).unwrap();
    let b = solve_baco(&p, &small(4, 40)).unwrap();
    let c = solve_baco(&p, &small(5, 40)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.best.point, b.best.point);
    assert_ne!(a.trace, c.trace);
}

#[test]
fn trace_respects_hierarchy_and_budget() {
    let p = scalable();
    let r = solve_baco(&p, &small(6, 60)).unwrap();
    assert!(r.trace.hierarchy_violations(ACCEPT_TOL).is_empty());
    assert!(r.trace.last().unwrap().eval <= 60);
    assert_eq!(r.trace.first().unwrap().eval, r.setup_evals);
    assert_eq!(r.best.record(), *r.trace.last().unwrap());
}

#[test]
fn doe_size_scales_with_multiplier() {
    let p = scalable();
    let mut first = Vec::new();
    for m in 1..=5 {
        let cfg = BacoConfig {
            doe_multiplier: m,
            ..small(7, 80)
        };
        let ledger = BudgetLedger::new(80, 2);
        let s = init_datasets(&p, &cfg, &ledger).unwrap();
        assert_eq!(s.system.len(), 5 * m + 1);
        for d in &s.disciplines {
            assert_eq!(d.discrepancy.upper.len(), 5 * m + 1);
            assert_eq!(d.discrepancy.lower.len(), 2 * m + 1);
        }
        assert_eq!(s.doe_evals, 2 * (5 * m + 1) + 2 * (2 * m + 1));
        assert_eq!(ledger.count(), s.doe_evals);
        first.push(s.doe_evals);
    }
    assert!(first.windows(2).all(|w| w[0] < w[1]));
    assert!(init_datasets(
        &p,
        &BacoConfig {
            doe_multiplier: 5,
            ..small(0, 40)
        },
        &BudgetLedger::new(40, 2)
    )
    .is_err());
    assert!(solve_baco(
        &p,
        &BacoConfig {
            doe_multiplier: 0,
            ..small(0, 300)
        }
    )
    .is_err());
}

#[test]
fn single_steps_cost_what_they_should() {
    let p = scalable();
    let cfg = small(8, 100);
    let ledger = BudgetLedger::new(100, 2);
    let mut state = init_datasets(&p, &cfg, &ledger).unwrap();
    let before = ledger.count();
    let lower = state.disciplines[1].discrepancy.lower.len();
    let local = state.disciplines[1].local.len();
    let point = state.point.clone();
    let s = subsystem_step(&p, &cfg, &ledger, &point, 1, &mut state.disciplines[1], 0).unwrap();
    assert_eq!(ledger.count(), before + 1);
    assert_eq!(ledger.per_discipline()[1], state.doe_evals / 2 + 1);
    assert_eq!(state.disciplines[1].discrepancy.lower.len(), lower + 1);
    assert_eq!(state.disciplines[1].local.len(), local + 1);
    let bounds = p.bounds().subsystem(1);
    for (v, (lo, hi)) in s.z.iter().chain(&s.x).zip(bounds) {
        assert!(lo <= *v && *v <= hi);
    }
    // the recorded J matches the discipline output at the proposal
    let mut cand = point.clone();
    cand.z_sub[1] = s.z.clone();
    cand.x_sub[1] = s.x.clone();
    let want = discrepancy_row(&cand, 1);
    assert_eq!(
        state.disciplines[1]
            .discrepancy
            .lower
            .inputs
            .last()
            .unwrap(),
        &want
    );
    assert_eq!(
        state.disciplines[1]
            .discrepancy
            .lower
            .outputs
            .last()
            .unwrap()[0],
        s.j
    );

    state.point.z_sub[1] = s.z;
    state.point.x_sub[1] = s.x;
    let sys_rows = state.system.len();
    let before = ledger.count();
    let out = system_step(&p, &cfg, &ledger, &mut state, 0).unwrap();
    assert_eq!(ledger.count(), before + 2);
    assert_eq!(state.system.len(), sys_rows + 1);
    assert_eq!(state.point, out.point);
    for d in &state.disciplines {
        assert_eq!(d.discrepancy.upper.inputs.len(), 6 + 1);
    }
}

/// One discipline, `y = z + x`, no local constraints.
fn sum_problem() -> FnProblem {
    let dims = Dims {
        z: 1,
        x: vec![1],
        y: vec![1],
    };
    let bounds = ProblemBounds::uniform(&dims, (-3.0, 3.0), (-3.0, 3.0), (-6.0, 6.0));
    FnProblem {
        dims,
        bounds,
        objective: Box::new(|z, x, y| {
            z[0] * z[0] + x.as_slice()[0].powi(2) + y.as_slice()[0].powi(2)
        }),
        system_constraints: None,
        analysis: Box::new(|_, _, z, x| vec![z[0] + x[0]]),
        local_constraints: Box::new(|_, _, _, _, _| Vec::new()),
        n_local: vec![0],
    }
}

#[test]
fn repeated_subsystem_steps_drive_j_to_its_zero() {
    // targets (z, x, y) = (1, 1, 2): J = (1 - z)^2 + (1 - x)^2 + (2 - z - x)^2,
    // whose unique zero (1, 1) lies inside the bounds
    let p = sum_problem();
    let cfg = small(9, 200);
    let ledger = BudgetLedger::new(200, 1);
    let mut state = init_datasets(&p, &cfg, &ledger).unwrap();
    let mut point = state.point.clone();
    point.z_sys = vec![1.0];
    point.x_sys = baco_core::mdo::Vov::from_blocks(&[vec![1.0]]);
    point.y_sys = baco_core::mdo::Vov::from_blocks(&[vec![2.0]]);
    point.z_sub[0] = vec![-2.5];
    point.x_sub[0] = vec![2.5];
    let mut best = f64::INFINITY;
    let mut bests = Vec::new();
    for k in 0..25 {
        let s = subsystem_step(&p, &cfg, &ledger, &point, 0, &mut state.disciplines[0], k).unwrap();
        best = best.min(s.j);
        bests.push(best);
    }
    assert!(bests.windows(2).all(|w| w[1] <= w[0]));
    assert!(
        best < 1e-2,
        "best J after 25 steps: {best}; history {bests:?}"
    );
}
