use baco_core::co_variants::*;
use baco_core::mdo::{
    assess, BudgetLedger, DesignPoint, Dims, FnProblem, MdoProblem, ProblemBounds, Vov,
};
use baco_core::scalable::{make_problem, ScalableSpec};
use baco_core::trace::ACCEPT_TOL;

const VARIANTS: [CoVariant; 3] = [CoVariant::Co, CoVariant::Mco, CoVariant::Ico];

/// Two disciplines that copy their local variable: `y_i = x_i`.
fn identity_problem() -> FnProblem {
    let dims = Dims {
        z: 1,
        x: vec![1, 1],
        y: vec![1, 1],
    };
    let bounds = ProblemBounds::uniform(&dims, (-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0));
    FnProblem {
        dims,
        bounds,
        objective: Box::new(|z, x, y| {
            z[0] * z[0]
                + x.as_slice()
                    .iter()
                    .chain(y.as_slice())
                    .map(|v| v * v)
                    .sum::<f64>()
        }),
        system_constraints: None,
        analysis: Box::new(|_, _, _, x| x.to_vec()),
        local_constraints: Box::new(|_, _, _, _, _| Vec::new()),
        n_local: vec![0, 0],
    }
}

#[test]
fn budget_split_examples() {
    assert_eq!(budget_split(300, 2, 0.5, 0.05).unwrap(), (150, 75, 15));
    assert_eq!(budget_split(300, 3, 0.5, 0.05).unwrap(), (150, 50, 15));
    assert_eq!(budget_split(10, 2, 0.5, 0.05).unwrap(), (5, 2, 1));
    assert!(budget_split(300, 0, 0.5, 0.05).is_err());
    assert!(budget_split(2, 2, 0.5, 0.05).is_err());
}

#[test]
fn start_at_fixed_point_stops_after_one_iteration() {
    let p = identity_problem();
    let start = DesignPoint::from_system(
        vec![0.0],
        Vov::from_blocks(&[vec![0.0], vec![0.0]]),
        Vov::from_blocks(&[vec![0.0], vec![0.0]]),
    );
    for v in VARIANTS {
        let r = solve_bilevel(&p, &BilevelConfig::default(), &start, v).unwrap();
        assert_eq!(r.run.iterations, 1, "{v:?}");
        assert!(r.run.best.jtot < 1e-12 && r.run.best.htot == 0.0);
        assert_eq!(r.usage[0].system, 0);
    }
}

#[test]
fn scalable_runs_respect_budget_and_caps() {
    let p = make_problem(&ScalableSpec::default()).unwrap();
    for v in VARIANTS {
        for seed in 0..3 {
            let cfg = BilevelConfig {
                seed,
                ..BilevelConfig::default()
            };
            let start = random_start(&p, seed).unwrap();
            let r = solve_bilevel(&p, &cfg, &start, v).unwrap();
            assert!(r.run.evals_used <= 300);
            assert_eq!(r.per_iteration_cap, 15);
            let spent: usize = r.usage.iter().map(|u| u.subsystem_level() + u.system).sum();
            assert_eq!(spent, r.run.evals_used, "{v:?} seed {seed}");
            for u in &r.usage {
                assert!(u.subsystem_level() <= 15 && u.system <= 15, "{v:?}: {u:?}");
            }
            assert!(r.run.trace.last().unwrap().eval <= r.run.evals_used);
            assert!(r.run.trace.hierarchy_violations(ACCEPT_TOL).is_empty());

            // the reported best reproduces its metrics on re-evaluation
            let ledger = BudgetLedger::new(2, 2);
            let a = assess(&p, &ledger, &r.run.best.point).unwrap();
            let m = r.run.best.metrics();
            assert!((a.metrics.f - m.f).abs() <= 1e-9 * (1.0 + m.f.abs()));
            assert!((a.metrics.jtot - m.jtot).abs() <= 1e-9 * (1.0 + m.jtot));
            assert!((a.metrics.htot - m.htot).abs() <= 1e-9 * (1.0 + m.htot));
        }
    }
}

#[test]
fn ico_gamma_grows_geometrically() {
    let p = make_problem(&ScalableSpec::default()).unwrap();
    let start = random_start(&p, 5).unwrap();
    let r = solve_bilevel(
        &p,
        &BilevelConfig {
            seed: 5,
            ..Default::default()
        },
        &start,
        CoVariant::Ico,
    )
    .unwrap();
    assert!(r.gammas.len() >= 3);
    for (k, g) in r.gammas.iter().enumerate() {
        assert!((g - 1.1f64.powi(k as i32)).abs() < 1e-12);
    }
    assert!(
        solve_bilevel(&p, &BilevelConfig::default(), &start, CoVariant::Co)
            .unwrap()
            .gammas
            .is_empty()
    );
    assert!((ico_penalty(&[0.5, 0.2], 1.0, 0.0) - 0.7).abs() < 1e-15);
    assert_eq!(ico_penalty(&[0.0, 0.0], 3.0, 0.0), 0.0);
}

#[test]
fn mco_system_z_is_the_copy_mean() {
    assert_eq!(mean_copies(&[vec![1.0], vec![3.0]]).unwrap(), vec![2.0]);
    assert_eq!(mean_copies(&[vec![-0.25]]).unwrap(), vec![-0.25]);
    let p = make_problem(&ScalableSpec::default()).unwrap();
    for seed in 0..3 {
        let start = random_start(&p, seed).unwrap();
        let r = solve_mco(
            &p,
            &BilevelConfig {
                seed,
                ..Default::default()
            },
            &start,
        )
        .unwrap();
        let b = &r.best.point;
        assert_eq!(b.z_sys, mean_copies(&b.z_sub).unwrap());
    }
}

#[test]
fn deterministic_for_fixed_seed() {
    let p = make_problem(&ScalableSpec::default()).unwrap();
    for v in VARIANTS {
        let start = random_start(&p, 9).unwrap();
        let cfg = BilevelConfig {
            seed: 9,
            ..Default::default()
        };
        let a = solve_bilevel(&p, &cfg, &start, v).unwrap();
        let b = solve_bilevel(&p, &cfg, &start, v).unwrap();
        assert_eq!(a.run.trace, b.run.trace);
        assert_eq!(a.run.best.point, b.run.best.point);
    }
}

#[test]
fn start_outside_bounds_rejected() {
    let p = make_problem(&ScalableSpec::default()).unwrap();
    let mut start = random_start(&p, 0).unwrap();
    start.z_sys[0] = 50.0;
    assert!(solve_co(&p, &BilevelConfig::default(), &start).is_err());
    assert!(p.bounds().check().is_ok());
}
