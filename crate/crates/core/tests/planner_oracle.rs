mod support;

use procmon_core::fixtures::*;
use procmon_core::pddl::{ground, parse_domain, parse_problem};
use procmon_core::planner::{
    determinize, solve, verify_policy, DeterminizeOptions, PlanError, SeededChooser, SolutionClass,
};
use proptest::prelude::*;

#[test]
fn verdicts_match_the_fixpoint_oracle() {
    let mut solvable = 0;
    for seed in 0..300 {
        let task = support::random_fond_task(seed);
        let expected = support::strong_cyclic_solvable(&task);
        match solve(&task) {
            Ok(policy) => {
                assert!(expected, "seed {seed}: solved a task the oracle rejects");
                let graph = verify_policy(&task, &policy).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
                assert_eq!(policy.class() == SolutionClass::StrongCyclic, graph.has_cycle(), "seed {seed}");
                solvable += 1;
            }
            Err(PlanError::Unsolvable) => assert!(!expected, "seed {seed}: missed a solution"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    // both verdicts must be exercised
    assert!(solvable > 30 && solvable < 270, "{solvable}");
}

#[test]
fn fixture_policies_verify() {
    let d = parse_domain(VINEYARD_DOMAIN).unwrap();
    for text in [VINEYARD_HARVEST_PROBLEM] {
        let t = ground(&d, &parse_problem(text, &d).unwrap()).unwrap();
        let p = solve(&t).unwrap();
        verify_policy(&t, &p).unwrap();
    }
    let t = ground(&d, &parse_problem(VINEYARD_UNSOLVABLE_PROBLEM, &d).unwrap()).unwrap();
    assert_eq!(solve(&t), Err(PlanError::Unsolvable));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fair_determinization_reaches_the_goal(task_seed in 0u64..5000, seed in any::<u64>()) {
        let task = support::random_fond_task(task_seed);
        if let Ok(policy) = solve(&task) {
            let graph = verify_policy(&task, &policy).unwrap();
            let plan = determinize(&task, &policy, &graph, &mut SeededChooser::new(seed), DeterminizeOptions::default()).unwrap();
            let mut s = task.init().clone();
            for step in &plan {
                prop_assert!(task.applicable(&s, step.action));
                s = task.apply(&s, step.action, step.outcome);
            }
            prop_assert!(task.is_goal(&s));
            let again = determinize(&task, &policy, &graph, &mut SeededChooser::new(seed), DeterminizeOptions::default()).unwrap();
            prop_assert_eq!(plan, again);
        }
    }
}
