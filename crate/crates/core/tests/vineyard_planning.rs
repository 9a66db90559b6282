use procmon_core::fixtures::*;
use procmon_core::pddl::{ground, parse_domain, parse_problem, GroundAtom, GroundTask};
use procmon_core::planner::{
    determinize, solve, verify_policy, PlanError, ScriptedChooser, SeededChooser, SolutionClass,
};

fn task(problem: &str) -> GroundTask {
    let d = parse_domain(VINEYARD_DOMAIN).unwrap();
    let p = parse_problem(problem, &d).unwrap();
    ground(&d, &p).unwrap()
}

#[test]
fn vineyard_grounds() {
    let t = task(VINEYARD_PROBLEM);
    let count = |schema: &str| t.actions().iter().filter(|a| a.schema == schema).count();
    assert_eq!(count("move"), 12);
    assert_eq!(count("check-grape"), 2);
    assert_eq!(count("harvest"), 2);
    assert_eq!(count("call-support"), 1);
    assert_eq!(count("unload"), 1);
    assert_eq!(count("wait"), 2);
    let check = &t.actions()[t.action_id("(check-grape g1 l1)").unwrap()];
    let labels: Vec<&str> = check.outcomes.iter().map(|o| o.label.as_str()).collect();
    assert_eq!(labels, ["ripe", "unripe", "unknown"]);
    // 4 locations + 2 static grape positions + 10 grape conditions + 3 flags.
    assert_eq!(t.num_fluents(), 19);
    assert!(t.fluent_id(&GroundAtom::new("robot-at", &["l3"])).is_some());
}

#[test]
fn harvest_needs_a_cyclic_policy() {
    let t = task(VINEYARD_HARVEST_PROBLEM);
    let p = solve(&t).unwrap();
    assert_eq!(p.class(), SolutionClass::StrongCyclic);
    let g = verify_policy(&t, &p).unwrap();
    assert!(g.has_cycle());

    let mut script = ScriptedChooser::parse("unripe\nripe");
    let plan = determinize(&t, &p, &g, &mut script, Default::default()).unwrap();
    let names: Vec<String> = plan.iter().map(|s| t.action(s.action).name()).collect();
    assert_eq!(
        names,
        [
            "(move l0 l1)",
            "(check-grape g1 l1)",
            "(wait g1 l1)",
            "(check-grape g1 l1)",
            "(harvest g1 l1)"
        ]
    );
}

#[test]
fn seeded_determinization_is_reproducible_and_terminates() {
    let t = task(VINEYARD_HARVEST_PROBLEM);
    let p = solve(&t).unwrap();
    let g = verify_policy(&t, &p).unwrap();
    for seed in 0..50 {
        let a = determinize(&t, &p, &g, &mut SeededChooser::new(seed), Default::default()).unwrap();
        let b = determinize(&t, &p, &g, &mut SeededChooser::new(seed), Default::default()).unwrap();
        assert_eq!(a, b);
        let mut s = t.init().clone();
        for step in &a {
            s = t.apply(&s, step.action, step.outcome);
        }
        assert!(t.is_goal(&s));
    }
}

#[test]
fn unsolvable_fixture_is_reported() {
    let t = task(VINEYARD_UNSOLVABLE_PROBLEM);
    assert_eq!(solve(&t), Err(PlanError::Unsolvable));
}
