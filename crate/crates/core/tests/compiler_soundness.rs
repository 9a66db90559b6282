mod support;

use procmon_core::ltlf::parse_ltlf;
use procmon_core::pipeline::Workspace;

const GOALS: &[&str] = &[
    "G(robot_at_loc_l1 <-> X call_support)",
    "F(harvested_g1 & F robot_at_loc_l0)",
    "!robot_at_loc_l2 U harvested_g1",
    "G(box_full -> F call_support)",
    "F robot_at_loc_l3 & G !unknown_g1",
    "G(ripe_g1 -> X harvest)",
];

#[test]
fn compiled_goal_flags_follow_the_semantics() {
    let w = Workspace::vineyard();
    for g in GOALS {
        let goal = parse_ltlf(g).unwrap();
        let map = w.resolve_atoms(&goal).unwrap();
        let compiled = w.compile(&goal).unwrap();
        let r = support::check_compilation(&w.task, &compiled, &goal, &map, 30).unwrap_or_else(|e| panic!("{g}: {e}"));
        assert!(r.edges > 0 && r.goal_states > 0, "{g}: {} states, {} edges", r.states, r.edges);
        support::check_random_walks(&w.task, &compiled, &goal, &map, 200, 30, 7).unwrap_or_else(|e| panic!("{g}: {e}"));
    }
}
