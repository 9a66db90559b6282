//! Strong-cyclic FOND planning over the explicit reachable AND/OR graph.

mod choose;

pub use choose::{
    ChoiceContext, Chooser, ChooserError, InteractiveChooser, ScriptEntry, ScriptedChooser,
    SeededChooser,
};

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{GroundTask, State};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;
pub const DEFAULT_FAIRNESS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unsolvable: no strong-cyclic policy reaches the goal from the initial state")]
    Unsolvable,
    #[error("state space exceeds {0} states")]
    StateLimit(usize),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Chooser(#[from] ChooserError),
    #[error("interactive chooser cannot drive an offline determinization")]
    NeedsInput,
    #[error("no goal reached within {0} steps")]
    FairnessExhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("policy has no action for reachable non-goal state {state}")]
    Incomplete { state: String },
    #[error("policy action {action} is not applicable in {state}")]
    Precondition { state: String, action: String },
    #[error("goal unreachable under the policy from {state}")]
    GoalUnreachable { state: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionClass {
    /// The policy graph is acyclic.
    Strong,
    StrongCyclic,
}

impl std::fmt::Display for SolutionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolutionClass::Strong => "strong",
            SolutionClass::StrongCyclic => "strong-cyclic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    map: BTreeMap<State, usize>,
    class: SolutionClass,
}

impl Policy {
    pub fn new(map: BTreeMap<State, usize>, class: SolutionClass) -> Self {
        Policy { map, class }
    }

    pub fn action(&self, s: &State) -> Option<usize> {
        self.map.get(s).copied()
    }

    pub fn class(&self) -> SolutionClass {
        self.class
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, usize)> {
        self.map.iter().map(|(s, &a)| (s, a))
    }

    /// `hash<TAB>action` lines, sorted by hash.
    pub fn to_lines(&self, task: &GroundTask) -> String {
        let mut rows: Vec<(u64, String)> = self
            .map
            .iter()
            .map(|(s, &a)| (s.canonical_hash(), task.action(a).name()))
            .collect();
        rows.sort();
        rows.iter()
            .map(|(h, a)| format!("{h:016x}\t{a}\n"))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub max_states: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

/// The explicit AND/OR graph reachable from the initial state. Goal states are
/// not expanded.
pub struct AndOrGraph {
    pub states: Vec<State>,
    pub goal: Vec<bool>,
    /// Per state: applicable actions with their successor ids, one per outcome.
    pub moves: Vec<Vec<(usize, Vec<usize>)>>,
}

impl AndOrGraph {
    pub fn explore(task: &GroundTask, max_states: usize) -> Result<AndOrGraph, PlanError> {
        let mut states = vec![task.init().clone()];
        let mut index: HashMap<State, usize> = HashMap::from([(task.init().clone(), 0)]);
        let mut goal = Vec::new();
        let mut moves = Vec::new();
        let mut next = 0;
        while next < states.len() {
            let s = states[next].clone();
            next += 1;
            let is_goal = task.is_goal(&s);
            goal.push(is_goal);
            let mut here = Vec::new();
            if !is_goal {
                for a in task.applicable_actions(&s) {
                    let mut succ = Vec::new();
                    for n in task.successors(&s, a) {
                        let id = match index.get(&n) {
                            Some(&id) => id,
                            None => {
                                if states.len() >= max_states {
                                    return Err(PlanError::StateLimit(max_states));
                                }
                                index.insert(n.clone(), states.len());
                                states.push(n);
                                states.len() - 1
                            }
                        };
                        succ.push(id);
                    }
                    here.push((a, succ));
                }
            }
            moves.push(here);
        }
        Ok(AndOrGraph { states, goal, moves })
    }

    /// Greatest set of states from which a strong-cyclic policy reaches the goal:
    /// repeatedly drop states that cannot reach the goal through actions whose
    /// outcomes all stay inside the set.
    pub fn strong_cyclic_region(&self) -> Vec<bool> {
        let n = self.states.len();
        let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (s, ms) in self.moves.iter().enumerate() {
            for (mi, (_, succ)) in ms.iter().enumerate() {
                for &t in succ {
                    preds[t].push((s, mi));
                }
            }
        }
        let mut alive = vec![true; n];
        loop {
            let valid = |s: usize, mi: usize| self.moves[s][mi].1.iter().all(|&t| alive[t]);
            let mut reached = vec![false; n];
            let mut queue: VecDeque<usize> = (0..n).filter(|&s| self.goal[s]).collect();
            for &s in &queue {
                reached[s] = true;
            }
            while let Some(t) = queue.pop_front() {
                for &(s, mi) in &preds[t] {
                    if alive[s] && !reached[s] && valid(s, mi) {
                        reached[s] = true;
                        queue.push_back(s);
                    }
                }
            }
            if reached == alive {
                return alive;
            }
            alive = reached;
        }
    }
}

pub fn solve(task: &GroundTask) -> Result<Policy, PlanError> {
    solve_with(task, SolveOptions::default())
}

pub fn solve_with(task: &GroundTask, options: SolveOptions) -> Result<Policy, PlanError> {
    let g = AndOrGraph::explore(task, options.max_states)?;
    let alive = g.strong_cyclic_region();
    if !alive[0] {
        return Err(PlanError::Unsolvable);
    }
    let n = g.states.len();

    // Layer the region backwards from the goal; a state takes the lowest-id
    // action that stays in the region and can enter an earlier layer.
    let mut layer: Vec<Option<usize>> = (0..n).map(|s| g.goal[s].then_some(0)).collect();
    let mut choice: Vec<Option<usize>> = vec![None; n];
    let mut k = 0;
    loop {
        k += 1;
        let mut assigned = Vec::new();
        for s in 0..n {
            if !alive[s] || layer[s].is_some() {
                continue;
            }
            let pick = g.moves[s].iter().find(|(_, succ)| {
                succ.iter().all(|&t| alive[t]) && succ.iter().any(|&t| layer[t].is_some_and(|l| l < k))
            });
            if let Some((a, _)) = pick {
                assigned.push((s, *a));
            }
        }
        if assigned.is_empty() {
            break;
        }
        for (s, a) in assigned {
            layer[s] = Some(k);
            choice[s] = Some(a);
        }
    }

    // Keep only states the policy actually reaches.
    let succ_of = |s: usize, a: usize| -> &Vec<usize> {
        &g.moves[s].iter().find(|(x, _)| *x == a).expect("chosen move").1
    };
    let mut map = BTreeMap::new();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(s) = stack.pop() {
        if g.goal[s] {
            continue;
        }
        let a = choice[s].expect("region states have a choice");
        map.insert(g.states[s].clone(), a);
        for &t in succ_of(s, a) {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    let mut policy = Policy::new(map, SolutionClass::Strong);
    let graph = verify_policy(task, &policy)?;
    policy.class = if graph.has_cycle() {
        SolutionClass::StrongCyclic
    } else {
        SolutionClass::Strong
    };
    Ok(policy)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEdge {
    pub from: usize,
    pub action: usize,
    pub outcome: usize,
    pub to: usize,
}

/// States reachable under a policy, with every outcome of every chosen action.
#[derive(Clone, Debug)]
pub struct PlanGraph {
    nodes: Vec<State>,
    index: HashMap<State, usize>,
    edges: Vec<PlanEdge>,
    out: Vec<Vec<usize>>,
    goal: Vec<bool>,
    distance: Vec<usize>,
}

fn describe(task: &GroundTask, s: &State) -> String {
    let atoms: Vec<String> = task.atoms(s).iter().map(|a| a.to_string()).collect();
    format!("{{{}}}", atoms.join(" "))
}

pub fn verify_policy(task: &GroundTask, policy: &Policy) -> Result<PlanGraph, VerifyError> {
    let mut nodes = vec![task.init().clone()];
    let mut index = HashMap::from([(task.init().clone(), 0)]);
    let mut edges = Vec::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut goal = Vec::new();
    let mut next = 0;
    while next < nodes.len() {
        let s = nodes[next].clone();
        let id = next;
        next += 1;
        let mut here = Vec::new();
        let is_goal = task.is_goal(&s);
        goal.push(is_goal);
        if !is_goal {
            let a = policy.action(&s).ok_or_else(|| VerifyError::Incomplete {
                state: describe(task, &s),
            })?;
            if !task.applicable(&s, a) {
                return Err(VerifyError::Precondition {
                    state: describe(task, &s),
                    action: task.action(a).name(),
                });
            }
            for (o, n) in task.successors(&s, a).into_iter().enumerate() {
                let to = *index.entry(n.clone()).or_insert_with(|| {
                    nodes.push(n);
                    nodes.len() - 1
                });
                here.push(edges.len());
                edges.push(PlanEdge {
                    from: id,
                    action: a,
                    outcome: o,
                    to,
                });
            }
        }
        out.push(here);
    }

    let n = nodes.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &edges {
        preds[e.to].push(e.from);
    }
    let mut distance = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| goal[s]).collect();
    for &s in &queue {
        distance[s] = 0;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if distance[s] == usize::MAX {
                distance[s] = distance[t] + 1;
                queue.push_back(s);
            }
        }
    }
    if let Some(s) = (0..n).find(|&s| distance[s] == usize::MAX) {
        return Err(VerifyError::GoalUnreachable {
            state: describe(task, &nodes[s]),
        });
    }
    Ok(PlanGraph {
        nodes,
        index,
        edges,
        out,
        goal,
        distance,
    })
}

impl PlanGraph {
    pub fn nodes(&self) -> &[State] {
        &self.nodes
    }

    pub fn node(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn edges(&self) -> &[PlanEdge] {
        &self.edges
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &PlanEdge> {
        self.out[node].iter().map(|&e| &self.edges[e])
    }

    pub fn is_goal(&self, node: usize) -> bool {
        self.goal[node]
    }

    /// Shortest number of steps to a goal node when outcomes are favourable.
    pub fn goal_distance(&self, node: usize) -> usize {
        self.distance[node]
    }

    pub fn has_cycle(&self) -> bool {
        // Iterative three-colour DFS.
        let n = self.nodes.len();
        let mut colour = vec![0u8; n];
        for root in 0..n {
            if colour[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            colour[root] = 1;
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                if let Some(&e) = self.out[v].get(*i) {
                    *i += 1;
                    let w = self.edges[e].to;
                    match colour[w] {
                        0 => {
                            colour[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        false
    }

    /// Node-link export with atoms listed per node.
    pub fn to_json(&self, task: &GroundTask) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                serde_json::json!({
                    "id": i,
                    "hash": format!("{:016x}", s.canonical_hash()),
                    "atoms": task.atoms(s).iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                    "goal": self.goal[i],
                    "distance": self.distance[i],
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| {
                let a = task.action(e.action);
                serde_json::json!({
                    "from": e.from,
                    "to": e.to,
                    "action": a.name(),
                    "outcome": a.outcomes[e.outcome].label,
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: usize,
    pub outcome: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct DeterminizeOptions {
    /// Repeats of one (state, action) pair before the chooser is overridden.
    pub fairness: usize,
    pub max_steps: usize,
}

impl Default for DeterminizeOptions {
    fn default() -> Self {
        DeterminizeOptions {
            fairness: DEFAULT_FAIRNESS,
            max_steps: 100_000,
        }
    }
}

/// Outcome to take once the fairness budget of a (state, action) pair is spent:
/// the one whose successor is closest to a goal, lowest index on ties.
pub fn fair_outcome(graph: &PlanGraph, node: usize) -> usize {
    graph
        .out_edges(node)
        .min_by_key(|e| (graph.goal_distance(e.to), e.outcome))
        .map(|e| e.outcome)
        .unwrap_or(0)
}

/// Resolve the policy to a single path from the initial state to a goal state.
pub fn determinize(
    task: &GroundTask,
    policy: &Policy,
    graph: &PlanGraph,
    chooser: &mut dyn Chooser,
    options: DeterminizeOptions,
) -> Result<Vec<PlanStep>, PlanError> {
    let mut s = task.init().clone();
    let mut steps = Vec::new();
    let mut visits: HashMap<(usize, usize), usize> = HashMap::new();
    while !task.is_goal(&s) {
        if steps.len() >= options.max_steps {
            return Err(PlanError::FairnessExhausted(options.max_steps));
        }
        let node = graph.node(&s).ok_or_else(|| VerifyError::Incomplete {
            state: describe(task, &s),
        })?;
        let a = policy.action(&s).ok_or_else(|| VerifyError::Incomplete {
            state: describe(task, &s),
        })?;
        let action = task.action(a);
        let count = visits.entry((node, a)).or_insert(0);
        *count += 1;
        let outcome = if action.is_deterministic() {
            0
        } else if *count > options.fairness {
            fair_outcome(graph, node)
        } else {
            let labels: Vec<String> = action.outcomes.iter().map(|o| o.label.clone()).collect();
            let name = action.name();
            let ctx = ChoiceContext {
                state: &s,
                action: a,
                action_name: &name,
                labels: &labels,
            };
            chooser.choose(&ctx)?.ok_or(PlanError::NeedsInput)?
        };
        s = task.apply(&s, a, outcome);
        steps.push(PlanStep { action: a, outcome });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{GroundAction, GroundOutcome};

    fn det(pre: usize, add: usize, del: usize) -> GroundAction {
        GroundAction {
            schema: format!("step{pre}"),
            args: vec![],
            pre_pos: vec![pre],
            pre_neg: vec![],
            outcomes: vec![GroundOutcome {
                label: "effect".into(),
                add: vec![add],
                del: vec![del],
            }],
        }
    }

    fn chain(n: usize) -> GroundTask {
        let fluents = (0..=n)
            .map(|i| crate::pddl::GroundAtom::new("at", &[&format!("p{i}")]))
            .collect();
        let actions = (0..n).map(|i| det(i, i + 1, i)).collect();
        GroundTask::from_parts("chain", "chain", fluents, actions, [0], vec![n], vec![]).unwrap()
    }

    #[test]
    fn chain_gives_linear_plan() {
        let t = chain(5);
        let p = solve(&t).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.class(), SolutionClass::Strong);
        let g = verify_policy(&t, &p).unwrap();
        assert_eq!(g.nodes().len(), 6);
        assert!(!g.has_cycle());
        let plan = determinize(&t, &p, &g, &mut SeededChooser::new(1), Default::default()).unwrap();
        let actions: Vec<usize> = plan.iter().map(|s| s.action).collect();
        assert_eq!(actions, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn goal_at_init_gives_empty_policy() {
        let t = GroundTask::from_parts(
            "x",
            "x",
            vec![crate::pddl::GroundAtom::new("p", &[])],
            vec![],
            [0],
            vec![0],
            vec![],
        )
        .unwrap();
        assert!(solve(&t).unwrap().is_empty());
    }

    #[test]
    fn dead_end_policy_is_rejected_with_witness() {
        // From p0 a coin flip leads to the goal p1 or the dead end p2.
        let fluents = (0..3)
            .map(|i| crate::pddl::GroundAtom::new("at", &[&format!("p{i}")]))
            .collect();
        let flip = GroundAction {
            schema: "flip".into(),
            args: vec![],
            pre_pos: vec![0],
            pre_neg: vec![],
            outcomes: vec![
                GroundOutcome {
                    label: "good".into(),
                    add: vec![1],
                    del: vec![0],
                },
                GroundOutcome {
                    label: "bad".into(),
                    add: vec![2],
                    del: vec![0],
                },
            ],
        };
        let t = GroundTask::from_parts("x", "x", fluents, vec![flip], [0], vec![1], vec![]).unwrap();
        assert_eq!(solve(&t), Err(PlanError::Unsolvable));
        let p = Policy::new(BTreeMap::from([(t.init().clone(), 0)]), SolutionClass::Strong);
        match verify_policy(&t, &p) {
            Err(VerifyError::Incomplete { state }) => assert_eq!(state, "{(at p2)}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_lines_are_hash_tab_action() {
        let t = chain(2);
        let p = solve(&t).unwrap();
        let text = p.to_lines(&t);
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            let (h, a) = line.split_once('\t').unwrap();
            assert_eq!(h.len(), 16);
            assert!(a.starts_with("(step"));
        }
    }
}
