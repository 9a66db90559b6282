//! Embed an LTLf goal into a ground FOND task.
//!
//! World and sync moves alternate. A world action runs the original action,
//! updates the occurrence markers and hands the turn to the automaton; exactly
//! one sync action (one per guard cube of the current automaton state) then
//! advances the automaton fluent and hands the turn back. The automaton reads
//! the state sampled right after each world action; the initial state's letter
//! is consumed at compile time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltlf::{to_dfa_with, Atom, Dfa, DfaOptions, Formula, Interpretation, LtlfError, Trace};
use crate::pddl::{GroundAction, GroundAtom, GroundOutcome, GroundTask, State};

pub const SYNC_PREDICATE: &str = "ltl-sync";
pub const STATE_PREDICATE: &str = "ltl-state";
pub const ACCEPT_PREDICATE: &str = "ltl-accepting";
pub const MARKER_PREDICATE: &str = "ltl-occurred";

/// What a goal atom stands for in the task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomBinding {
    Fluent(GroundAtom),
    /// An action schema name (`call-support`) or a ground action (`(move l0 l1)`).
    /// The atom holds right after a matching action was executed.
    Action(String),
}

impl fmt::Display for AtomBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomBinding::Fluent(a) => write!(f, "fluent {a}"),
            AtomBinding::Action(a) => write!(f, "action {a}"),
        }
    }
}

pub type AtomMap = BTreeMap<Atom, AtomBinding>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("goal atom `{0}` has no binding")]
    UnmappedAtom(Atom),
    #[error("atom `{atom}` is bound to {fluent}, which is not a fluent of the task")]
    UnknownFluent { atom: Atom, fluent: GroundAtom },
    #[error("atom `{atom}` is bound to action `{action}`, which the task does not contain")]
    UnknownAction { atom: Atom, action: String },
    #[error("task already uses the reserved predicate `{0}`")]
    ReservedName(String),
    #[error(transparent)]
    Automaton(#[from] LtlfError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncInfo {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
}

#[derive(Clone, Debug)]
pub struct CompiledTask {
    task: GroundTask,
    dfa: Dfa,
    goal: Formula,
    atom_map: AtomMap,
    world_fluents: usize,
    world_actions: usize,
    sync_fluent: usize,
    accept_fluent: usize,
    /// Indexed by automaton state; `None` for states that can never be entered.
    state_fluents: Vec<Option<usize>>,
    /// Marker fluent per action atom.
    markers: BTreeMap<Atom, usize>,
    /// Indexed by `action id - world_actions`.
    syncs: Vec<SyncInfo>,
}

fn action_matches(a: &GroundAction, target: &str) -> bool {
    let t = target.trim();
    a.schema == t || a.name() == t || a.pddl_name() == t
}

pub fn compile(task: &GroundTask, goal: &Formula, atom_map: &AtomMap) -> Result<CompiledTask, CompileError> {
    compile_with(task, goal, atom_map, DfaOptions::default())
}

pub fn compile_with(
    task: &GroundTask,
    goal: &Formula,
    atom_map: &AtomMap,
    dfa_options: DfaOptions,
) -> Result<CompiledTask, CompileError> {
    for p in [SYNC_PREDICATE, STATE_PREDICATE, ACCEPT_PREDICATE, MARKER_PREDICATE] {
        if task.fluents().iter().any(|f| f.predicate == p) || task.actions().iter().any(|a| a.schema == p) {
            return Err(CompileError::ReservedName(p.to_string()));
        }
    }
    let goal_atoms = goal.atoms();
    let mut fluent_atoms: Vec<(Atom, usize)> = Vec::new();
    let mut action_atoms: Vec<(Atom, String)> = Vec::new();
    for atom in &goal_atoms {
        match atom_map.get(atom) {
            None => return Err(CompileError::UnmappedAtom(atom.clone())),
            Some(AtomBinding::Fluent(f)) => {
                let id = task.fluent_id(f).ok_or_else(|| CompileError::UnknownFluent {
                    atom: atom.clone(),
                    fluent: f.clone(),
                })?;
                fluent_atoms.push((atom.clone(), id));
            }
            Some(AtomBinding::Action(name)) => {
                if !task.actions().iter().any(|a| action_matches(a, name)) {
                    return Err(CompileError::UnknownAction {
                        atom: atom.clone(),
                        action: name.clone(),
                    });
                }
                action_atoms.push((atom.clone(), name.clone()));
            }
        }
    }
    let dfa = to_dfa_with(goal, dfa_options)?;

    let n = task.num_fluents();
    let mut fluents: Vec<GroundAtom> = task.fluents().to_vec();
    let sync_fluent = fluents.len();
    fluents.push(GroundAtom::new(SYNC_PREDICATE, &[]));
    let accept_fluent = fluents.len();
    fluents.push(GroundAtom::new(ACCEPT_PREDICATE, &[]));
    let first_letter: Interpretation = fluent_atoms
        .iter()
        .filter(|(_, id)| task.init().contains(*id))
        .map(|(a, _)| a.clone())
        .collect();
    let q1 = dfa.step(dfa.initial(), &first_letter);
    let live = dfa.live_states();
    // Dead states get no fluent: no sync action ever enters them.
    let state_fluents: Vec<Option<usize>> = (0..dfa.num_states())
        .map(|q| {
            (q == q1 || live.contains(&q)).then(|| {
                fluents.push(GroundAtom::new(STATE_PREDICATE, &[&format!("q{q}")]));
                fluents.len() - 1
            })
        })
        .collect();
    let mut markers = BTreeMap::new();
    for (atom, _) in &action_atoms {
        fluents.push(GroundAtom::new(MARKER_PREDICATE, &[atom.as_str()]));
        markers.insert(atom.clone(), fluents.len() - 1);
    }
    let all_markers: BTreeSet<usize> = markers.values().copied().collect();

    let mut actions = Vec::new();
    for a in task.actions() {
        let set: BTreeSet<usize> = action_atoms
            .iter()
            .filter(|(_, target)| action_matches(a, target))
            .map(|(atom, _)| markers[atom])
            .collect();
        let mut pre_neg = a.pre_neg.clone();
        pre_neg.push(sync_fluent);
        let outcomes = a
            .outcomes
            .iter()
            .map(|o| {
                let mut add = o.add.clone();
                add.push(sync_fluent);
                add.extend(set.iter().copied());
                let mut del = o.del.clone();
                del.extend(all_markers.difference(&set).copied());
                GroundOutcome {
                    label: o.label.clone(),
                    add,
                    del,
                }
            })
            .collect();
        actions.push(GroundAction {
            schema: a.schema.clone(),
            args: a.args.clone(),
            pre_pos: a.pre_pos.clone(),
            pre_neg,
            outcomes,
        });
    }
    let world_actions = actions.len();

    let fluent_of = |atom: &Atom| -> usize {
        fluent_atoms
            .iter()
            .find(|(a, _)| a == atom)
            .map(|(_, id)| *id)
            .unwrap_or_else(|| markers[atom])
    };
    let mut syncs = Vec::new();
    for q in 0..dfa.num_states() {
        let Some(from_fluent) = state_fluents[q] else {
            continue;
        };
        for (ei, e) in dfa.edges_from(q).iter().enumerate() {
            let Some(to_fluent) = state_fluents[e.to].filter(|_| live.contains(&e.to)) else {
                continue;
            };
            let mut pos: BTreeSet<usize> = BTreeSet::from([sync_fluent, from_fluent]);
            let mut neg: BTreeSet<usize> = BTreeSet::new();
            for (atom, value) in &e.guard.literals {
                let id = fluent_of(atom);
                if *value {
                    pos.insert(id);
                } else {
                    neg.insert(id);
                }
            }
            // Two atoms bound to one fluent can yield contradictory cubes.
            if !pos.is_disjoint(&neg) {
                continue;
            }
            let mut add = Vec::new();
            let mut del = vec![sync_fluent];
            if e.to != q {
                add.push(to_fluent);
                del.push(from_fluent);
            }
            if dfa.is_accepting(e.to) {
                add.push(accept_fluent);
            } else {
                del.push(accept_fluent);
            }
            add.sort_unstable();
            del.sort_unstable();
            actions.push(GroundAction {
                schema: SYNC_PREDICATE.to_string(),
                args: vec![format!("q{q}"), format!("q{}", e.to), format!("e{ei}")],
                pre_pos: pos.into_iter().collect(),
                pre_neg: neg.into_iter().collect(),
                outcomes: vec![GroundOutcome {
                    label: "effect".into(),
                    add,
                    del,
                }],
            });
            syncs.push(SyncInfo {
                from: q,
                to: e.to,
                edge: ei,
            });
        }
    }

    let mut compiled = CompiledTask {
        task: task.clone(),
        dfa,
        goal: goal.clone(),
        atom_map: atom_map.clone(),
        world_fluents: n,
        world_actions,
        sync_fluent,
        accept_fluent,
        state_fluents,
        markers,
        syncs,
    };
    let mut init: Vec<usize> = task.init().ids().collect();
    init.extend(compiled.state_fluents[q1]);
    if compiled.dfa.is_accepting(q1) {
        init.push(accept_fluent);
    }
    if !task.goal_pos().is_empty() || !task.goal_neg().is_empty() {
        log::warn!("the task's own goal is replaced by the temporal goal");
    }
    compiled.task = GroundTask::from_parts(
        task.name(),
        task.domain_name(),
        fluents,
        actions,
        init,
        vec![accept_fluent],
        vec![sync_fluent],
    )
    .expect("compiled ids are in range");
    Ok(compiled)
}

impl CompiledTask {
    pub fn task(&self) -> &GroundTask {
        &self.task
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn goal(&self) -> &Formula {
        &self.goal
    }

    pub fn atom_map(&self) -> &AtomMap {
        &self.atom_map
    }

    /// Fluents `0..world_fluents()` are the original ones, with unchanged ids.
    pub fn world_fluents(&self) -> usize {
        self.world_fluents
    }

    /// Actions `0..world_actions()` are the original ones, with unchanged ids.
    pub fn world_actions(&self) -> usize {
        self.world_actions
    }

    pub fn is_world_action(&self, action: usize) -> bool {
        action < self.world_actions
    }

    pub fn sync_info(&self, action: usize) -> Option<SyncInfo> {
        action
            .checked_sub(self.world_actions)
            .and_then(|i| self.syncs.get(i).copied())
    }

    pub fn sync_fluent(&self) -> usize {
        self.sync_fluent
    }

    pub fn accept_fluent(&self) -> usize {
        self.accept_fluent
    }

    pub fn state_fluent(&self, q: usize) -> Option<usize> {
        self.state_fluents[q]
    }

    pub fn marker_fluents(&self) -> &BTreeMap<Atom, usize> {
        &self.markers
    }

    pub fn is_world_turn(&self, s: &State) -> bool {
        !s.contains(self.sync_fluent)
    }

    /// The automaton state recorded in `s`, if exactly one state fluent holds.
    pub fn automaton_state(&self, s: &State) -> Option<usize> {
        let mut found = None;
        for (q, f) in self.state_fluents.iter().enumerate() {
            if f.is_some_and(|f| s.contains(f)) {
                if found.is_some() {
                    return None;
                }
                found = Some(q);
            }
        }
        found
    }

    /// Restrict a compiled state to the original fluents.
    pub fn project(&self, s: &State) -> State {
        State::from_ids(self.world_fluents, s.ids().take_while(|&i| i < self.world_fluents))
    }

    fn letter_of_world(&self, world: &State, markers: &BTreeSet<usize>) -> Interpretation {
        self.atom_map
            .iter()
            .filter(|(atom, _)| self.goal_contains(atom))
            .filter(|(atom, binding)| match binding {
                AtomBinding::Fluent(f) => self.task.fluent_id(f).is_some_and(|id| world.contains(id)),
                AtomBinding::Action(_) => self.markers.get(*atom).is_some_and(|m| markers.contains(m)),
            })
            .map(|(atom, _)| atom.clone())
            .collect()
    }

    fn goal_contains(&self, atom: &Atom) -> bool {
        self.dfa.alphabet().contains(atom)
    }

    /// The goal-atom interpretation of a compiled state.
    pub fn letter(&self, s: &State) -> Interpretation {
        let markers: BTreeSet<usize> = self.markers.values().copied().filter(|&m| s.contains(m)).collect();
        self.letter_of_world(s, &markers)
    }

    /// The trace the goal is judged on: the initial state and every later
    /// world-turn state.
    pub fn induced_trace(&self, states: &[State]) -> Trace {
        let steps: Vec<Interpretation> = states
            .iter()
            .enumerate()
            .filter(|(i, s)| *i == 0 || self.is_world_turn(s))
            .map(|(_, s)| self.letter(s))
            .collect();
        Trace::new(steps).expect("at least the initial state")
    }

    /// Augmented domain and problem as parameterless PDDL.
    pub fn to_pddl(&self) -> (String, String) {
        self.task.to_pddl()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::{evaluate, parse_ltlf};
    use crate::pddl::{ground, parse_domain, parse_problem};

    const NAV: &str = "(define (domain nav) (:requirements :strips :typing)
      (:types loc) (:predicates (at ?l - loc))
      (:action move :parameters (?a ?b - loc) :precondition (at ?a)
        :effect (and (at ?b) (not (at ?a)))))";

    fn nav() -> GroundTask {
        let d = parse_domain(NAV).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain nav) (:objects l0 l1 - loc) (:init (at l0)))",
            &d,
        )
        .unwrap();
        ground(&d, &p).unwrap()
    }

    fn map(pairs: &[(&str, AtomBinding)]) -> AtomMap {
        pairs
            .iter()
            .map(|(a, b)| (Atom::new(*a).unwrap(), b.clone()))
            .collect()
    }

    #[test]
    fn true_goal_holds_at_init() {
        let t = nav();
        let c = compile(&t, &Formula::True, &AtomMap::new()).unwrap();
        assert!(c.task().is_goal(c.task().init()));
    }

    #[test]
    fn unmapped_and_unknown_atoms_are_errors() {
        let t = nav();
        let f = parse_ltlf("F x").unwrap();
        assert!(matches!(compile(&t, &f, &AtomMap::new()), Err(CompileError::UnmappedAtom(_))));
        let m = map(&[("x", AtomBinding::Fluent(GroundAtom::new("at", &["l9"])))]);
        assert!(matches!(compile(&t, &f, &m), Err(CompileError::UnknownFluent { .. })));
        let m = map(&[("x", AtomBinding::Action("fly".into()))]);
        assert!(matches!(compile(&t, &f, &m), Err(CompileError::UnknownAction { .. })));
    }

    #[test]
    fn turns_alternate_and_one_automaton_fluent_holds() {
        let t = nav();
        let f = parse_ltlf("G (x -> X y)").unwrap();
        let m = map(&[
            ("x", AtomBinding::Fluent(GroundAtom::new("at", &["l1"]))),
            ("y", AtomBinding::Action("(move l1 l0)".into())),
        ]);
        let c = compile(&t, &f, &m).unwrap();
        let ct = c.task();
        let mut seen = BTreeSet::from([ct.init().clone()]);
        let mut frontier = vec![ct.init().clone()];
        while let Some(s) = frontier.pop() {
            assert!(c.automaton_state(&s).is_some(), "{s:?}");
            for a in ct.applicable_actions(&s) {
                assert_eq!(c.is_world_action(a), c.is_world_turn(&s));
                for n in ct.successors(&s, a) {
                    assert_ne!(c.is_world_turn(&n), c.is_world_turn(&s));
                    if seen.insert(n.clone()) {
                        frontier.push(n);
                    }
                }
            }
        }
        assert!(seen.len() > 2);
    }

    #[test]
    fn bounded_executions_reaching_goal_satisfy_formula() {
        let t = nav();
        let f = parse_ltlf("F x").unwrap();
        let m = map(&[("x", AtomBinding::Fluent(GroundAtom::new("at", &["l1"])))]);
        let c = compile(&t, &f, &m).unwrap();
        let ct = c.task();
        let mut goal_paths = 0;
        let mut stack = vec![vec![ct.init().clone()]];
        while let Some(path) = stack.pop() {
            let s = path.last().unwrap();
            if ct.is_goal(s) {
                goal_paths += 1;
                assert!(evaluate(&f, &c.induced_trace(&path)));
                continue;
            }
            if path.len() > 16 {
                continue;
            }
            for a in ct.applicable_actions(s) {
                for n in ct.successors(s, a) {
                    let mut p = path.clone();
                    p.push(n);
                    stack.push(p);
                }
            }
        }
        assert!(goal_paths > 0);
    }

    #[test]
    fn world_projection_matches_original_moves() {
        let t = nav();
        let f = parse_ltlf("F x").unwrap();
        let m = map(&[("x", AtomBinding::Fluent(GroundAtom::new("at", &["l1"])))]);
        let c = compile(&t, &f, &m).unwrap();
        let s0 = c.task().init().clone();
        assert_eq!(&c.project(&s0), t.init());
        for a in 0..c.world_actions() {
            assert_eq!(c.task().applicable(&s0, a), t.applicable(t.init(), a));
            if t.applicable(t.init(), a) {
                let next = c.task().apply(&s0, a, 0);
                assert_eq!(c.project(&next), t.apply(t.init(), a, 0));
            }
        }
    }

    #[test]
    fn export_round_trips() {
        let t = nav();
        let f = parse_ltlf("G (x -> X y)").unwrap();
        let m = map(&[
            ("x", AtomBinding::Fluent(GroundAtom::new("at", &["l1"]))),
            ("y", AtomBinding::Action("move".into())),
        ]);
        let c = compile(&t, &f, &m).unwrap();
        let (dt, pt) = c.to_pddl();
        let d = parse_domain(&dt).unwrap();
        let p = parse_problem(&pt, &d).unwrap();
        let back = crate::pddl::ground_with(
            &d,
            &p,
            crate::pddl::GroundOptions {
                prune: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(back.num_fluents(), c.task().num_fluents());
        assert_eq!(back.actions().len(), c.task().actions().len());
        assert_eq!(back.is_goal(back.init()), c.task().is_goal(c.task().init()));
        let names = |t: &GroundTask| -> BTreeSet<String> { t.actions().iter().map(|a| a.name()).collect() };
        assert_eq!(names(&back), names(c.task()));
    }
}
