//! Independent reference implementations the library is checked against.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use procmon_core::compiler::{AtomBinding, AtomMap, CompiledTask};
use procmon_core::ltlf::{evaluate, Atom, Formula, Interpretation, Trace};
use procmon_core::monitor::Scenario;
use procmon_core::pddl::{GroundAction, GroundAtom, GroundOutcome, GroundTask, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random FOND task over `n` fluents, each action with up to three outcomes.
pub fn random_fond_task(seed: u64) -> GroundTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=9);
    let fluents: Vec<GroundAtom> = (0..n).map(|i| GroundAtom::new(format!("p{i}"), &[])).collect();
    let pick = |rng: &mut ChaCha8Rng, k: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
        v.sort();
        v.dedup();
        v
    };
    let actions: Vec<GroundAction> = (0..rng.random_range(2..=10))
        .map(|a| {
            let k = rng.random_range(0..=2);
            let pre_pos = pick(&mut rng, k);
            let k = rng.random_range(0..=1);
            let pre_neg: Vec<usize> = pick(&mut rng, k).into_iter().filter(|f| !pre_pos.contains(f)).collect();
            let outcomes = (0..rng.random_range(1..=3))
                .map(|o| {
                    let k = rng.random_range(0..=2);
                    let add = pick(&mut rng, k);
                    let k = rng.random_range(0..=2);
                    let del = pick(&mut rng, k).into_iter().filter(|f| !add.contains(f)).collect();
                    GroundOutcome {
                        label: format!("o{o}"),
                        add,
                        del,
                    }
                })
                .collect();
            GroundAction {
                schema: format!("a{a}"),
                args: vec![],
                pre_pos,
                pre_neg,
                outcomes,
            }
        })
        .collect();
    let init: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    let k = rng.random_range(1..=2);
    let goal = pick(&mut rng, k);
    GroundTask::from_parts("random", "random", fluents, actions, init, goal, vec![]).unwrap()
}

fn successors(s: &BTreeSet<usize>, a: &GroundAction) -> Option<Vec<BTreeSet<usize>>> {
    if !a.pre_pos.iter().all(|f| s.contains(f)) || a.pre_neg.iter().any(|f| s.contains(f)) {
        return None;
    }
    Some(
        a.outcomes
            .iter()
            .map(|o| {
                let mut n = s.clone();
                for d in &o.del {
                    n.remove(d);
                }
                n.extend(o.add.iter().copied());
                n
            })
            .collect(),
    )
}

/// Whether a strong-cyclic policy exists, by the textbook nested fixpoint
/// `νX. μY. goal ∪ {s | ∃a. succ(s,a) ⊆ X ∧ succ(s,a) ∩ Y ≠ ∅}` over the
/// states reachable from the initial state.
pub fn strong_cyclic_solvable(task: &GroundTask) -> bool {
    let init: BTreeSet<usize> = task.init().ids().collect();
    let is_goal = |s: &BTreeSet<usize>| task.goal_pos().iter().all(|f| s.contains(f));
    let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::new();
    let mut states = vec![init.clone()];
    index.insert(init, 0);
    let mut moves: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let s = states[i].clone();
        let mut here = Vec::new();
        if !is_goal(&s) {
            for a in task.actions() {
                if let Some(succ) = successors(&s, a) {
                    let ids = succ
                        .into_iter()
                        .map(|n| {
                            let next = states.len();
                            *index.entry(n.clone()).or_insert_with(|| {
                                states.push(n);
                                next
                            })
                        })
                        .collect();
                    here.push(ids);
                }
            }
        }
        moves.push(here);
        i += 1;
    }
    let n = states.len();
    let goal: Vec<bool> = states.iter().map(is_goal).collect();
    let mut x = vec![true; n];
    loop {
        let mut y: Vec<bool> = goal.clone();
        loop {
            let mut changed = false;
            for s in 0..n {
                if y[s] || !x[s] {
                    continue;
                }
                if moves[s]
                    .iter()
                    .any(|succ| succ.iter().all(|&t| x[t]) && succ.iter().any(|&t| y[t]))
                {
                    y[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let next: Vec<bool> = (0..n).map(|s| x[s] && y[s]).collect();
        if next == x {
            return x[0];
        }
        x = next;
    }
}

/// Soundness and completeness by plain set arithmetic with exact fractions.
pub fn score_oracle(
    predicted: &dyn Fn(usize) -> BTreeSet<String>,
    trace: &[BTreeSet<String>],
    t: usize,
    scenario: Scenario,
) -> (f64, f64) {
    let range: Vec<usize> = match scenario {
        Scenario::Present => vec![t],
        Scenario::Past => (1..=t).collect(),
        Scenario::Future => (t..=trace.len()).collect(),
    };
    // sums kept as fractions over the common denominator of 1..=|sets|
    let mut s = (0u128, 1u128);
    let mut c = (0u128, 1u128);
    let add = |acc: (u128, u128), num: u128, den: u128| {
        let n = acc.0 * den + num * acc.1;
        let d = acc.1 * den;
        let g = gcd(n, d);
        (n / g, d / g)
    };
    for &i in &range {
        let p = predicted(i);
        let f = &trace[i - 1];
        let both = p.iter().filter(|x| f.contains(*x)).count() as u128;
        s = if p.is_empty() { add(s, 1, 1) } else { add(s, both, p.len() as u128) };
        c = if f.is_empty() {
            add(c, 1, 1)
        } else {
            add(c, both, f.len() as u128)
        };
    }
    let k = range.len() as u128;
    (s.0 as f64 / (s.1 * k) as f64, c.0 as f64 / (c.1 * k) as f64)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Letter of a world state right after `action` (if any), computed from the
/// bindings alone.
fn letter(task: &GroundTask, map: &AtomMap, goal_atoms: &BTreeSet<Atom>, world: &State, action: Option<&GroundAction>) -> Interpretation {
    goal_atoms
        .iter()
        .filter(|atom| match &map[*atom] {
            AtomBinding::Fluent(f) => task.fluent_id(f).is_some_and(|id| world.contains(id)),
            AtomBinding::Action(name) => {
                action.is_some_and(|a| a.schema == *name || a.name() == *name || a.pddl_name() == *name)
            }
        })
        .cloned()
        .collect()
}

/// Whether some extension of `prefix` by at most `extra` letters over
/// `atoms` (including none) satisfies `goal`.
fn satisfiable_extension(goal: &Formula, atoms: &BTreeSet<Atom>, prefix: &[Interpretation], extra: usize) -> bool {
    let atoms: Vec<&Atom> = atoms.iter().collect();
    let letters: Vec<Interpretation> = (0..1u32 << atoms.len())
        .map(|m| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, a)| (*a).clone())
                .collect()
        })
        .collect();
    let mut frontier = vec![prefix.to_vec()];
    for round in 0..=extra {
        if frontier.iter().any(|t| evaluate(goal, &Trace::new(t.clone()).unwrap())) {
            return true;
        }
        if round == extra {
            break;
        }
        frontier = frontier
            .iter()
            .flat_map(|t| {
                letters.iter().map(move |l| {
                    let mut n = t.clone();
                    n.push(l.clone());
                    n
                })
            })
            .collect();
    }
    false
}

pub struct SoundnessReport {
    pub states: usize,
    pub edges: usize,
    pub goal_states: usize,
}

/// Expands the compiled task breadth-first up to `depth` world steps. Every
/// reachable world-turn state carries a witness trace; each edge extends a
/// witness by one letter and the goal flag of its target must agree with
/// the semantics of `goal` on that trace. Each world move must be followed
/// by exactly one applicable automaton move.
pub fn check_compilation(
    original: &GroundTask,
    compiled: &CompiledTask,
    goal: &Formula,
    map: &AtomMap,
    depth: usize,
) -> Result<SoundnessReport, String> {
    let ct = compiled.task();
    let atoms = goal.atoms();
    let s0 = ct.init().clone();
    let w0 = compiled.project(&s0);
    if &w0 != original.init() {
        return Err("initial world state differs".into());
    }
    let first = letter(original, map, &atoms, &w0, None);
    let mut witness: HashMap<State, Vec<Interpretation>> = HashMap::from([(s0.clone(), vec![first.clone()])]);
    if ct.is_goal(&s0) != evaluate(goal, &Trace::new(vec![first]).unwrap()) {
        return Err("goal flag wrong at the initial state".into());
    }
    let mut queue = VecDeque::from([(s0, 0usize)]);
    let mut edges = 0;
    let mut goal_states = 0;
    while let Some((s, d)) = queue.pop_front() {
        if ct.is_goal(&s) {
            goal_states += 1;
        }
        if d >= depth {
            continue;
        }
        let w = witness[&s].clone();
        for a in 0..compiled.world_actions() {
            if !ct.applicable(&s, a) {
                continue;
            }
            let world = compiled.project(&s);
            if !original.applicable(&world, a) {
                return Err(format!("{} applicable only in the compiled task", original.action(a).name()));
            }
            for o in 0..ct.action(a).outcomes.len() {
                let mid = ct.apply(&s, a, o);
                if compiled.is_world_turn(&mid) || ct.is_goal(&mid) {
                    return Err("a world move must hand the turn to the automaton".into());
                }
                let syncs: Vec<usize> = ct.applicable_actions(&mid).collect();
                if syncs.is_empty() {
                    // pruned: the automaton would enter a state that never accepts
                    let mut trace = w.clone();
                    trace.push(letter(original, map, &atoms, &compiled.project(&mid), Some(original.action(a))));
                    if satisfiable_extension(goal, &atoms, &trace, 3) {
                        return Err(format!("dead end after {} steps on a satisfiable prefix", trace.len() - 1));
                    }
                    edges += 1;
                    continue;
                }
                if syncs.len() != 1 || compiled.is_world_action(syncs[0]) {
                    return Err(format!("{} automaton moves applicable", syncs.len()));
                }
                let next = ct.apply(&mid, syncs[0], 0);
                let world_next = compiled.project(&next);
                if world_next != original.apply(&world, a, o) {
                    return Err("world effects differ from the original action".into());
                }
                let mut trace = w.clone();
                trace.push(letter(original, map, &atoms, &world_next, Some(original.action(a))));
                let sat = evaluate(goal, &Trace::new(trace.clone()).unwrap());
                if ct.is_goal(&next) != sat {
                    return Err(format!(
                        "goal flag {} but the formula evaluates to {sat} on a trace of length {}",
                        ct.is_goal(&next),
                        trace.len()
                    ));
                }
                edges += 1;
                if !witness.contains_key(&next) {
                    witness.insert(next.clone(), trace);
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    Ok(SoundnessReport {
        states: witness.len(),
        edges,
        goal_states,
    })
}

/// Random executions of up to `len` world steps; the goal flag after every
/// step must match the semantics of `goal` on the trace so far.
pub fn check_random_walks(
    original: &GroundTask,
    compiled: &CompiledTask,
    goal: &Formula,
    map: &AtomMap,
    walks: usize,
    len: usize,
    seed: u64,
) -> Result<usize, String> {
    let ct = compiled.task();
    let atoms = goal.atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..walks {
        let mut s = ct.init().clone();
        let mut trace = vec![letter(original, map, &atoms, &compiled.project(&s), None)];
        for _ in 0..len {
            let moves: Vec<usize> = (0..compiled.world_actions()).filter(|&a| ct.applicable(&s, a)).collect();
            if moves.is_empty() {
                break;
            }
            let a = moves[rng.random_range(0..moves.len())];
            let o = rng.random_range(0..ct.action(a).outcomes.len());
            s = ct.apply(&s, a, o);
            let Some(sync) = ct.applicable_actions(&s).next() else {
                trace.push(letter(original, map, &atoms, &compiled.project(&s), Some(original.action(a))));
                if satisfiable_extension(goal, &atoms, &trace, 3) {
                    return Err("dead end on a satisfiable prefix".into());
                }
                break;
            };
            s = ct.apply(&s, sync, 0);
            trace.push(letter(original, map, &atoms, &compiled.project(&s), Some(original.action(a))));
            if ct.is_goal(&s) != evaluate(goal, &Trace::new(trace.clone()).unwrap()) {
                return Err(format!("goal flag disagrees after {} steps", trace.len() - 1));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
