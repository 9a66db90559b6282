use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::PddlError;

pub const DEFAULT_MAX_GROUND_ACTIONS: usize = 200_000;

/// A set of fluent ids stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    words: Vec<u64>,
}

impl State {
    pub fn empty(num_fluents: usize) -> State {
        State {
            words: vec![0; num_fluents.div_ceil(64)],
        }
    }

    pub fn from_ids(num_fluents: usize, ids: impl IntoIterator<Item = usize>) -> State {
        let mut s = State::empty(num_fluents);
        for i in ids {
            s.insert(i);
        }
        s
    }

    pub fn contains(&self, id: usize) -> bool {
        self.words
            .get(id / 64)
            .is_some_and(|w| w & (1 << (id % 64)) != 0)
    }

    pub fn insert(&mut self, id: usize) {
        self.words[id / 64] |= 1 << (id % 64);
    }

    pub fn remove(&mut self, id: usize) {
        self.words[id / 64] &= !(1 << (id % 64));
    }

    /// Fluent ids in increasing order.
    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| wi * 64 + b)
        })
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// FNV-1a over the sorted id list; stable across runs and platforms.
    pub fn canonical_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for id in self.ids() {
            for b in (id as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ids()).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundOutcome {
    pub label: String,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<usize>,
    pub pre_neg: Vec<usize>,
    pub outcomes: Vec<GroundOutcome>,
}

impl GroundAction {
    /// `(move l0 l1)`.
    pub fn name(&self) -> String {
        GroundAtom {
            predicate: self.schema.clone(),
            args: self.args.clone(),
        }
        .to_string()
    }

    /// Parameterless identifier used when exporting, e.g. `move__l0__l1`.
    pub fn pddl_name(&self) -> String {
        let mut s = self.schema.clone();
        for a in &self.args {
            s.push_str("__");
            s.push_str(a);
        }
        s
    }

    pub fn is_deterministic(&self) -> bool {
        self.outcomes.len() == 1
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GroundOptions {
    pub max_ground_actions: usize,
    /// Drop actions that relaxed reachability from the initial state never enables.
    pub prune: bool,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            max_ground_actions: DEFAULT_MAX_GROUND_ACTIONS,
            prune: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTask {
    name: String,
    domain_name: String,
    fluents: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    actions: Vec<GroundAction>,
    init: State,
    goal_pos: Vec<usize>,
    goal_neg: Vec<usize>,
}

impl GroundTask {
    /// Build a task from already-indexed parts, checking that every id is in range.
    pub fn from_parts(
        name: impl Into<String>,
        domain_name: impl Into<String>,
        fluents: Vec<GroundAtom>,
        actions: Vec<GroundAction>,
        init: impl IntoIterator<Item = usize>,
        goal_pos: Vec<usize>,
        goal_neg: Vec<usize>,
    ) -> Result<GroundTask, String> {
        let n = fluents.len();
        let mut index = HashMap::with_capacity(n);
        for (i, f) in fluents.iter().enumerate() {
            if index.insert(f.clone(), i).is_some() {
                return Err(format!("duplicate fluent {f}"));
            }
        }
        let init: Vec<usize> = init.into_iter().collect();
        let in_range = |ids: &[usize]| ids.iter().all(|&i| i < n);
        if !in_range(&init) || !in_range(&goal_pos) || !in_range(&goal_neg) {
            return Err("fluent id out of range".into());
        }
        for a in &actions {
            if a.outcomes.is_empty() {
                return Err(format!("{} has no outcomes", a.name()));
            }
            let ok = in_range(&a.pre_pos)
                && in_range(&a.pre_neg)
                && a.outcomes.iter().all(|o| in_range(&o.add) && in_range(&o.del));
            if !ok {
                return Err(format!("{} references an unknown fluent", a.name()));
            }
        }
        Ok(GroundTask {
            name: name.into(),
            domain_name: domain_name.into(),
            init: State::from_ids(n, init),
            fluents,
            index,
            actions,
            goal_pos,
            goal_neg,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn fluents(&self) -> &[GroundAtom] {
        &self.fluents
    }

    pub fn num_fluents(&self) -> usize {
        self.fluents.len()
    }

    pub fn fluent(&self, id: usize) -> &GroundAtom {
        &self.fluents[id]
    }

    pub fn fluent_id(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: usize) -> &GroundAction {
        &self.actions[id]
    }

    /// Look up by `(move l0 l1)` or `move__l0__l1`.
    pub fn action_id(&self, name: &str) -> Option<usize> {
        let name = name.trim();
        self.actions
            .iter()
            .position(|a| a.name() == name || a.pddl_name() == name)
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal_pos(&self) -> &[usize] {
        &self.goal_pos
    }

    pub fn goal_neg(&self) -> &[usize] {
        &self.goal_neg
    }

    pub fn is_goal(&self, s: &State) -> bool {
        self.goal_pos.iter().all(|&i| s.contains(i)) && !self.goal_neg.iter().any(|&i| s.contains(i))
    }

    pub fn applicable(&self, s: &State, action: usize) -> bool {
        let a = &self.actions[action];
        a.pre_pos.iter().all(|&i| s.contains(i)) && !a.pre_neg.iter().any(|&i| s.contains(i))
    }

    pub fn applicable_actions<'a>(&'a self, s: &'a State) -> impl Iterator<Item = usize> + 'a {
        (0..self.actions.len()).filter(move |&a| self.applicable(s, a))
    }

    /// Deletes first, then adds.
    pub fn apply(&self, s: &State, action: usize, outcome: usize) -> State {
        let o = &self.actions[action].outcomes[outcome];
        let mut next = s.clone();
        for &d in &o.del {
            next.remove(d);
        }
        for &a in &o.add {
            next.insert(a);
        }
        next
    }

    pub fn successors(&self, s: &State, action: usize) -> Vec<State> {
        (0..self.actions[action].outcomes.len())
            .map(|o| self.apply(s, action, o))
            .collect()
    }

    pub fn atoms(&self, s: &State) -> Vec<GroundAtom> {
        s.ids().map(|i| self.fluents[i].clone()).collect()
    }

    /// Build a state from atoms, ignoring atoms outside the universe.
    pub fn state_of<'a>(&self, atoms: impl IntoIterator<Item = &'a GroundAtom>) -> State {
        State::from_ids(
            self.fluents.len(),
            atoms.into_iter().filter_map(|a| self.fluent_id(a)),
        )
    }

    pub fn summary(&self) -> String {
        let nondet = self.actions.iter().filter(|a| !a.is_deterministic()).count();
        format!(
            "fluents={} actions={} nondeterministic={}",
            self.fluents.len(),
            self.actions.len(),
            nondet
        )
    }

    /// Export as a parameterless PDDL domain and problem. Parsing and grounding
    /// the result with pruning off reproduces this task.
    pub fn to_pddl(&self) -> (String, String) {
        let mut arity: Vec<(String, usize)> = Vec::new();
        for f in &self.fluents {
            if !arity.iter().any(|(p, _)| p == &f.predicate) {
                arity.push((f.predicate.clone(), f.args.len()));
            }
        }
        let predicates = arity
            .iter()
            .map(|(p, n)| PredicateDecl {
                name: p.clone(),
                params: (0..*n)
                    .map(|i| TypedName {
                        name: format!("?x{i}"),
                        ty: "object".into(),
                    })
                    .collect(),
            })
            .collect();
        let atom = |id: usize| {
            let f = &self.fluents[id];
            AtomExpr {
                predicate: f.predicate.clone(),
                args: f.args.iter().map(|a| Term::Const(a.clone())).collect(),
            }
        };
        let actions = self
            .actions
            .iter()
            .map(|a| ActionSchema {
                name: a.pddl_name(),
                parameters: Vec::new(),
                precondition: a
                    .pre_pos
                    .iter()
                    .map(|&i| Literal {
                        atom: atom(i),
                        positive: true,
                    })
                    .chain(a.pre_neg.iter().map(|&i| Literal {
                        atom: atom(i),
                        positive: false,
                    }))
                    .collect(),
                outcomes: a
                    .outcomes
                    .iter()
                    .map(|o| Outcome {
                        add: o.add.iter().map(|&i| atom(i)).collect(),
                        del: o.del.iter().map(|&i| atom(i)).collect(),
                    })
                    .collect(),
            })
            .collect();
        let mut objects = Vec::new();
        let mut seen = HashSet::new();
        for f in &self.fluents {
            for a in &f.args {
                if seen.insert(a.clone()) {
                    objects.push(TypedName {
                        name: a.clone(),
                        ty: "object".into(),
                    });
                }
            }
        }
        let domain = Domain {
            name: self.domain_name.clone(),
            requirements: vec![
                ":strips".into(),
                ":typing".into(),
                ":non-deterministic".into(),
                ":negative-preconditions".into(),
            ],
            types: Vec::new(),
            // Ground action bodies mention objects, so they live in the domain.
            constants: objects,
            predicates,
            actions,
        };
        let problem = Problem {
            name: self.name.clone(),
            domain: self.domain_name.clone(),
            objects: Vec::new(),
            init: self.atoms(&self.init),
            goal: Some(
                self.goal_pos
                    .iter()
                    .map(|&i| GroundLiteral {
                        atom: self.fluents[i].clone(),
                        positive: true,
                    })
                    .chain(self.goal_neg.iter().map(|&i| GroundLiteral {
                        atom: self.fluents[i].clone(),
                        positive: false,
                    }))
                    .collect(),
            ),
        };
        (domain.to_string(), problem.to_string())
    }
}

struct Partial {
    schema: String,
    args: Vec<String>,
    pre_pos: Vec<GroundAtom>,
    pre_neg: Vec<GroundAtom>,
    outcomes: Vec<(Vec<GroundAtom>, Vec<GroundAtom>)>,
}

fn instantiate(a: &AtomExpr, binding: &HashMap<&str, &str>) -> GroundAtom {
    GroundAtom {
        predicate: a.predicate.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding[v.as_str()].to_string(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

pub fn ground(domain: &Domain, problem: &Problem) -> Result<GroundTask, PddlError> {
    ground_with(domain, problem, GroundOptions::default())
}

pub fn ground_with(
    domain: &Domain,
    problem: &Problem,
    options: GroundOptions,
) -> Result<GroundTask, PddlError> {
    let objects: Vec<&TypedName> = domain.constants.iter().chain(&problem.objects).collect();
    let init: HashSet<GroundAtom> = problem.init.iter().cloned().collect();
    let fluent_predicates: HashSet<&str> = domain
        .actions
        .iter()
        .flat_map(|a| a.outcomes.iter())
        .flat_map(|o| o.add.iter().chain(&o.del))
        .map(|a| a.predicate.as_str())
        .collect();

    let mut partials: Vec<Partial> = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<Vec<&str>> = schema
            .parameters
            .iter()
            .map(|p| {
                objects
                    .iter()
                    .filter(|o| domain.is_subtype(&o.ty, &p.ty))
                    .map(|o| o.name.as_str())
                    .collect()
            })
            .collect();
        let position: HashMap<&str, usize> = schema
            .parameters
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        // Static and equality literals are checked as soon as their last
        // variable is bound; bucket them by that depth.
        let mut checks: Vec<Vec<&Literal>> = vec![Vec::new(); schema.parameters.len() + 1];
        for lit in &schema.precondition {
            if lit.atom.is_equality() || !fluent_predicates.contains(lit.atom.predicate.as_str()) {
                let depth = lit
                    .atom
                    .args
                    .iter()
                    .filter_map(|t| match t {
                        Term::Var(v) => Some(position[v.as_str()] + 1),
                        Term::Const(_) => None,
                    })
                    .max()
                    .unwrap_or(0);
                checks[depth].push(lit);
            }
        }
        let passes = |lit: &Literal, binding: &HashMap<&str, &str>| -> bool {
            let g = instantiate(&lit.atom, binding);
            let holds = if lit.atom.is_equality() {
                g.args[0] == g.args[1]
            } else {
                init.contains(&g)
            };
            holds == lit.positive
        };

        let mut binding: HashMap<&str, &str> = HashMap::new();
        if !checks[0].iter().all(|l| passes(l, &binding)) {
            continue;
        }
        let n = schema.parameters.len();
        let mut choice = vec![0usize; n];
        let mut depth = 0;
        // Iterative backtracking over parameter bindings.
        loop {
            if depth == n {
                let args: Vec<String> = schema
                    .parameters
                    .iter()
                    .map(|p| binding[p.name.as_str()].to_string())
                    .collect();
                let mut pre_pos = Vec::new();
                let mut pre_neg = Vec::new();
                for lit in &schema.precondition {
                    if lit.atom.is_equality() || !fluent_predicates.contains(lit.atom.predicate.as_str()) {
                        continue;
                    }
                    let g = instantiate(&lit.atom, &binding);
                    if lit.positive {
                        pre_pos.push(g);
                    } else {
                        pre_neg.push(g);
                    }
                }
                let outcomes = schema
                    .outcomes
                    .iter()
                    .map(|o| {
                        (
                            o.add.iter().map(|a| instantiate(a, &binding)).collect(),
                            o.del.iter().map(|a| instantiate(a, &binding)).collect(),
                        )
                    })
                    .collect();
                if partials.len() >= options.max_ground_actions {
                    return Err(PddlError::GroundingLimit {
                        limit: options.max_ground_actions,
                    });
                }
                partials.push(Partial {
                    schema: schema.name.clone(),
                    args,
                    pre_pos,
                    pre_neg,
                    outcomes,
                });
                if n == 0 {
                    break;
                }
                depth -= 1;
                choice[depth] += 1;
                continue;
            }
            if choice[depth] >= candidates[depth].len() {
                binding.remove(schema.parameters[depth].name.as_str());
                if depth == 0 {
                    break;
                }
                choice[depth] = 0;
                depth -= 1;
                choice[depth] += 1;
                continue;
            }
            binding.insert(
                schema.parameters[depth].name.as_str(),
                candidates[depth][choice[depth]],
            );
            if checks[depth + 1].iter().all(|l| passes(l, &binding)) {
                depth += 1;
            } else {
                choice[depth] += 1;
            }
        }
    }

    if options.prune {
        let mut reached: HashSet<GroundAtom> = init.clone();
        let mut fired = vec![false; partials.len()];
        let mut changed = true;
        while changed {
            changed = false;
            for (i, p) in partials.iter().enumerate() {
                if fired[i] || !p.pre_pos.iter().all(|a| reached.contains(a)) {
                    continue;
                }
                fired[i] = true;
                changed = true;
                for (add, _) in &p.outcomes {
                    reached.extend(add.iter().cloned());
                }
            }
        }
        let mut keep = fired.into_iter();
        partials.retain(|_| keep.next().unwrap_or(false));
    }

    let goal: Vec<GroundLiteral> = problem.goal.clone().unwrap_or_default();
    let mut universe: BTreeSet<GroundAtom> = init.iter().cloned().collect();
    for p in &partials {
        universe.extend(p.pre_pos.iter().cloned());
        universe.extend(p.pre_neg.iter().cloned());
        for (add, del) in &p.outcomes {
            universe.extend(add.iter().cloned());
            universe.extend(del.iter().cloned());
        }
    }
    universe.extend(goal.iter().map(|l| l.atom.clone()));
    let fluents: Vec<GroundAtom> = universe.into_iter().collect();
    let index: HashMap<&GroundAtom, usize> = fluents.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let ids = |atoms: &[GroundAtom]| -> Vec<usize> {
        let set: BTreeSet<usize> = atoms.iter().map(|a| index[a]).collect();
        set.into_iter().collect()
    };

    let mut actions = Vec::with_capacity(partials.len());
    for p in &partials {
        let schema = domain.action(&p.schema).expect("schema exists");
        let labels = schema.outcome_labels();
        // `schema__a__b` names come from an exported task; restore them.
        let (schema_name, args) = if p.args.is_empty() && p.schema.contains("__") {
            let mut parts = p.schema.split("__").map(str::to_string);
            let head = parts.next().unwrap_or_default();
            (head, parts.collect())
        } else {
            (p.schema.clone(), p.args.clone())
        };
        actions.push(GroundAction {
            schema: schema_name,
            args,
            pre_pos: ids(&p.pre_pos),
            pre_neg: ids(&p.pre_neg),
            outcomes: p
                .outcomes
                .iter()
                .zip(labels)
                .map(|((add, del), label)| {
                    let add = ids(add);
                    // An atom both deleted and added ends up true.
                    let del = ids(del).into_iter().filter(|d| !add.contains(d)).collect();
                    GroundOutcome { label, add, del }
                })
                .collect(),
        });
    }
    let init_ids: Vec<usize> = init.iter().map(|a| index[a]).collect();
    let goal_pos = goal
        .iter()
        .filter(|l| l.positive)
        .map(|l| index[&l.atom])
        .collect();
    let goal_neg = goal
        .iter()
        .filter(|l| !l.positive)
        .map(|l| index[&l.atom])
        .collect();
    drop(index);
    Ok(GroundTask::from_parts(
        problem.name.clone(),
        domain.name.clone(),
        fluents,
        actions,
        init_ids,
        goal_pos,
        goal_neg,
    )
    .expect("grounding produces consistent ids"))
}
