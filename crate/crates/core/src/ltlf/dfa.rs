//! Deterministic automata for LTLf formulas.
//!
//! Construction is formula progression. The formula is put in negation normal
//! form and hash-consed into terms; an automaton state is a positive Boolean
//! combination of terms kept as a minimal clause set (DNF antichain), which is
//! canonical for monotone functions, so the reachable state set is finite.
//!
//! A state denotes the obligation on the *rest* of the trace, which may be
//! empty. Acceptance of a state is its truth on the empty suffix.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Atom, Formula, Interpretation, LtlfError, Trace};

pub const DEFAULT_MAX_STATES: usize = 10_000;
/// Guards are built by enumerating interpretations, so the alphabet is bounded.
pub const MAX_ALPHABET: usize = 16;

#[derive(Clone, Copy, Debug)]
pub struct DfaOptions {
    pub max_states: usize,
    pub minimize: bool,
}

impl Default for DfaOptions {
    fn default() -> Self {
        DfaOptions {
            max_states: DEFAULT_MAX_STATES,
            minimize: false,
        }
    }
}

/// Conjunction of literals over the automaton alphabet. The empty cube is `true`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub literals: Vec<(Atom, bool)>,
}

impl Cube {
    pub fn holds(&self, interp: &Interpretation) -> bool {
        self.literals
            .iter()
            .all(|(a, positive)| interp.contains(a) == *positive)
    }

    pub fn to_formula(&self) -> Formula {
        Formula::conjunction(self.literals.iter().map(|(a, pos)| {
            let atom = Formula::Atom(a.clone());
            if *pos {
                atom
            } else {
                Formula::not(atom)
            }
        }))
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return f.write_str("true");
        }
        for (i, (a, pos)) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            if !pos {
                f.write_str("!")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub guard: Cube,
    pub to: usize,
}

/// Complete deterministic automaton with symbolic (cube-guarded) edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dfa {
    alphabet: Vec<Atom>,
    num_states: usize,
    initial: usize,
    accepting: BTreeSet<usize>,
    /// Outgoing edges per state; guards of one state are pairwise disjoint.
    edges: Vec<Vec<Edge>>,
}

impl Dfa {
    /// Assemble an automaton from explicit parts, checking determinism and
    /// totality by interpretation enumeration.
    pub fn from_parts(
        alphabet: Vec<Atom>,
        num_states: usize,
        initial: usize,
        accepting: BTreeSet<usize>,
        edges: Vec<Edge>,
    ) -> Result<Self, LtlfError> {
        let mut alphabet = alphabet;
        alphabet.sort();
        alphabet.dedup();
        if initial >= num_states || accepting.iter().any(|&q| q >= num_states) {
            return Err(LtlfError::MalformedDfa("state id out of range".into()));
        }
        let mut per_state = vec![Vec::new(); num_states];
        for e in edges {
            if e.from >= num_states || e.to >= num_states {
                return Err(LtlfError::MalformedDfa("edge endpoint out of range".into()));
            }
            per_state[e.from].push(e);
        }
        let dfa = Dfa {
            alphabet,
            num_states,
            initial,
            accepting,
            edges: per_state,
        };
        dfa.check_deterministic()?;
        Ok(dfa)
    }

    pub fn alphabet(&self) -> &[Atom] {
        &self.alphabet
    }
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn initial(&self) -> usize {
        self.initial
    }
    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }
    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(&q)
    }
    pub fn edges_from(&self, q: usize) -> &[Edge] {
        &self.edges[q]
    }
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().flatten()
    }

    /// Successor of `q` under `interp`. Atoms outside the alphabet are ignored.
    pub fn step(&self, q: usize, interp: &Interpretation) -> usize {
        self.edges[q]
            .iter()
            .find(|e| e.guard.holds(interp))
            .map(|e| e.to)
            .expect("dfa transitions are total")
    }

    pub fn accepts(&self, t: &Trace) -> bool {
        let q = t
            .steps()
            .iter()
            .fold(self.initial, |q, letter| self.step(q, letter));
        self.is_accepting(q)
    }

    /// Check that every state's guards partition the interpretation space.
    pub fn check_deterministic(&self) -> Result<(), LtlfError> {
        if self.alphabet.len() > MAX_ALPHABET {
            return Err(LtlfError::AlphabetTooLarge(self.alphabet.len()));
        }
        for q in 0..self.num_states {
            for mask in 0u64..(1 << self.alphabet.len()) {
                let interp = interpretation(&self.alphabet, mask);
                let hits = self.edges[q].iter().filter(|e| e.guard.holds(&interp)).count();
                if hits != 1 {
                    return Err(LtlfError::MalformedDfa(format!(
                        "state {q}: {hits} guards hold under {{{}}}",
                        interp.iter().map(Atom::as_str).collect::<Vec<_>>().join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    /// States from which some accepting state is reachable (accepting states included).
    pub fn live_states(&self) -> BTreeSet<usize> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.num_states];
        for e in self.edges() {
            preds[e.to].push(e.from);
        }
        let mut live: BTreeSet<usize> = self.accepting.clone();
        let mut queue: VecDeque<usize> = self.accepting.iter().copied().collect();
        while let Some(t) = queue.pop_front() {
            for &p in &preds[t] {
                if live.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        live
    }

    /// Language equivalence over non-empty traces.
    pub fn equivalent(&self, other: &Dfa) -> bool {
        let mut atoms: Vec<Atom> = self.alphabet.iter().chain(&other.alphabet).cloned().collect();
        atoms.sort();
        atoms.dedup();
        assert!(atoms.len() <= MAX_ALPHABET, "alphabet too large for equivalence check");
        let letters: Vec<Interpretation> = (0u64..(1 << atoms.len()))
            .map(|m| interpretation(&atoms, m))
            .collect();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        for l in &letters {
            let pair = (self.step(self.initial, l), other.step(other.initial, l));
            if seen.insert(pair) {
                queue.push_back(pair);
            }
        }
        while let Some((p, q)) = queue.pop_front() {
            if self.is_accepting(p) != other.is_accepting(q) {
                return false;
            }
            for l in &letters {
                let pair = (self.step(p, l), other.step(q, l));
                if seen.insert(pair) {
                    queue.push_back(pair);
                }
            }
        }
        true
    }

    /// Moore-style partition refinement. Unreachable states are dropped.
    pub fn minimize(&self) -> Dfa {
        let n = self.alphabet.len();
        let letters: Vec<Interpretation> =
            (0u64..(1 << n)).map(|m| interpretation(&self.alphabet, m)).collect();
        let table: Vec<Vec<usize>> = (0..self.num_states)
            .map(|q| letters.iter().map(|l| self.step(q, l)).collect())
            .collect();

        let mut reachable = vec![false; self.num_states];
        let mut stack = vec![self.initial];
        reachable[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &r in &table[q] {
                if !reachable[r] {
                    reachable[r] = true;
                    stack.push(r);
                }
            }
        }
        let states: Vec<usize> = (0..self.num_states).filter(|&q| reachable[q]).collect();

        let mut class: HashMap<usize, usize> = states
            .iter()
            .map(|&q| (q, usize::from(self.is_accepting(q))))
            .collect();
        loop {
            let mut signatures: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut next: HashMap<usize, usize> = HashMap::new();
            for &q in &states {
                let sig = (class[&q], table[q].iter().map(|r| class[r]).collect::<Vec<_>>());
                let len = signatures.len();
                let id = *signatures.entry(sig).or_insert(len);
                next.insert(q, id);
            }
            let stable = signatures.len() == class.values().collect::<BTreeSet<_>>().len();
            class = next;
            if stable {
                break;
            }
        }
        // Renumber so the initial state is 0 and ids follow BFS order.
        let mut renum: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([self.initial]);
        renum.insert(class[&self.initial], 0);
        let mut visited = BTreeSet::from([self.initial]);
        let mut reps: Vec<usize> = vec![self.initial];
        while let Some(q) = queue.pop_front() {
            for &r in &table[q] {
                let c = class[&r];
                if !renum.contains_key(&c) {
                    renum.insert(c, reps.len());
                    reps.push(r);
                }
                if visited.insert(r) {
                    queue.push_back(r);
                }
            }
        }
        let accepting = reps
            .iter()
            .enumerate()
            .filter(|(_, &q)| self.is_accepting(q))
            .map(|(i, _)| i)
            .collect();
        let edges = reps
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let row: Vec<usize> = table[q].iter().map(|r| renum[&class[r]]).collect();
                split_edges(i, &self.alphabet, &row)
            })
            .collect();
        Dfa {
            alphabet: self.alphabet.clone(),
            num_states: reps.len(),
            initial: 0,
            accepting,
            edges,
        }
    }

    /// Human-readable listing: one `from -- guard --> to` line per edge.
    pub fn listing(&self) -> String {
        let mut out = format!(
            "dfa atoms=[{}] states={} initial={} accepting=[{}]\n",
            self.alphabet.iter().map(Atom::as_str).collect::<Vec<_>>().join(", "),
            self.num_states,
            self.initial,
            self.accepting.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ")
        );
        for e in self.edges() {
            out.push_str(&format!("{} -- {} --> {}\n", e.from, e.guard, e.to));
        }
        out
    }
}

pub fn interpretation(atoms: &[Atom], mask: u64) -> Interpretation {
    atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, a)| a.clone())
        .collect()
}

/// Turn a dense successor row (indexed by interpretation mask) into disjoint
/// cubes by Shannon splitting on atoms in alphabet order.
fn split_edges(from: usize, alphabet: &[Atom], row: &[usize]) -> Vec<Edge> {
    fn go(
        from: usize,
        alphabet: &[Atom],
        row: &[usize],
        var: usize,
        fixed: u64,
        values: u64,
        lits: &mut Vec<(Atom, bool)>,
        out: &mut Vec<Edge>,
    ) {
        let n = alphabet.len();
        let free: Vec<usize> = (var..n).collect();
        let mut target = None;
        let mut uniform = true;
        for sub in 0u64..(1 << free.len()) {
            let mut mask = values & fixed;
            for (k, &v) in free.iter().enumerate() {
                if sub & (1 << k) != 0 {
                    mask |= 1 << v;
                }
            }
            let t = row[mask as usize];
            match target {
                None => target = Some(t),
                Some(prev) if prev != t => {
                    uniform = false;
                    break;
                }
                _ => {}
            }
        }
        if uniform {
            out.push(Edge {
                from,
                guard: Cube {
                    literals: lits.clone(),
                },
                to: target.expect("non-empty row"),
            });
            return;
        }
        for value in [true, false] {
            lits.push((alphabet[var].clone(), value));
            let values = if value { values | (1 << var) } else { values };
            go(from, alphabet, row, var + 1, fixed | (1 << var), values, lits, out);
            lits.pop();
        }
    }
    let mut out = Vec::new();
    go(from, alphabet, row, 0, 0, 0, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// Progression

type TermId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(TermId, TermId),
    Or(TermId, TermId),
    Next(TermId),
    WeakNext(TermId),
    Until(TermId, TermId),
    Release(TermId, TermId),
    Eventually(TermId),
    Globally(TermId),
}

/// Minimal DNF over terms: `[]` is false, `[[]]` is true.
type Dnf = Vec<Vec<TermId>>;

fn dnf_true() -> Dnf {
    vec![Vec::new()]
}

fn minimize_dnf(mut clauses: Dnf) -> Dnf {
    for c in &mut clauses {
        c.sort_unstable();
        c.dedup();
    }
    clauses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    clauses.dedup();
    let mut kept: Dnf = Vec::new();
    for c in clauses {
        if !kept.iter().any(|k| is_subset(k, &c)) {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}

fn is_subset(small: &[TermId], big: &[TermId]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn dnf_or(a: &Dnf, b: &Dnf) -> Dnf {
    minimize_dnf(a.iter().chain(b).cloned().collect())
}

fn dnf_and(a: &Dnf, b: &Dnf) -> Dnf {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut c = x.clone();
            c.extend_from_slice(y);
            out.push(c);
        }
    }
    minimize_dnf(out)
}

struct Builder {
    nodes: Vec<Node>,
    ids: HashMap<Node, TermId>,
    atom_index: HashMap<Atom, usize>,
    f_true: TermId,
    g_false: TermId,
}

impl Builder {
    fn new(alphabet: &[Atom]) -> Self {
        let mut b = Builder {
            nodes: Vec::new(),
            ids: HashMap::new(),
            atom_index: alphabet.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect(),
            f_true: 0,
            g_false: 0,
        };
        let t = b.intern(Node::True);
        let f = b.intern(Node::False);
        b.f_true = b.intern(Node::Eventually(t));
        b.g_false = b.intern(Node::Globally(f));
        b
    }

    fn intern(&mut self, n: Node) -> TermId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as TermId;
        self.nodes.push(n.clone());
        self.ids.insert(n, id);
        id
    }

    fn nnf(&mut self, f: &Formula, positive: bool) -> TermId {
        let node = match (f, positive) {
            (Formula::True, true) | (Formula::False, false) => Node::True,
            (Formula::True, false) | (Formula::False, true) => Node::False,
            (Formula::Atom(a), pos) => Node::Lit(self.atom_index[a], pos),
            (Formula::Not(g), pos) => return self.nnf(g, !pos),
            (Formula::And(l, r), true) | (Formula::Or(l, r), false) => {
                Node::And(self.nnf(l, positive), self.nnf(r, positive))
            }
            (Formula::Or(l, r), true) | (Formula::And(l, r), false) => {
                Node::Or(self.nnf(l, positive), self.nnf(r, positive))
            }
            (Formula::Implies(l, r), true) => Node::Or(self.nnf(l, false), self.nnf(r, true)),
            (Formula::Implies(l, r), false) => Node::And(self.nnf(l, true), self.nnf(r, false)),
            (Formula::Iff(l, r), pos) => {
                let (lp, ln) = (self.nnf(l, true), self.nnf(l, false));
                let (rp, rn) = (self.nnf(r, true), self.nnf(r, false));
                let (x, y) = if pos {
                    (self.intern(Node::And(lp, rp)), self.intern(Node::And(ln, rn)))
                } else {
                    (self.intern(Node::And(lp, rn)), self.intern(Node::And(ln, rp)))
                };
                Node::Or(x, y)
            }
            (Formula::Next(g), true) | (Formula::WeakNext(g), false) => {
                Node::Next(self.nnf(g, positive))
            }
            (Formula::WeakNext(g), true) | (Formula::Next(g), false) => {
                Node::WeakNext(self.nnf(g, positive))
            }
            (Formula::Eventually(g), true) | (Formula::Globally(g), false) => {
                Node::Eventually(self.nnf(g, positive))
            }
            (Formula::Globally(g), true) | (Formula::Eventually(g), false) => {
                Node::Globally(self.nnf(g, positive))
            }
            (Formula::Until(l, r), true) => Node::Until(self.nnf(l, true), self.nnf(r, true)),
            (Formula::Until(l, r), false) => {
                Node::Release(self.nnf(l, false), self.nnf(r, false))
            }
        };
        self.intern(node)
    }

    /// The obligation "term holds on the remaining suffix", with Boolean
    /// structure pushed into the DNF.
    fn var(&self, t: TermId) -> Dnf {
        match self.nodes[t as usize] {
            Node::True => dnf_true(),
            Node::False => Vec::new(),
            Node::And(a, b) => dnf_and(&self.var(a), &self.var(b)),
            Node::Or(a, b) => dnf_or(&self.var(a), &self.var(b)),
            _ => vec![vec![t]],
        }
    }

    fn progress(&self, t: TermId, mask: u64, memo: &mut HashMap<TermId, Dnf>) -> Dnf {
        if let Some(d) = memo.get(&t) {
            return d.clone();
        }
        let d = match self.nodes[t as usize] {
            Node::True => dnf_true(),
            Node::False => Vec::new(),
            Node::Lit(i, pos) => {
                if (mask & (1 << i) != 0) == pos {
                    dnf_true()
                } else {
                    Vec::new()
                }
            }
            Node::And(a, b) => dnf_and(&self.progress(a, mask, memo), &self.progress(b, mask, memo)),
            Node::Or(a, b) => dnf_or(&self.progress(a, mask, memo), &self.progress(b, mask, memo)),
            Node::Next(a) => dnf_and(&self.var(a), &vec![vec![self.f_true]]),
            Node::WeakNext(a) => dnf_or(&self.var(a), &vec![vec![self.g_false]]),
            Node::Eventually(a) => dnf_or(&self.progress(a, mask, memo), &vec![vec![t]]),
            Node::Globally(a) => dnf_and(&self.progress(a, mask, memo), &vec![vec![t]]),
            Node::Until(a, b) => {
                let keep = dnf_and(&self.progress(a, mask, memo), &vec![vec![t]]);
                dnf_or(&self.progress(b, mask, memo), &keep)
            }
            Node::Release(a, b) => {
                let keep = dnf_or(&self.progress(a, mask, memo), &vec![vec![t]]);
                dnf_and(&self.progress(b, mask, memo), &keep)
            }
        };
        memo.insert(t, d.clone());
        d
    }

    fn progress_state(&self, state: &Dnf, mask: u64, memo: &mut HashMap<TermId, Dnf>) -> Dnf {
        let mut acc: Dnf = Vec::new();
        for clause in state {
            let mut c = dnf_true();
            for &t in clause {
                c = dnf_and(&c, &self.progress(t, mask, memo));
                if c.is_empty() {
                    break;
                }
            }
            acc.extend(c);
        }
        minimize_dnf(acc)
    }

    /// Truth of a term on the empty suffix.
    fn empty_ok(&self, t: TermId) -> bool {
        match self.nodes[t as usize] {
            Node::True => true,
            Node::False => false,
            Node::Lit(_, pos) => !pos,
            Node::And(a, b) => self.empty_ok(a) && self.empty_ok(b),
            Node::Or(a, b) => self.empty_ok(a) || self.empty_ok(b),
            Node::Next(_) | Node::Until(..) | Node::Eventually(_) => false,
            Node::WeakNext(_) | Node::Release(..) | Node::Globally(_) => true,
        }
    }

    fn accepting(&self, state: &Dnf) -> bool {
        state
            .iter()
            .any(|clause| clause.iter().all(|&t| self.empty_ok(t)))
    }
}

pub fn to_dfa(f: &Formula) -> Result<Dfa, LtlfError> {
    to_dfa_with(f, DfaOptions::default())
}

pub fn to_dfa_with(f: &Formula, opts: DfaOptions) -> Result<Dfa, LtlfError> {
    let alphabet: Vec<Atom> = f.atoms().into_iter().collect();
    if alphabet.len() > MAX_ALPHABET {
        return Err(LtlfError::AlphabetTooLarge(alphabet.len()));
    }
    let mut b = Builder::new(&alphabet);
    let root = b.nnf(f, true);
    let initial = b.var(root);

    let mut index: HashMap<Dnf, usize> = HashMap::new();
    let mut states: Vec<Dnf> = Vec::new();
    index.insert(initial.clone(), 0);
    states.push(initial);

    let letters = 1u64 << alphabet.len();
    let mut edges = Vec::new();
    let mut q = 0;
    while q < states.len() {
        let mut memos: Vec<HashMap<TermId, Dnf>> = Vec::new();
        let mut row = Vec::with_capacity(letters as usize);
        for mask in 0..letters {
            memos.push(HashMap::new());
            let next = b.progress_state(&states[q], mask, memos.last_mut().unwrap());
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= opts.max_states {
                        return Err(LtlfError::StateLimit(opts.max_states));
                    }
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next);
                    id
                }
            };
            row.push(id);
        }
        edges.push(split_edges(q, &alphabet, &row));
        q += 1;
    }
    let accepting = states
        .iter()
        .enumerate()
        .filter(|(_, s)| b.accepting(s))
        .map(|(i, _)| i)
        .collect();
    let dfa = Dfa {
        alphabet,
        num_states: states.len(),
        initial: 0,
        accepting,
        edges,
    };
    Ok(if opts.minimize { dfa.minimize() } else { dfa })
}

pub fn dfa_accepts(d: &Dfa, t: &Trace) -> bool {
    d.accepts(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::{evaluate, parse_ltlf};

    fn dfa(text: &str) -> Dfa {
        to_dfa(&parse_ltlf(text).unwrap()).unwrap()
    }

    fn all_traces(atoms: &[Atom], max_len: usize) -> Vec<Trace> {
        let letters: Vec<Interpretation> = (0u64..(1 << atoms.len()))
            .map(|m| interpretation(atoms, m))
            .collect();
        let mut out = Vec::new();
        let mut frontier: Vec<Vec<Interpretation>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for prefix in &frontier {
                for l in &letters {
                    let mut p = prefix.clone();
                    p.push(l.clone());
                    out.push(Trace::new(p.clone()).unwrap());
                    next.push(p);
                }
            }
            frontier = next;
        }
        out
    }

    #[test]
    fn globally_has_two_states() {
        let d = dfa("G a");
        assert_eq!(d.num_states(), 2);
        assert!(d.is_accepting(d.initial()));
        let a = Atom::new("a").unwrap();
        let on_a = d.step(d.initial(), &BTreeSet::from([a]));
        let on_not_a = d.step(d.initial(), &BTreeSet::new());
        assert_eq!(on_a, d.initial());
        assert!(!d.is_accepting(on_not_a));
        assert_eq!(d.step(on_not_a, &BTreeSet::new()), on_not_a);
    }

    #[test]
    fn eventually_has_two_states() {
        let d = dfa("F a");
        assert_eq!(d.num_states(), 2);
        assert!(!d.is_accepting(d.initial()));
        assert_eq!(d.step(d.initial(), &BTreeSet::new()), d.initial());
        let a = Atom::new("a").unwrap();
        let sink = d.step(d.initial(), &BTreeSet::from([a.clone()]));
        assert!(d.is_accepting(sink));
        assert_eq!(d.step(sink, &BTreeSet::new()), sink);
        assert!(!d.accepts(&Trace::from_names(&[&[], &[]]).unwrap()));
    }

    #[test]
    fn bound_delay_matches_semantics_exhaustively() {
        let f = parse_ltlf("G (b <-> X a)").unwrap();
        let d = to_dfa(&f).unwrap();
        d.check_deterministic().unwrap();
        let atoms = vec![Atom::new("a").unwrap(), Atom::new("b").unwrap()];
        for t in all_traces(&atoms, 4) {
            assert_eq!(d.accepts(&t), evaluate(&f, &t), "{t:?}");
        }
        assert!(d.accepts(&Trace::from_names(&[&["b"], &["a"]]).unwrap()));
    }

    #[test]
    fn hand_built_single_state_dfa() {
        let d = Dfa::from_parts(
            vec![Atom::new("a").unwrap()],
            1,
            0,
            BTreeSet::from([0]),
            vec![Edge {
                from: 0,
                guard: Cube { literals: vec![] },
                to: 0,
            }],
        )
        .unwrap();
        assert!(d.accepts(&Trace::from_names(&[&[]]).unwrap()));
    }

    #[test]
    fn non_total_dfa_rejected() {
        let a = Atom::new("a").unwrap();
        let r = Dfa::from_parts(
            vec![a.clone()],
            1,
            0,
            BTreeSet::new(),
            vec![Edge {
                from: 0,
                guard: Cube {
                    literals: vec![(a, true)],
                },
                to: 0,
            }],
        );
        assert!(matches!(r, Err(LtlfError::MalformedDfa(_))));
    }

    #[test]
    fn state_cap_is_enforced() {
        let f = parse_ltlf("F (a & X X X X b)").unwrap();
        let r = to_dfa_with(
            &f,
            DfaOptions {
                max_states: 3,
                minimize: false,
            },
        );
        assert_eq!(r, Err(LtlfError::StateLimit(3)));
    }

    #[test]
    fn minimization_preserves_language() {
        for text in ["G (b <-> X a)", "F a & F b", "a U (b U a)", "G (a -> F b)", "!(X a) | WX b"] {
            let f = parse_ltlf(text).unwrap();
            let d = to_dfa(&f).unwrap();
            let m = d.minimize();
            m.check_deterministic().unwrap();
            assert!(m.num_states() <= d.num_states());
            assert!(d.equivalent(&m), "{text}");
        }
    }

    #[test]
    fn equivalence_ignores_syntax() {
        assert!(dfa("F a").equivalent(&dfa("true U a")));
        assert!(dfa("G a").equivalent(&dfa("!F !a")));
        assert!(!dfa("X a").equivalent(&dfa("WX a")));
        assert!(!dfa("F a").equivalent(&dfa("F b")));
    }

    #[test]
    fn listing_mentions_every_edge() {
        let d = dfa("F a");
        let text = d.listing();
        assert!(text.starts_with("dfa atoms=[a] states=2 initial=0 accepting=[1]"));
        assert_eq!(text.lines().count(), 1 + d.edges().count());
    }
}
