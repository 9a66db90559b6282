//! The eleven activity patterns, their LTLf templates and English phrasings.
//!
//! Templates are written over the placeholders `a` (slot 0) and `b` (slot 1).
//! A phrasing refers to slot `i` as `{i}`, or `{ig}` for its gerund form
//! ("calling the support robot" for "call the support robot").

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ltlf::{parse_ltlf, Atom, Formula};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Visit,
    SequencedVisit,
    OrderedVisit,
    StrictOrderedVisit,
    GlobalAvoidance,
    BoundDelay,
    DelayedReaction,
    PromptReaction,
    Wait,
    PastAvoidance,
    FutureAvoidance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskClass {
    Navigation,
    Generic,
}

impl fmt::Display for TaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskClass::Navigation => "navigation",
            TaskClass::Generic => "generic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phrasing {
    pub text: &'static str,
    /// False for phrasings the translator understands but the dataset
    /// generator never emits.
    pub generate: bool,
}

const fn gen(text: &'static str) -> Phrasing {
    Phrasing { text, generate: true }
}

const fn read_only(text: &'static str) -> Phrasing {
    Phrasing { text, generate: false }
}

const VISIT: &[Phrasing] = &[
    gen("go to {0}"),
    gen("visit {0}"),
    gen("reach {0}"),
    gen("eventually go to {0}"),
    gen("head to {0}"),
    gen("make your way to {0}"),
    gen("at some point be at {0}"),
];

const SEQUENCED_VISIT: &[Phrasing] = &[
    gen("go to {0} and then to {1}"),
    gen("visit {0} and afterwards visit {1}"),
    gen("first reach {0} then reach {1}"),
    gen("go to {0} and later go to {1}"),
];

const ORDERED_VISIT: &[Phrasing] = &[
    gen("visit {0} before {1} and do not visit {1} until you reach {0}"),
    gen("reach {1} but only after you have been to {0}"),
    gen("go to {0} first and only then go to {1}"),
];

const STRICT_ORDERED_VISIT: &[Phrasing] = &[
    gen("visit {0} exactly once and then visit {1}"),
    gen("go to {0} once and then to {1} without returning to {0} in between"),
    gen("reach {0} only once before reaching {1}"),
];

const GLOBAL_AVOIDANCE: &[Phrasing] = &[
    gen("never go to {0}"),
    gen("avoid {0}"),
    gen("always stay away from {0}"),
    gen("do not ever visit {0}"),
    gen("keep out of {0} at all times"),
    read_only("never {0}"),
];

const BOUND_DELAY: &[Phrasing] = &[
    gen("{1} right after {0} and never otherwise"),
    gen("whenever {0} holds {1} exactly at the next step and only then"),
    gen("do {1} exactly one step after {0} and at no other time"),
    read_only("you may only {1} if you were at {0} just before and each time you are at {0} you must follow up by {1g}"),
];

const DELAYED_REACTION: &[Phrasing] = &[
    gen("whenever {0} eventually {1}"),
    gen("every time {0} then {1} at some later point"),
    gen("if {0} then sooner or later {1}"),
    gen("each time {0} make sure that {1} eventually"),
];

const PROMPT_REACTION: &[Phrasing] = &[
    gen("whenever {0} you must {1} immediately after"),
    gen("every time {0} you must {1} right away"),
    gen("as soon as {0} then {1} at the next step"),
];

const WAIT: &[Phrasing] = &[
    gen("{0} until {1}"),
    gen("keep doing {0} until {1}"),
    gen("{0} until eventually {1}"),
];

const PAST_AVOIDANCE: &[Phrasing] = &[
    gen("do not {0} until {1}"),
    gen("avoid {0} before {1}"),
    gen("never {0} until {1}"),
    gen("{0} must not happen before {1}"),
];

const FUTURE_AVOIDANCE: &[Phrasing] = &[
    gen("once {0} never {1} afterwards"),
    gen("after {0} happens {1} must never happen again"),
    gen("if {0} then from the next step on never {1}"),
];

impl Pattern {
    pub const ALL: [Pattern; 11] = [
        Pattern::Visit,
        Pattern::SequencedVisit,
        Pattern::OrderedVisit,
        Pattern::StrictOrderedVisit,
        Pattern::GlobalAvoidance,
        Pattern::BoundDelay,
        Pattern::DelayedReaction,
        Pattern::PromptReaction,
        Pattern::Wait,
        Pattern::PastAvoidance,
        Pattern::FutureAvoidance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Visit => "visit",
            Pattern::SequencedVisit => "sequenced-visit",
            Pattern::OrderedVisit => "ordered-visit",
            Pattern::StrictOrderedVisit => "strict-ordered-visit",
            Pattern::GlobalAvoidance => "global-avoidance",
            Pattern::BoundDelay => "bound-delay",
            Pattern::DelayedReaction => "delayed-reaction",
            Pattern::PromptReaction => "prompt-reaction",
            Pattern::Wait => "wait",
            Pattern::PastAvoidance => "past-avoidance",
            Pattern::FutureAvoidance => "future-avoidance",
        }
    }

    pub fn class(self) -> TaskClass {
        match self {
            Pattern::Visit
            | Pattern::SequencedVisit
            | Pattern::OrderedVisit
            | Pattern::StrictOrderedVisit
            | Pattern::GlobalAvoidance => TaskClass::Navigation,
            _ => TaskClass::Generic,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Pattern::Visit | Pattern::GlobalAvoidance => 1,
            _ => 2,
        }
    }

    /// Template over `a` and `b`.
    pub fn template(self) -> &'static str {
        match self {
            Pattern::Visit => "F a",
            Pattern::SequencedVisit => "F(a & F b)",
            Pattern::OrderedVisit => "F(a & F b) & (!b U a)",
            Pattern::StrictOrderedVisit => "F(a & F b) & (!b U a) & (!a U (a & X(!a U b)))",
            Pattern::GlobalAvoidance => "G !a",
            Pattern::BoundDelay => "G(a <-> X b)",
            Pattern::DelayedReaction => "G(a -> F b)",
            Pattern::PromptReaction => "G(a -> X b)",
            Pattern::Wait => "a U b",
            Pattern::PastAvoidance => "!a U b",
            Pattern::FutureAvoidance => "G(a -> X G !b)",
        }
    }

    pub fn template_formula(self) -> Formula {
        parse_ltlf(self.template()).expect("pattern templates parse")
    }

    pub fn phrasings(self) -> &'static [Phrasing] {
        match self {
            Pattern::Visit => VISIT,
            Pattern::SequencedVisit => SEQUENCED_VISIT,
            Pattern::OrderedVisit => ORDERED_VISIT,
            Pattern::StrictOrderedVisit => STRICT_ORDERED_VISIT,
            Pattern::GlobalAvoidance => GLOBAL_AVOIDANCE,
            Pattern::BoundDelay => BOUND_DELAY,
            Pattern::DelayedReaction => DELAYED_REACTION,
            Pattern::PromptReaction => PROMPT_REACTION,
            Pattern::Wait => WAIT,
            Pattern::PastAvoidance => PAST_AVOIDANCE,
            Pattern::FutureAvoidance => FUTURE_AVOIDANCE,
        }
    }

    pub fn generated_phrasings(self) -> impl Iterator<Item = &'static Phrasing> {
        self.phrasings().iter().filter(|p| p.generate)
    }

    /// Substitutes `args[i]` for slot `i`.
    ///
    /// # Panics
    /// If `args.len() != self.arity()`.
    pub fn instantiate(self, args: &[Formula]) -> Formula {
        assert_eq!(args.len(), self.arity(), "{} takes {} arguments", self.name(), self.arity());
        self.template_formula().map_atoms(&mut |a: &Atom| match a.as_str() {
            "a" => Some(args[0].clone()),
            "b" => Some(args[1].clone()),
            _ => None,
        })
    }

    pub fn instantiate_atoms(self, atoms: &[Atom]) -> Formula {
        let args: Vec<Formula> = atoms.iter().cloned().map(Formula::Atom).collect();
        self.instantiate(&args)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase().replace([' ', '_'], "-");
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| format!("unknown pattern `{s}`"))
    }
}

/// A piece of a phrasing: literal text or a slot reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Piece<'a> {
    Text(&'a str),
    Slot { index: usize, gerund: bool },
}

pub(crate) fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Text(&rest[..open]));
        }
        let close = open + rest[open..].find('}').expect("phrasing slots are closed");
        let inner = &rest[open + 1..close];
        let (digits, gerund) = match inner.strip_suffix('g') {
            Some(d) => (d, true),
            None => (inner, false),
        };
        out.push(Piece::Slot {
            index: digits.parse().expect("slot index"),
            gerund,
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

/// Gerund of a verb phrase: the first word gets `-ing`.
pub fn gerund(phrase: &str) -> String {
    let (head, tail) = match phrase.split_once(' ') {
        Some((h, t)) => (h, Some(t)),
        None => (phrase, None),
    };
    let stem = if head.ends_with('e') && !head.ends_with("ee") && head.len() > 2 {
        &head[..head.len() - 1]
    } else {
        head
    };
    match tail {
        Some(t) => format!("{stem}ing {t}"),
        None => format!("{stem}ing"),
    }
}

/// Fills a phrasing with the given mentions.
pub fn fill(phrasing: &str, mentions: &[&str]) -> String {
    pieces(phrasing)
        .into_iter()
        .map(|p| match p {
            Piece::Text(t) => t.to_string(),
            Piece::Slot { index, gerund: false } => mentions[index].to_string(),
            Piece::Slot { index, gerund: true } => gerund(mentions[index]),
        })
        .collect()
}

/// Parses one step list of the characteristic-trace notation: steps separated
/// by whitespace, atoms within a step joined by `+`, `-` for the empty step.
pub fn parse_trace_notation(text: &str) -> Result<crate::ltlf::Trace, crate::ltlf::LtlfError> {
    let steps = text
        .split_whitespace()
        .map(|step| {
            if step == "-" {
                Ok(Default::default())
            } else {
                step.split('+').map(Atom::new).collect()
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    crate::ltlf::Trace::new(steps)
}

#[derive(Clone, Debug, Deserialize)]
pub struct CharacteristicTraces {
    pub name: String,
    pub accept: Vec<String>,
    pub reject: Vec<String>,
}

#[derive(Deserialize)]
struct TraceFile {
    pattern: Vec<CharacteristicTraces>,
}

pub fn parse_characteristic_traces(text: &str) -> Result<Vec<(Pattern, CharacteristicTraces)>, String> {
    let file: TraceFile = toml::from_str(text).map_err(|e| e.to_string())?;
    file.pattern
        .into_iter()
        .map(|c| Ok((c.name.parse::<Pattern>()?, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::{evaluate, to_dfa};

    #[test]
    fn templates_parse_with_their_arity() {
        for p in Pattern::ALL {
            let atoms = p.template_formula().atoms();
            assert_eq!(atoms.len(), p.arity(), "{p}");
            assert_eq!(p.name().parse::<Pattern>().unwrap(), p);
        }
    }

    #[test]
    fn class_split_is_five_and_six() {
        let nav = Pattern::ALL.iter().filter(|p| p.class() == TaskClass::Navigation).count();
        assert_eq!(nav, 5);
    }

    #[test]
    fn instantiate_substitutes_slots() {
        let f = Pattern::BoundDelay.instantiate_atoms(&[Atom::new("x").unwrap(), Atom::new("y").unwrap()]);
        assert_eq!(f.to_string(), "G (x <-> X y)");
        let g = Pattern::Visit.instantiate(&[parse_ltlf("p & q").unwrap()]);
        let t = crate::ltlf::Trace::from_names(&[&["p"], &["p", "q"]]).unwrap();
        assert!(evaluate(&g, &t));
    }

    #[test]
    fn phrasings_are_distinct_and_use_all_slots() {
        let mut seen = std::collections::BTreeSet::new();
        for p in Pattern::ALL {
            assert!(p.generated_phrasings().count() >= 3, "{p}");
            for ph in p.phrasings() {
                assert!(seen.insert(ph.text), "duplicate phrasing {}", ph.text);
                let slots: std::collections::BTreeSet<usize> = pieces(ph.text)
                    .into_iter()
                    .filter_map(|x| match x {
                        Piece::Slot { index, .. } => Some(index),
                        _ => None,
                    })
                    .collect();
                assert_eq!(slots.len(), p.arity(), "{}", ph.text);
                let ps = pieces(ph.text);
                // adjacent slots cannot be told apart in raw sentences
                for w in ps.windows(3) {
                    if let (Piece::Slot { .. }, Piece::Text(t), Piece::Slot { .. }) = (&w[0], &w[1], &w[2]) {
                        assert!(!t.trim().is_empty(), "adjacent slots in {}", ph.text);
                    }
                }
                // single-letter words would be confused with placeholders
                assert!(
                    ph.text.split(' ').all(|w| w.len() != 1),
                    "single-letter word in {}",
                    ph.text
                );
            }
        }
    }

    #[test]
    fn gerunds() {
        assert_eq!(gerund("call the support robot"), "calling the support robot");
        assert_eq!(gerund("move to line 1"), "moving to line 1");
        assert_eq!(gerund("see"), "seeing");
        assert_eq!(fill("say {0} not {1g}", &["x", "harvest it"]), "say x not harvesting it");
    }

    #[test]
    fn trace_notation() {
        let t = parse_trace_notation("a+b - b").unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.steps()[1].is_empty());
        assert!(parse_trace_notation("").is_err());
    }

    #[test]
    fn sequenced_visit_differs_from_ordered_visit() {
        let s = to_dfa(&Pattern::SequencedVisit.template_formula()).unwrap();
        let o = to_dfa(&Pattern::OrderedVisit.template_formula()).unwrap();
        assert!(!s.equivalent(&o));
    }
}
