use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

/// `?x` variables keep their leading `?`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomExpr {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomExpr {
    pub fn is_equality(&self) -> bool {
        self.predicate == "="
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Literal {
    pub atom: AtomExpr,
    pub positive: bool,
}

/// One possible result of an action: deletes are applied before adds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub add: Vec<AtomExpr>,
    pub del: Vec<AtomExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<TypedName>,
    pub precondition: Vec<Literal>,
    /// At least one outcome; more than one makes the action nondeterministic.
    pub outcomes: Vec<Outcome>,
}

impl ActionSchema {
    pub fn is_deterministic(&self) -> bool {
        self.outcomes.len() == 1
    }

    /// Short names for the outcomes: the first added predicate that tells an
    /// outcome apart from its siblings, else `outcome-<i>`.
    pub fn outcome_labels(&self) -> Vec<String> {
        if self.outcomes.len() == 1 {
            return vec!["effect".to_string()];
        }
        let mut labels: Vec<String> = self
            .outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| {
                o.add
                    .iter()
                    .find(|a| {
                        self.outcomes
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .all(|(_, other)| !other.add.iter().any(|b| b.predicate == a.predicate))
                    })
                    .map(|a| a.predicate.clone())
                    .unwrap_or_else(|| format!("outcome-{i}"))
            })
            .collect();
        let mut seen = std::collections::HashSet::new();
        for (i, l) in labels.iter_mut().enumerate() {
            if !seen.insert(l.clone()) {
                *l = format!("outcome-{i}");
            }
        }
        labels
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == "object" || self.types.iter().any(|t| t.name == name)
    }

    /// True if `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = ty.to_string();
        for _ in 0..=self.types.len() {
            if cur == ancestor {
                return true;
            }
            match self.types.iter().find(|t| t.name == cur) {
                Some(t) => cur = t.parent.clone(),
                None => return ancestor == "object",
            }
        }
        false
    }
}

/// A variable-free atom such as `(robot-at l1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parse `(pred a b)` or `pred`; whitespace-tolerant, lowercased.
    pub fn parse(text: &str) -> Option<GroundAtom> {
        let t = text.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .unwrap_or(t);
        let mut parts = inner.split_whitespace().map(str::to_lowercase);
        let predicate = parts.next()?;
        if predicate.contains(['(', ')']) {
            return None;
        }
        let args: Vec<String> = parts.collect();
        if args.iter().any(|a| a.contains(['(', ')'])) {
            return None;
        }
        Some(GroundAtom { predicate, args })
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundLiteral {
    pub atom: GroundAtom,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<GroundAtom>,
    /// Absent until a temporal goal has been compiled in.
    pub goal: Option<Vec<GroundLiteral>>,
}

// ---------------------------------------------------------------------------
// Canonical printing

fn typed_list(items: &[TypedName]) -> String {
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let ty = &items[i].ty;
        let mut j = i;
        while j < items.len() && &items[j].ty == ty {
            out.push(items[j].name.clone());
            j += 1;
        }
        out.push(format!("- {ty}"));
        i = j;
    }
    out.join(" ")
}

impl fmt::Display for AtomExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {}", a.as_str())?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

fn conjunction(parts: &[String]) -> String {
    match parts.len() {
        0 => "(and)".to_string(),
        1 => parts[0].clone(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn outcome_text(o: &Outcome) -> String {
    let parts: Vec<String> = o
        .add
        .iter()
        .map(|a| a.to_string())
        .chain(o.del.iter().map(|a| format!("(not {a})")))
        .collect();
    conjunction(&parts)
}

impl fmt::Display for ActionSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  (:action {}", self.name)?;
        writeln!(f, "    :parameters ({})", typed_list(&self.parameters))?;
        let pre: Vec<String> = self.precondition.iter().map(|l| l.to_string()).collect();
        writeln!(f, "    :precondition {}", conjunction(&pre))?;
        if self.outcomes.len() == 1 {
            writeln!(f, "    :effect {})", outcome_text(&self.outcomes[0]))
        } else {
            writeln!(f, "    :effect (oneof")?;
            for o in &self.outcomes {
                writeln!(f, "      {}", outcome_text(o))?;
            }
            writeln!(f, "    ))")
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            let items: Vec<TypedName> = self
                .types
                .iter()
                .map(|t| TypedName {
                    name: t.name.clone(),
                    ty: t.parent.clone(),
                })
                .collect();
            writeln!(f, "  (:types {})", typed_list(&items))?;
        }
        if !self.constants.is_empty() {
            writeln!(f, "  (:constants {})", typed_list(&self.constants))?;
        }
        writeln!(f, "  (:predicates")?;
        for p in &self.predicates {
            if p.params.is_empty() {
                writeln!(f, "    ({})", p.name)?;
            } else {
                writeln!(f, "    ({} {})", p.name, typed_list(&p.params))?;
            }
        }
        writeln!(f, "  )")?;
        for a in &self.actions {
            write!(f, "{a}")?;
        }
        writeln!(f, ")")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain)?;
        if !self.objects.is_empty() {
            writeln!(f, "  (:objects {})", typed_list(&self.objects))?;
        }
        writeln!(f, "  (:init")?;
        for a in &self.init {
            writeln!(f, "    {a}")?;
        }
        writeln!(f, "  )")?;
        if let Some(goal) = &self.goal {
            let parts: Vec<String> = goal
                .iter()
                .map(|l| {
                    if l.positive {
                        l.atom.to_string()
                    } else {
                        format!("(not {})", l.atom)
                    }
                })
                .collect();
            writeln!(f, "  (:goal {})", conjunction(&parts))?;
        }
        writeln!(f, ")")
    }
}
