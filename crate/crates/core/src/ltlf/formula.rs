use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LtlfError;

/// A propositional symbol. Lowercase letters, digits, `_` and `-` only.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Atom(String);

impl Atom {
    pub fn new(name: impl Into<String>) -> Result<Self, LtlfError> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(Atom(name))
        } else {
            Err(LtlfError::InvalidAtom(name))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        !name.is_empty()
            && name
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
            && !matches!(name, "true" | "false")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Atom {
    type Error = LtlfError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Atom::new(value)
    }
}

impl From<Atom> for String {
    fn from(a: Atom) -> String {
        a.0
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// LTLf formula over finite traces.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    WeakNext(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Globally(Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(Atom::new(name).expect("valid atom name"))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }
    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::Implies(Box::new(l), Box::new(r))
    }
    pub fn iff(l: Formula, r: Formula) -> Formula {
        Formula::Iff(Box::new(l), Box::new(r))
    }
    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }
    pub fn weak_next(f: Formula) -> Formula {
        Formula::WeakNext(Box::new(f))
    }
    pub fn until(l: Formula, r: Formula) -> Formula {
        Formula::Until(Box::new(l), Box::new(r))
    }
    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }
    pub fn globally(f: Formula) -> Formula {
        Formula::Globally(Box::new(f))
    }

    /// Conjunction of all formulas, `true` when empty.
    pub fn conjunction(items: impl IntoIterator<Item = Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f)
            | Formula::Next(f)
            | Formula::WeakNext(f)
            | Formula::Eventually(f)
            | Formula::Globally(f) => f.collect_atoms(out),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Implies(l, r)
            | Formula::Iff(l, r)
            | Formula::Until(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// Rename atoms through `f`; atoms for which `f` returns `None` are kept.
    pub fn map_atoms<F: FnMut(&Atom) -> Option<Formula>>(&self, f: &mut F) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a).unwrap_or_else(|| Formula::Atom(a.clone())),
            Formula::Not(g) => Formula::Not(Box::new(g.map_atoms(f))),
            Formula::Next(g) => Formula::Next(Box::new(g.map_atoms(f))),
            Formula::WeakNext(g) => Formula::WeakNext(Box::new(g.map_atoms(f))),
            Formula::Eventually(g) => Formula::Eventually(Box::new(g.map_atoms(f))),
            Formula::Globally(g) => Formula::Globally(Box::new(g.map_atoms(f))),
            Formula::And(l, r) => Formula::and(l.map_atoms(f), r.map_atoms(f)),
            Formula::Or(l, r) => Formula::or(l.map_atoms(f), r.map_atoms(f)),
            Formula::Implies(l, r) => Formula::implies(l.map_atoms(f), r.map_atoms(f)),
            Formula::Iff(l, r) => Formula::iff(l.map_atoms(f), r.map_atoms(f)),
            Formula::Until(l, r) => Formula::until(l.map_atoms(f), r.map_atoms(f)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(f)
            | Formula::Next(f)
            | Formula::WeakNext(f)
            | Formula::Eventually(f)
            | Formula::Globally(f) => 1 + f.depth(),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Implies(l, r)
            | Formula::Iff(l, r)
            | Formula::Until(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) | Formula::Iff(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Until(..) => 4,
            Formula::Not(_)
            | Formula::Next(_)
            | Formula::WeakNext(_)
            | Formula::Eventually(_)
            | Formula::Globally(_) => 5,
            Formula::True | Formula::False | Formula::Atom(_) => 6,
        }
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_ltlf(&text).map_err(serde::de::Error::custom)
    }
}

// Printing mirrors the parser: `&` and `|` associate to the left, `U`, `->`
// and `<->` to the right. Children are parenthesized exactly when the parser
// would otherwise build a different tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, g: &Formula, wrap: bool) -> fmt::Result {
            if wrap {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        }
        fn unary(f: &mut fmt::Formatter<'_>, op: &str, g: &Formula) -> fmt::Result {
            let sep = if op == "!" { "" } else { " " };
            f.write_str(op)?;
            if g.precedence() >= 5 {
                write!(f, "{sep}{g}")
            } else {
                write!(f, "{sep}({g})")
            }
        }
        let binary = |f: &mut fmt::Formatter<'_>, op: &str, l: &Formula, r: &Formula, left_assoc: bool| {
            let p = self.precedence();
            let lp = l.precedence();
            let rp = r.precedence();
            child(f, l, lp < p || (lp == p && !left_assoc))?;
            write!(f, " {op} ")?;
            child(f, r, rp < p || (rp == p && left_assoc))
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => unary(f, "!", g),
            Formula::Next(g) => unary(f, "X", g),
            Formula::WeakNext(g) => unary(f, "WX", g),
            Formula::Eventually(g) => unary(f, "F", g),
            Formula::Globally(g) => unary(f, "G", g),
            Formula::And(l, r) => binary(f, "&", l, r, true),
            Formula::Or(l, r) => binary(f, "|", l, r, true),
            Formula::Until(l, r) => binary(f, "U", l, r, false),
            Formula::Implies(l, r) => binary(f, "->", l, r, false),
            Formula::Iff(l, r) => binary(f, "<->", l, r, false),
        }
    }
}
