use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pddl::State;

/// What a chooser sees when an action with several outcomes is executed.
#[derive(Debug)]
pub struct ChoiceContext<'a> {
    pub state: &'a State,
    pub action: usize,
    pub action_name: &'a str,
    pub labels: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChooserError {
    #[error("outcome script exhausted after {0} choices")]
    ScriptExhausted(usize),
    #[error("scripted outcome `{entry}` is not one of {options:?} for {action}")]
    InvalidEntry {
        entry: String,
        action: String,
        options: Vec<String>,
    },
    #[error("chooser aborted: {0}")]
    Aborted(String),
}

/// Picks outcomes for nondeterministic actions. Deterministic actions never
/// reach the chooser.
pub trait Chooser: Send {
    /// `Ok(None)` means the choice must come from outside (interactive use).
    fn choose(&mut self, ctx: &ChoiceContext<'_>) -> Result<Option<usize>, ChooserError>;
}

/// Uniform choice from a ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SeededChooser {
    rng: ChaCha8Rng,
}

impl SeededChooser {
    pub fn new(seed: u64) -> Self {
        SeededChooser {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Chooser for SeededChooser {
    fn choose(&mut self, ctx: &ChoiceContext<'_>) -> Result<Option<usize>, ChooserError> {
        Ok(Some(self.rng.random_range(0..ctx.labels.len())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Index(usize),
    Label(String),
}

impl FromStr for ScriptEntry {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s.parse::<usize>() {
            Ok(i) => ScriptEntry::Index(i),
            Err(_) => ScriptEntry::Label(s.to_lowercase()),
        })
    }
}

impl std::fmt::Display for ScriptEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScriptEntry::Index(i) => write!(f, "{i}"),
            ScriptEntry::Label(l) => f.write_str(l),
        }
    }
}

/// Replays a fixed list of outcome indices or labels, one per nondeterministic step.
#[derive(Debug, Clone)]
pub struct ScriptedChooser {
    script: Vec<ScriptEntry>,
    pos: usize,
}

impl ScriptedChooser {
    pub fn new(script: Vec<ScriptEntry>) -> Self {
        ScriptedChooser { script, pos: 0 }
    }

    /// One entry per line or comma; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let script = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(','))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("infallible"))
            .collect();
        ScriptedChooser::new(script)
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.pos
    }
}

impl Chooser for ScriptedChooser {
    fn choose(&mut self, ctx: &ChoiceContext<'_>) -> Result<Option<usize>, ChooserError> {
        let entry = self
            .script
            .get(self.pos)
            .ok_or(ChooserError::ScriptExhausted(self.pos))?;
        let idx = match entry {
            ScriptEntry::Index(i) if *i < ctx.labels.len() => Some(*i),
            ScriptEntry::Index(_) => None,
            ScriptEntry::Label(l) => ctx.labels.iter().position(|x| x == l),
        };
        let idx = idx.ok_or_else(|| ChooserError::InvalidEntry {
            entry: entry.to_string(),
            action: ctx.action_name.to_string(),
            options: ctx.labels.to_vec(),
        })?;
        self.pos += 1;
        Ok(Some(idx))
    }
}

/// Holds at most one choice supplied by the caller; asks when empty.
#[derive(Debug, Clone, Default)]
pub struct InteractiveChooser {
    pending: Option<usize>,
}

impl InteractiveChooser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn supply(&mut self, outcome: usize) {
        self.pending = Some(outcome);
    }
}

impl Chooser for InteractiveChooser {
    fn choose(&mut self, ctx: &ChoiceContext<'_>) -> Result<Option<usize>, ChooserError> {
        match self.pending.take() {
            Some(i) if i < ctx.labels.len() => Ok(Some(i)),
            Some(i) => Err(ChooserError::InvalidEntry {
                entry: i.to_string(),
                action: ctx.action_name.to_string(),
                options: ctx.labels.to_vec(),
            }),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(state: &'a State, labels: &'a [String]) -> ChoiceContext<'a> {
        ChoiceContext {
            state,
            action: 0,
            action_name: "(check-grape g1 l1)",
            labels,
        }
    }

    fn labels() -> Vec<String> {
        vec!["ripe".into(), "unripe".into(), "unknown".into()]
    }

    #[test]
    fn script_accepts_labels_and_indices() {
        let s = State::empty(1);
        let l = labels();
        let mut c = ScriptedChooser::parse("unripe\n0 # ripe\n");
        assert_eq!(c.choose(&ctx(&s, &l)).unwrap(), Some(1));
        assert_eq!(c.choose(&ctx(&s, &l)).unwrap(), Some(0));
        assert_eq!(c.choose(&ctx(&s, &l)), Err(ChooserError::ScriptExhausted(2)));
    }

    #[test]
    fn bad_script_entry_names_the_options() {
        let s = State::empty(1);
        let l = labels();
        let mut c = ScriptedChooser::parse("rotten");
        let err = c.choose(&ctx(&s, &l)).unwrap_err();
        assert!(err.to_string().contains("unknown"), "{err}");
    }

    #[test]
    fn seeded_is_reproducible() {
        let s = State::empty(1);
        let l = labels();
        let draw = |seed| {
            let mut c = SeededChooser::new(seed);
            (0..32).map(|_| c.choose(&ctx(&s, &l)).unwrap().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn interactive_asks_until_supplied() {
        let s = State::empty(1);
        let l = labels();
        let mut c = InteractiveChooser::new();
        assert_eq!(c.choose(&ctx(&s, &l)).unwrap(), None);
        c.supply(2);
        assert_eq!(c.choose(&ctx(&s, &l)).unwrap(), Some(2));
        assert_eq!(c.choose(&ctx(&s, &l)).unwrap(), None);
    }
}
