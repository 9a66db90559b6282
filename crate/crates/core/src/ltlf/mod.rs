//! Finite-trace linear temporal logic: syntax, semantics and automata.

mod dfa;
mod formula;
mod parser;
mod semantics;

pub use dfa::{
    dfa_accepts, interpretation, to_dfa, to_dfa_with, Cube, Dfa, DfaOptions, Edge,
    DEFAULT_MAX_STATES, MAX_ALPHABET,
};
pub use formula::{Atom, Formula};
pub use parser::parse_ltlf;
pub use semantics::{evaluate, Interpretation, Trace};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlfError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown operator '{token}' at offset {position}")]
    UnknownOperator { token: String, position: usize },
    #[error("invalid atom name '{0}'")]
    InvalidAtom(String),
    #[error("traces must contain at least one step")]
    EmptyTrace,
    #[error("automaton exceeds the state limit of {0}")]
    StateLimit(usize),
    #[error("formula has {0} atoms, more than the supported {MAX_ALPHABET}")]
    AlphabetTooLarge(usize),
    #[error("malformed automaton: {0}")]
    MalformedDfa(String),
}
