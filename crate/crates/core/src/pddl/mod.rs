//! FOND subset of PDDL: `:strips :typing :non-deterministic` with `oneof`
//! effects, negative preconditions and equality.

mod ast;
mod ground;
mod parse;
mod sexpr;

pub use ast::{
    ActionSchema, AtomExpr, Domain, GroundAtom, GroundLiteral, Literal, Outcome, PredicateDecl,
    Problem, Term, TypeDecl, TypedName,
};
pub use ground::{
    ground, ground_with, GroundAction, GroundOptions, GroundOutcome, GroundTask, State,
    DEFAULT_MAX_GROUND_ACTIONS,
};
pub use parse::{parse_domain, parse_problem};
pub use sexpr::Span;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {span}: {message}")]
    Syntax { span: Span, message: String },
    #[error("undeclared type `{name}` at {span}")]
    UndeclaredType { name: String, span: Span },
    #[error("undeclared predicate `{name}` at {span}")]
    UndeclaredPredicate { name: String, span: Span },
    #[error("undeclared object `{name}` at {span}")]
    UndeclaredObject { name: String, span: Span },
    #[error("unbound variable `{name}` at {span}")]
    UnboundVariable { name: String, span: Span },
    #[error("`{predicate}` expects {expected} arguments, found {found} at {span}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
        span: Span,
    },
    #[error("type mismatch at {span}: {message}")]
    TypeMismatch { message: String, span: Span },
    #[error("duplicate declaration of `{name}` at {span}")]
    Duplicate { name: String, span: Span },
    #[error("unsupported feature: {feature} at {span}")]
    Unsupported { feature: String, span: Span },
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("grounding exceeds {limit} ground actions")]
    GroundingLimit { limit: usize },
}
