//! Temporal task specification, FOND planning and runtime questioning for
//! robot activities.

pub mod compiler;
pub mod executor;
pub mod fixtures;
pub mod llmclient;
pub mod ltlf;
pub mod monitor;
pub mod nlfront;
pub mod pddl;
pub mod pipeline;
pub mod planner;

pub use compiler::{AtomBinding, AtomMap, CompiledTask};
pub use executor::{ExecutionTrace, Session};
pub use llmclient::{BackendConfig, LlmClient};
pub use ltlf::{parse_ltlf, Atom, Formula, Trace};
pub use monitor::{AnswerEvaluation, Prediction, Scenario};
pub use nlfront::{SymbolAlphabet, Translation};
pub use pddl::{Domain, GroundAtom, GroundTask, Problem, State};
pub use pipeline::{Planned, Workspace};
pub use planner::{PlanGraph, Policy, SolutionClass};
