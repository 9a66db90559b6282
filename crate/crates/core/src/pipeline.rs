//! Parse, ground, compile and plan in one place, shared by the experiment
//! harness, the service and the command line.

use std::sync::Arc;

use thiserror::Error;

use crate::compiler::{compile_with, AtomBinding, AtomMap, CompileError, CompiledTask};
use crate::ltlf::{Atom, DfaOptions, Formula};
use crate::nlfront::{NlError, SymbolAlphabet};
use crate::pddl::{ground_with, parse_domain, parse_problem, Domain, GroundOptions, GroundTask, PddlError, Problem};
use crate::planner::{solve_with, verify_policy, PlanError, PlanGraph, Policy, SolveOptions, VerifyError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Landmarks(#[from] NlError),
    #[error("goal atom `{0}` is neither a landmark, a fluent nor an action of the task")]
    UnknownAtom(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// A parsed and grounded domain/problem pair with its landmark alphabet.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub domain_text: String,
    pub problem_text: String,
    pub domain: Domain,
    pub problem: Problem,
    pub task: GroundTask,
    pub alphabet: SymbolAlphabet,
}

/// A compiled goal with a verified policy.
#[derive(Clone, Debug)]
pub struct Planned {
    pub compiled: Arc<CompiledTask>,
    pub policy: Arc<Policy>,
    pub graph: Arc<PlanGraph>,
}

fn underscored(s: &str) -> String {
    s.replace('-', "_")
}

impl Workspace {
    pub fn new(domain_text: &str, problem_text: &str, alphabet: SymbolAlphabet) -> Result<Workspace, PipelineError> {
        Workspace::with_options(domain_text, problem_text, alphabet, GroundOptions::default())
    }

    pub fn with_options(
        domain_text: &str,
        problem_text: &str,
        alphabet: SymbolAlphabet,
        options: GroundOptions,
    ) -> Result<Workspace, PipelineError> {
        let domain = parse_domain(domain_text)?;
        let problem = parse_problem(problem_text, &domain)?;
        let task = ground_with(&domain, &problem, options)?;
        alphabet.atom_map(&task)?;
        Ok(Workspace {
            domain_text: domain_text.to_string(),
            problem_text: problem_text.to_string(),
            domain,
            problem,
            task,
            alphabet,
        })
    }

    pub fn vineyard() -> Workspace {
        Workspace::new(
            crate::fixtures::VINEYARD_DOMAIN,
            crate::fixtures::VINEYARD_PROBLEM,
            SymbolAlphabet::vineyard(),
        )
        .expect("fixture workspace is valid")
    }

    /// Bindings for the atoms of `goal`. An atom is looked up as a landmark
    /// identifier, then as a fluent written with underscores
    /// (`robot_at_l1`), then as an action schema (`call_support`).
    pub fn resolve_atoms(&self, goal: &Formula) -> Result<AtomMap, PipelineError> {
        let landmarks = self.alphabet.atom_map(&self.task)?;
        let mut map = AtomMap::new();
        for atom in goal.atoms() {
            let b = landmarks.get(&atom).cloned().or_else(|| self.binding_by_name(&atom));
            match b {
                Some(b) => {
                    map.insert(atom, b);
                }
                None => return Err(PipelineError::UnknownAtom(atom.to_string())),
            }
        }
        Ok(map)
    }

    fn binding_by_name(&self, atom: &Atom) -> Option<AtomBinding> {
        let name = atom.as_str();
        if let Some(f) = self.task.fluents().iter().find(|f| {
            let mut parts = vec![underscored(&f.predicate)];
            parts.extend(f.args.iter().map(|a| underscored(a)));
            parts.join("_") == name
        }) {
            return Some(AtomBinding::Fluent(f.clone()));
        }
        self.task
            .actions()
            .iter()
            .find(|a| underscored(&a.schema) == name)
            .map(|a| AtomBinding::Action(a.schema.clone()))
    }

    pub fn compile(&self, goal: &Formula) -> Result<CompiledTask, PipelineError> {
        let map = self.resolve_atoms(goal)?;
        Ok(compile_with(&self.task, goal, &map, DfaOptions::default())?)
    }

    pub fn plan(&self, goal: &Formula) -> Result<Planned, PipelineError> {
        self.plan_with(goal, SolveOptions::default())
    }

    pub fn plan_with(&self, goal: &Formula, options: SolveOptions) -> Result<Planned, PipelineError> {
        let compiled = self.compile(goal)?;
        plan_compiled(compiled, options)
    }
}

pub fn plan_compiled(compiled: CompiledTask, options: SolveOptions) -> Result<Planned, PipelineError> {
    let policy = solve_with(compiled.task(), options)?;
    let graph = verify_policy(compiled.task(), &policy)?;
    Ok(Planned {
        compiled: Arc::new(compiled),
        policy: Arc::new(policy),
        graph: Arc::new(graph),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::parse_ltlf;
    use crate::pddl::GroundAtom;

    #[test]
    fn atoms_resolve_in_order() {
        let w = Workspace::vineyard();
        let g = parse_ltlf("F robot_at_loc_l1 & F robot_at_l2 & F call_support & F box_full").unwrap();
        let m = w.resolve_atoms(&g).unwrap();
        let get = |s: &str| m.get(&Atom::new(s).unwrap()).unwrap().clone();
        assert_eq!(get("robot_at_loc_l1"), AtomBinding::Fluent(GroundAtom::new("robot-at", &["l1"])));
        assert_eq!(get("robot_at_l2"), AtomBinding::Fluent(GroundAtom::new("robot-at", &["l2"])));
        assert_eq!(get("call_support"), AtomBinding::Action("call-support".into()));
        assert_eq!(get("box_full"), AtomBinding::Fluent(GroundAtom::new("box-full", &[])));
        let bad = parse_ltlf("F the_moon").unwrap();
        assert!(matches!(w.resolve_atoms(&bad), Err(PipelineError::UnknownAtom(a)) if a == "the_moon"));
    }

    #[test]
    fn plans_a_visit() {
        let w = Workspace::vineyard();
        let p = w.plan(&parse_ltlf("F robot_at_loc_l1").unwrap()).unwrap();
        assert!(p.graph.nodes().len() >= 2);
    }
}
