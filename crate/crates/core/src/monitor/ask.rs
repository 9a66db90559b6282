use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::compiler::CompiledTask;
use crate::executor::{ExecutionTrace, Session};
use crate::llmclient::{Attachment, BackendKind, ChatRequest, LlmClient};
use crate::planner::{PlanGraph, Policy};
use crate::pipeline::Workspace;

use super::{MonitorError, Question, Scenario};

pub const ANSWER_SYSTEM_PROMPT: &str = "You are the task manager of an agricultural robot. \
You execute the policy below, computed by a planner for the PDDL domain and problem shown. \
Answer the operator's question about your execution truthfully and briefly, using the policy, \
the PDDL files and your current knowledge base. Mention the relevant facts as PDDL atoms.";

/// What a question is answered from.
pub struct QueryContext<'a> {
    pub workspace: &'a Workspace,
    pub session: &'a Session,
    /// The complete determinized plan trace containing the session's
    /// executed prefix. Future questions are judged against it.
    pub plan: &'a ExecutionTrace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question: Question,
    pub t: usize,
    pub text: String,
    pub backend: String,
    #[serde(skip)]
    pub prompt: String,
}

/// World-turn states of the plan graph with the prescribed action, one per
/// line: `{fluents} q=N -> (action)`.
pub fn policy_text(compiled: &CompiledTask, policy: &Policy, graph: &PlanGraph) -> String {
    let task = compiled.task();
    let mut out = String::new();
    for s in graph.nodes() {
        if !compiled.is_world_turn(s) || task.is_goal(s) {
            continue;
        }
        let Some(a) = policy.action(s) else { continue };
        let fluents: Vec<String> = task.atoms(&compiled.project(s)).iter().map(|f| f.to_string()).collect();
        let q = compiled
            .automaton_state(s)
            .map(|q| format!(" q={q}"))
            .unwrap_or_default();
        let _ = writeln!(out, "{{{}}}{q} -> {}", fluents.join(" "), task.action(a).name());
    }
    out
}

pub fn build_prompt(question: &str, policy: &str, domain: &str, problem: &str, knowledge_base: &[String]) -> String {
    let mut p = String::new();
    for (label, body) in [
        ("QUESTION", question.trim()),
        ("POLICY", policy.trim_end()),
        ("DOMAIN", domain.trim_end()),
        ("PROBLEM", problem.trim_end()),
    ] {
        let _ = write!(p, "### {label}\n{body}\n\n");
    }
    let _ = write!(p, "### KNOWLEDGE BASE\n{}\n", knowledge_base.join("\n"));
    p
}

fn facts_for(scenario: Scenario, t: usize, plan: &ExecutionTrace, universe: Vec<String>) -> Attachment {
    let steps: Vec<(usize, Vec<String>)> = plan
        .states
        .iter()
        .filter(|s| match scenario {
            Scenario::Present => s.t == t,
            Scenario::Past => s.t <= t,
            Scenario::Future => s.t >= t,
        })
        .map(|s| (s.t, s.fluents.clone()))
        .collect();
    Attachment::Facts {
        steps,
        universe,
        per_instant: scenario != Scenario::Present,
    }
}

/// Sends the question with the policy, the PDDL texts and the knowledge base
/// and returns the answer verbatim. Mock backends answer from the plan.
pub fn ask(ctx: &QueryContext<'_>, question: &Question, client: &LlmClient) -> Result<Answer, MonitorError> {
    if question.text.trim().is_empty() {
        return Err(MonitorError::EmptyQuestion);
    }
    let session = ctx.session;
    let t = session.t();
    let executed = &session.trace().states;
    if ctx.plan.len() < t || ctx.plan.states[..t] != executed[..] {
        let at = executed
            .iter()
            .zip(&ctx.plan.states)
            .position(|(a, b)| a != b)
            .map_or(ctx.plan.len() + 1, |i| i + 1);
        return Err(MonitorError::Diverged(at));
    }
    let kb = session.knowledge_base();
    let prompt = build_prompt(
        &question.text,
        &policy_text(session.compiled(), session.policy(), session.graph()),
        &ctx.workspace.domain_text,
        &ctx.workspace.problem_text,
        &kb,
    );
    let mut req = ChatRequest::new(ANSWER_SYSTEM_PROMPT, prompt.clone());
    let cfg = client.config();
    if cfg.is_mock() && !matches!(cfg.kind, BackendKind::MockScripted { .. }) {
        let compiled = session.compiled();
        let universe: Vec<String> = compiled.task().fluents()[..compiled.world_fluents()]
            .iter()
            .map(|f| f.to_string())
            .collect();
        req = req.with_attachment(facts_for(question.scenario, t, ctx.plan, universe));
    }
    let r = client.chat(&req)?;
    Ok(Answer {
        question: question.clone(),
        t,
        text: r.text,
        backend: r.backend,
        prompt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::plan_trace;
    use crate::llmclient::{BackendConfig, ScriptRule};
    use crate::ltlf::parse_ltlf;
    use crate::planner::{determinize, SeededChooser};

    fn setup() -> (Workspace, Session, ExecutionTrace) {
        let w = Workspace::vineyard();
        let p = w.plan(&parse_ltlf("F robot_at_loc_l1").unwrap()).unwrap();
        let plan = determinize(p.compiled.task(), &p.policy, &p.graph, &mut SeededChooser::new(0), Default::default())
            .unwrap();
        let full = plan_trace(&p.compiled, &plan);
        let s = Session::start_verified(p.compiled, p.policy, p.graph, Box::new(SeededChooser::new(0)));
        (w, s, full)
    }

    #[test]
    fn oracle_enumerates_the_knowledge_base() {
        let (w, s, full) = setup();
        let ctx = QueryContext {
            workspace: &w,
            session: &s,
            plan: &full,
        };
        let c = LlmClient::new(BackendConfig::oracle()).unwrap();
        let a = ask(&ctx, &Question::new(Scenario::Present, Scenario::Present.exemplar()), &c).unwrap();
        assert_eq!(a.text, "Right now (grape-at g1 l1), (grape-at g2 l2), (robot-at l0).");
        let a = ask(&ctx, &Question::new(Scenario::Future, "What next?"), &c).unwrap();
        assert_eq!(
            a.text,
            "At step 1: (grape-at g1 l1), (grape-at g2 l2), (robot-at l0).\nAt step 2: (grape-at g1 l1), (grape-at g2 l2), (robot-at l1)."
        );
        let order: Vec<usize> = ["### QUESTION", "### POLICY", "### DOMAIN", "### PROBLEM", "### KNOWLEDGE BASE"]
            .iter()
            .map(|h| a.prompt.find(h).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(a.prompt.contains("-> (move l0 l1)"));
        assert!(a.prompt.contains("(define (domain vineyard)"));
    }

    #[test]
    fn scripted_answer_is_verbatim() {
        let (w, s, full) = setup();
        let ctx = QueryContext {
            workspace: &w,
            session: &s,
            plan: &full,
        };
        let c = LlmClient::new(BackendConfig::new(BackendKind::MockScripted {
            rules: vec![ScriptRule {
                when: "next action".into(),
                answer: "I will move to line 1 to check the grapes.".into(),
            }],
            file: None,
        }))
        .unwrap();
        let q = Question::new(Scenario::Future, "What is your next action and why?");
        assert_eq!(ask(&ctx, &q, &c).unwrap().text, "I will move to line 1 to check the grapes.");
        assert!(matches!(
            ask(&ctx, &Question::new(Scenario::Present, "  "), &c),
            Err(MonitorError::EmptyQuestion)
        ));
    }

    #[test]
    fn plans_that_disagree_with_the_session_are_refused() {
        let (w, mut s, full) = setup();
        s.step(None).unwrap();
        let mut other = full.clone();
        other.states[1].fluents.push("(box-full)".into());
        let ctx = QueryContext {
            workspace: &w,
            session: &s,
            plan: &other,
        };
        let c = LlmClient::new(BackendConfig::oracle()).unwrap();
        assert!(matches!(
            ask(&ctx, &Question::new(Scenario::Past, "x"), &c),
            Err(MonitorError::Diverged(2))
        ));
    }
}
