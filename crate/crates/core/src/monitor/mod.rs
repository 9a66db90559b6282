//! Questions about a running plan, fluent extraction from the answers and
//! the soundness/completeness metrics, plus the experiment harness.

mod ask;
mod experiment;
mod extract;
mod score;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ExecError;
use crate::llmclient::LlmError;
use crate::pipeline::PipelineError;
use crate::planner::PlanError;

pub use ask::{ask, build_prompt, policy_text, Answer, QueryContext, ANSWER_SYSTEM_PROMPT};
pub use experiment::{
    run_experiments, ExperimentConfig, ExperimentReport, QuerySchedule, RunRecord, ScenarioSummary,
};
pub use extract::{extract_fluents, parse_fluent_answer, Admissible, Extraction, EXTRACTOR_SYSTEM_PROMPT};
pub use score::{
    instant_score, offset_histogram, score, AnswerEvaluation, FluentSet, HistogramBin, InstantScore,
    OffsetHistogram, Prediction,
};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("the question is empty")]
    EmptyQuestion,
    #[error("query instant {t} is outside 1..={horizon}")]
    InstantOutOfRange { t: usize, horizon: usize },
    #[error("no admissible {0} to extract fluents over")]
    NothingAdmissible(&'static str),
    #[error("the live session left the determinized plan at t = {0}")]
    Diverged(usize),
    #[error("bad question pool: {0}")]
    Questions(String),
    #[error("bad experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Present,
    Past,
    Future,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Present, Scenario::Past, Scenario::Future];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Present => "present",
            Scenario::Past => "past",
            Scenario::Future => "future",
        }
    }

    /// The category question reports are labelled with.
    pub fn exemplar(self) -> &'static str {
        match self {
            Scenario::Present => "What are you doing now?",
            Scenario::Past => "What did you do so far?",
            Scenario::Future => "What are you going to do next?",
        }
    }

    /// Best guess for a free-form question: pool match first, then tense cues.
    pub fn classify(question: &str) -> Scenario {
        let q = question.trim().to_lowercase();
        if let Some(found) = QuestionPool::builtin().find(&q) {
            return found.scenario;
        }
        let has = |cues: &[&str]| cues.iter().any(|c| q.contains(c));
        if has(&["next", "going to", "will ", "plan", "remain", "from now", "from here", "after this"]) {
            Scenario::Future
        } else if has(&["so far", "did ", "done", "have you", "until now", "previous", "since", "before", "happened"]) {
            Scenario::Past
        } else {
            Scenario::Present
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "present" | "now" => Ok(Scenario::Present),
            "past" | "so-far" | "so_far" => Ok(Scenario::Past),
            "future" | "next" => Ok(Scenario::Future),
            other => Err(MonitorError::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub scenario: Scenario,
    pub text: String,
    #[serde(default)]
    pub sampled: bool,
}

impl Question {
    pub fn new(scenario: Scenario, text: impl Into<String>) -> Self {
        Question {
            scenario,
            text: text.into(),
            sampled: false,
        }
    }
}

pub const QUESTIONS_PER_SCENARIO: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPool {
    #[serde(rename = "question")]
    questions: Vec<Question>,
}

impl QuestionPool {
    pub fn parse(text: &str) -> Result<Self, MonitorError> {
        let pool: QuestionPool = toml::from_str(text).map_err(|e| MonitorError::Questions(e.to_string()))?;
        for s in Scenario::ALL {
            let n = pool.of(s).count();
            if n != QUESTIONS_PER_SCENARIO {
                return Err(MonitorError::Questions(format!(
                    "{s} has {n} questions, expected {QUESTIONS_PER_SCENARIO}"
                )));
            }
        }
        Ok(pool)
    }

    pub fn builtin() -> &'static QuestionPool {
        static POOL: OnceLock<QuestionPool> = OnceLock::new();
        POOL.get_or_init(|| QuestionPool::parse(crate::fixtures::QUESTIONS).expect("fixture question pool is valid"))
    }

    pub fn of(&self, scenario: Scenario) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(move |q| q.scenario == scenario)
    }

    fn find(&self, lowercase: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.text.to_lowercase() == lowercase)
    }

    /// A question of `scenario` drawn uniformly.
    pub fn sample(&self, scenario: Scenario, rng: &mut impl Rng) -> Question {
        let qs: Vec<&Question> = self.of(scenario).collect();
        let mut q = qs[rng.random_range(0..qs.len())].clone();
        q.sampled = true;
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pool_has_six_per_scenario_led_by_the_exemplar() {
        let pool = QuestionPool::builtin();
        for s in Scenario::ALL {
            let qs: Vec<&Question> = pool.of(s).collect();
            assert_eq!(qs.len(), 6);
            assert_eq!(qs[0].text, s.exemplar());
            assert!(qs.iter().all(|q| Scenario::classify(&q.text) == s));
        }
        let bad = "[[question]]\nscenario = \"past\"\ntext = \"x\"\n";
        assert!(QuestionPool::parse(bad).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let pool = QuestionPool::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = std::collections::HashMap::new();
        let n = 6000;
        for _ in 0..n {
            let q = pool.sample(Scenario::Future, &mut rng);
            assert!(q.sampled);
            *counts.entry(q.text).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        // 1000 expected per question; 3 sigma is about 87
        for c in counts.values() {
            assert!((*c as i64 - 1000).abs() < 120, "{c}");
        }
    }

    #[test]
    fn free_questions_are_classified() {
        assert_eq!(Scenario::classify("What is your next action and why?"), Scenario::Future);
        assert_eq!(Scenario::classify("what have you done?"), Scenario::Past);
        assert_eq!(Scenario::classify("Are the grapes ripe?"), Scenario::Present);
        assert_eq!("next".parse::<Scenario>().unwrap(), Scenario::Future);
    }
}
