//! Natural language to LTLf: referring-expression recognition, symbolic
//! translation over placeholders, and grounding onto landmark identifiers.

pub mod dataset;
pub mod ground;
pub mod landmarks;
pub mod patterns;
pub mod rer;
pub mod text;
pub mod translate;

pub use dataset::{
    default_dataset, evaluate_extraction, generate_dataset, generate_dataset_with, same_language, to_tsv,
    ClassScore, DatasetRecord, ExtractionReport, ExtractionResult,
};
pub use ground::{ground_symbols, rank_landmarks, Candidate, Grounding, Similarity, SymbolMatch, DEFAULT_FLOOR};
pub use landmarks::{Landmark, SymbolAlphabet, SymbolClass};
pub use patterns::{Pattern, TaskClass};
pub use rer::{recognize_referring_expressions, OracleTable, ReferringExpression, RerProfile};
pub use translate::{symbolic_translate, Placeholder, SymbolicTranslation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llmclient::{BackendKind, LlmClient, LlmError};
use crate::ltlf::{Formula, LtlfError};

#[derive(Debug, Clone, Error)]
pub enum NlError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("no referring expressions found in `{0}`")]
    EmptyExtraction(String),
    #[error("{0} referring expressions exceed the 26 available placeholders")]
    TooManyExpressions(usize),
    #[error("no activity pattern matches `{0}` and no translation backend is configured")]
    NoPattern(String),
    #[error("backend translation `{answer}` rejected: {message}")]
    BadTranslation { answer: String, message: String },
    #[error("placeholder mismatch: {0}")]
    PlaceholderMismatch(String),
    #[error("cannot ground `{expression}`; closest landmarks: {}", candidates.iter().map(|c| format!("{} ({:.2})", c.identifier, c.score)).collect::<Vec<_>>().join(", "))]
    Unresolved {
        expression: String,
        candidates: Vec<Candidate>,
    },
    #[error("pattern {pattern} needs {needed} symbols, the alphabet offers {available}")]
    AlphabetTooSmall {
        pattern: Pattern,
        needed: usize,
        available: usize,
    },
    #[error("landmarks: {0}")]
    Landmarks(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error(transparent)]
    Formula(LtlfError),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub profile: RerProfile,
    /// Minimum similarity a landmark needs to be chosen.
    pub floor: f64,
    /// Ground with backend embeddings instead of token overlap.
    pub embeddings: bool,
    /// Ask the backend for a formula when no pattern matches.
    pub translation_fallback: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            profile: RerProfile::Augmented18,
            floor: DEFAULT_FLOOR,
            embeddings: false,
            translation_fallback: false,
        }
    }
}

/// Every intermediate result of one translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub sentence: String,
    pub expressions: Vec<ReferringExpression>,
    pub symbolic: String,
    pub placeholders: Vec<Placeholder>,
    pub pattern: Option<Pattern>,
    pub ungrounded: Formula,
    pub grounded: Formula,
    pub matches: Vec<SymbolMatch>,
}

pub struct Frontend {
    alphabet: SymbolAlphabet,
    client: LlmClient,
    oracle: OracleTable,
    config: FrontendConfig,
}

impl Frontend {
    pub fn new(alphabet: SymbolAlphabet, client: LlmClient, config: FrontendConfig) -> Self {
        Frontend {
            alphabet,
            client,
            oracle: OracleTable::builtin(),
            config,
        }
    }

    pub fn with_oracle(mut self, oracle: OracleTable) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }

    /// `truth` lists the expected spans; mock backends answer with them.
    pub fn translate(&self, sentence: &str, truth: Option<&[String]>) -> Result<Translation, NlError> {
        let expressions =
            recognize_referring_expressions(sentence, self.config.profile, &self.client, truth, &self.oracle)?;
        let fallback = self.config.translation_fallback
            && (!self.client.config().is_mock() || matches!(self.client.config().kind, BackendKind::MockScripted { .. }));
        let sym = symbolic_translate(sentence, &expressions, fallback.then_some(&self.client))?;
        let similarity = if self.config.embeddings {
            Similarity::Embedding(&self.client)
        } else {
            Similarity::Lexical
        };
        let g = ground_symbols(&sym.formula, &sym.placeholders, &self.alphabet, similarity, self.config.floor)?;
        Ok(Translation {
            sentence: sentence.to_string(),
            expressions,
            symbolic: sym.symbolic,
            placeholders: sym.placeholders,
            pattern: sym.pattern,
            ungrounded: sym.formula,
            grounded: g.formula,
            matches: g.matches,
        })
    }
}
