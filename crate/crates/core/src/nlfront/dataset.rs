//! Template-generated (sentence, formula) pairs and the extraction-accuracy
//! harness.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::landmarks::{Landmark, SymbolAlphabet, SymbolClass};
use super::patterns::{fill, gerund, pieces, Pattern, Piece, TaskClass};
use super::rer::RerProfile;
use super::{Frontend, NlError};
use crate::ltlf::{to_dfa, Formula};

pub const NAVIGATION_PER_PATTERN: usize = 42;
pub const GENERIC_PER_PATTERN: usize = 51;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub pattern: Pattern,
    pub class: TaskClass,
    pub sentence: String,
    /// Spans of the sentence that name the formula's symbols.
    pub expressions: Vec<String>,
    pub formula: Formula,
}

fn pool(alphabet: &SymbolAlphabet, class: TaskClass) -> Vec<&Landmark> {
    match class {
        TaskClass::Navigation => alphabet.of_class(SymbolClass::Location).collect(),
        TaskClass::Generic => alphabet.landmarks().iter().collect(),
    }
}

/// `counts` pairs each pattern with its number of sentences. Navigation
/// patterns draw symbols from the locations, generic ones from the whole
/// alphabet. Phrasings are used round-robin.
pub fn generate_dataset_with(
    alphabet: &SymbolAlphabet,
    counts: &[(Pattern, usize)],
    seed: u64,
) -> Result<Vec<DatasetRecord>, NlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(pattern, n) in counts {
        let symbols = pool(alphabet, pattern.class());
        if symbols.len() < pattern.arity() {
            return Err(NlError::AlphabetTooSmall {
                pattern,
                needed: pattern.arity(),
                available: symbols.len(),
            });
        }
        let phrasings: Vec<&str> = pattern.generated_phrasings().map(|p| p.text).collect();
        for i in 0..n {
            let text = phrasings[i % phrasings.len()];
            let mut chosen: Vec<&Landmark> = Vec::with_capacity(pattern.arity());
            while chosen.len() < pattern.arity() {
                let l = symbols[rng.random_range(0..symbols.len())];
                if !chosen.iter().any(|c| c.identifier == l.identifier) {
                    chosen.push(l);
                }
            }
            let mentions: Vec<&str> = chosen
                .iter()
                .map(|l| {
                    let all: Vec<&str> = l.mentions().collect();
                    all[rng.random_range(0..all.len())]
                })
                .collect();
            let mut expressions: Vec<String> = Vec::new();
            for p in pieces(text) {
                if let Piece::Slot { index, gerund: g } = p {
                    let e = if g { gerund(mentions[index]) } else { mentions[index].to_string() };
                    if !expressions.contains(&e) {
                        expressions.push(e);
                    }
                }
            }
            let atoms: Vec<_> = chosen.iter().map(|l| l.identifier.clone()).collect();
            out.push(DatasetRecord {
                pattern,
                class: pattern.class(),
                sentence: fill(text, &mentions),
                expressions,
                formula: pattern.instantiate_atoms(&atoms),
            });
        }
    }
    Ok(out)
}

pub fn generate_dataset(
    alphabet: &SymbolAlphabet,
    patterns: &[Pattern],
    n_per_pattern: usize,
    seed: u64,
) -> Result<Vec<DatasetRecord>, NlError> {
    let counts: Vec<(Pattern, usize)> = patterns.iter().map(|&p| (p, n_per_pattern)).collect();
    generate_dataset_with(alphabet, &counts, seed)
}

/// 42 sentences per navigation pattern and 51 per generic pattern (516).
pub fn default_dataset(alphabet: &SymbolAlphabet, seed: u64) -> Result<Vec<DatasetRecord>, NlError> {
    let counts: Vec<(Pattern, usize)> = Pattern::ALL
        .iter()
        .map(|&p| {
            let n = match p.class() {
                TaskClass::Navigation => NAVIGATION_PER_PATTERN,
                TaskClass::Generic => GENERIC_PER_PATTERN,
            };
            (p, n)
        })
        .collect();
    generate_dataset_with(alphabet, &counts, seed)
}

/// One `sentence<TAB>formula` line per record.
pub fn to_tsv(records: &[DatasetRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}\t{}\n", r.sentence, r.formula))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassScore {
    pub correct: usize,
    pub total: usize,
}

impl ClassScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub sentence: String,
    pub expected: Formula,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub profile: RerProfile,
    pub navigation: ClassScore,
    pub generic: ClassScore,
    pub failures: Vec<ExtractionFailure>,
}

/// Whether two formulas have the same language.
pub fn same_language(a: &Formula, b: &Formula) -> Result<bool, NlError> {
    let da = to_dfa(a).map_err(NlError::Formula)?;
    let db = to_dfa(b).map_err(NlError::Formula)?;
    Ok(da.equivalent(&db))
}

/// Runs the full frontend on every record. A translation counts as correct
/// iff its automaton accepts the same traces as the expected formula's.
pub fn evaluate_extraction(dataset: &[DatasetRecord], frontend: &Frontend) -> ExtractionResult {
    let mut res = ExtractionResult {
        profile: frontend.config().profile,
        navigation: ClassScore::default(),
        generic: ClassScore::default(),
        failures: Vec::new(),
    };
    for r in dataset {
        let outcome = frontend
            .translate(&r.sentence, Some(&r.expressions))
            .and_then(|t| same_language(&t.grounded, &r.formula).map(|ok| (ok, t.grounded)));
        let score = match r.class {
            TaskClass::Navigation => &mut res.navigation,
            TaskClass::Generic => &mut res.generic,
        };
        score.total += 1;
        match outcome {
            Ok((true, _)) => score.correct += 1,
            Ok((false, got)) => res.failures.push(ExtractionFailure {
                sentence: r.sentence.clone(),
                expected: r.formula.clone(),
                reason: format!("translated to {got}"),
            }),
            Err(e) => res.failures.push(ExtractionFailure {
                sentence: r.sentence.clone(),
                expected: r.formula.clone(),
                reason: e.to_string(),
            }),
        }
    }
    res
}

/// Extraction accuracy per prompt profile and task class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub rows: Vec<ExtractionResult>,
}

impl fmt::Display for ExtractionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|r| r.profile.label().len())
            .chain(std::iter::once("Experiment".len()))
            .max()
            .unwrap_or(10);
        writeln!(f, "{:<width$}  {:>16}  {:>13}", "Experiment", "Navigation tasks", "Generic tasks")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<width$}  {:>15.0}%  {:>12.0}%",
                r.profile.label(),
                100.0 * r.navigation.accuracy(),
                100.0 * r.generic.accuracy()
            )?;
        }
        Ok(())
    }
}
