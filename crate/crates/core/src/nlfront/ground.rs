//! Symbol grounding: each placeholder becomes the identifier of the most
//! similar landmark.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::landmarks::{Landmark, SymbolAlphabet};
use super::text::{content_stems, jaccard, normalize};
use super::translate::Placeholder;
use super::NlError;
use crate::llmclient::{cosine, LlmClient};
use crate::ltlf::{Atom, Formula};

pub const DEFAULT_FLOOR: f64 = 0.15;

#[derive(Clone, Copy)]
pub enum Similarity<'a> {
    /// Token overlap with an edit-distance tiebreak.
    Lexical,
    /// Cosine similarity of backend embeddings.
    Embedding(&'a LlmClient),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub identifier: Atom,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolMatch {
    pub placeholder: Atom,
    pub expressions: Vec<String>,
    pub identifier: Atom,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub formula: Formula,
    pub matches: Vec<SymbolMatch>,
}

fn fields(l: &Landmark) -> Vec<String> {
    let mut out: Vec<String> = l.mentions().map(normalize).collect();
    out.push(l.identifier.as_str().replace(['_', '-'], " "));
    out
}

/// Best Jaccard overlap of stemmed content words between the expression and
/// any of the landmark's description, aliases and identifier tokens.
pub fn lexical_score(expression: &str, landmark: &Landmark) -> f64 {
    let e = content_stems(expression);
    fields(landmark)
        .iter()
        .map(|f| jaccard(&e, &content_stems(f)))
        .fold(0.0, f64::max)
}

fn edit_distance(expression: &str, landmark: &Landmark) -> f64 {
    let e = normalize(expression);
    fields(landmark)
        .iter()
        .map(|f| 1.0 - strsim::normalized_levenshtein(&e, f))
        .fold(1.0, f64::min)
}

fn embedding_score(client: &LlmClient, expression: &str, landmark: &Landmark) -> Result<f64, NlError> {
    let e = client.embed(expression)?;
    let mut best = f64::NEG_INFINITY;
    for m in landmark.mentions() {
        best = best.max(cosine(&e, &client.embed(m)?) as f64);
    }
    Ok(best)
}

/// Landmarks by decreasing similarity to any of the expressions. Ties go
/// to the smaller normalised edit distance, then to the identifier.
pub fn rank_landmarks(
    expressions: &[String],
    alphabet: &SymbolAlphabet,
    similarity: Similarity<'_>,
) -> Result<Vec<Candidate>, NlError> {
    let mut scored: Vec<(f64, f64, &Landmark)> = Vec::with_capacity(alphabet.len());
    for l in alphabet.landmarks() {
        let mut score = f64::NEG_INFINITY;
        for e in expressions {
            let s = match similarity {
                Similarity::Lexical => lexical_score(e, l),
                Similarity::Embedding(c) => embedding_score(c, e, l)?,
            };
            score = score.max(s);
        }
        let dist = expressions.iter().map(|e| edit_distance(e, l)).fold(1.0, f64::min);
        scored.push((score, dist, l));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .then_with(|| a.2.identifier.cmp(&b.2.identifier))
    });
    Ok(scored
        .into_iter()
        .map(|(score, _, l)| Candidate {
            identifier: l.identifier.clone(),
            score,
        })
        .collect())
}

pub fn ground_symbols(
    formula: &Formula,
    placeholders: &[Placeholder],
    alphabet: &SymbolAlphabet,
    similarity: Similarity<'_>,
    floor: f64,
) -> Result<Grounding, NlError> {
    let used = formula.atoms();
    if used.is_empty() {
        return Ok(Grounding {
            formula: formula.clone(),
            matches: Vec::new(),
        });
    }
    for a in &used {
        if !placeholders.iter().any(|p| &p.symbol == a) {
            return Err(NlError::PlaceholderMismatch(format!("`{a}` has no referring expression")));
        }
    }
    let mut matches = Vec::new();
    for p in placeholders.iter().filter(|p| used.contains(&p.symbol)) {
        let ranked = rank_landmarks(&p.expressions, alphabet, similarity)?;
        match ranked.first() {
            Some(best) if best.score >= floor => matches.push(SymbolMatch {
                placeholder: p.symbol.clone(),
                expressions: p.expressions.clone(),
                identifier: best.identifier.clone(),
                score: best.score,
            }),
            _ => {
                return Err(NlError::Unresolved {
                    expression: p.expressions.join(" / "),
                    candidates: ranked.into_iter().take(3).collect(),
                })
            }
        }
    }
    let grounded = formula.map_atoms(&mut |a: &Atom| {
        matches
            .iter()
            .find(|m| &m.placeholder == a)
            .map(|m| Formula::Atom(m.identifier.clone()))
    });
    Ok(Grounding {
        formula: grounded,
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::BackendConfig;
    use crate::ltlf::parse_ltlf;
    use crate::nlfront::text::concept_key;

    fn ph(letter: &str, e: &[&str]) -> Placeholder {
        Placeholder {
            symbol: Atom::new(letter).unwrap(),
            expressions: e.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn best(e: &str) -> String {
        let a = SymbolAlphabet::vineyard();
        rank_landmarks(&[e.to_string()], &a, Similarity::Lexical).unwrap()[0]
            .identifier
            .to_string()
    }

    #[test]
    fn reference_formula_grounds() {
        let a = SymbolAlphabet::vineyard();
        let f = parse_ltlf("G(b <-> X a)").unwrap();
        let p = [ph("a", &["call the support robot", "calling the support robot"]), ph("b", &["line 1"])];
        let g = ground_symbols(&f, &p, &a, Similarity::Lexical, DEFAULT_FLOOR).unwrap();
        assert_eq!(g.formula, parse_ltlf("G(robot_at_loc_l1 <-> X call_support)").unwrap());
        assert_eq!(g.matches.len(), 2);
    }

    #[test]
    fn expected_groundings() {
        for (e, id) in [
            ("harvest the grapes", "harvest"),
            ("the initial location", "robot_at_loc_l0"),
            ("row 3", "robot_at_loc_l3"),
            ("grape 2 is unripe", "unripe_g2"),
            ("the box is full", "box_full"),
            ("harvesting the grapes", "harvest"),
            ("l2", "robot_at_loc_l2"),
        ] {
            assert_eq!(best(e), id, "{e}");
        }
    }

    #[test]
    fn every_gloss_grounds_to_its_landmark() {
        let a = SymbolAlphabet::vineyard();
        for l in a.landmarks() {
            for m in l.mentions() {
                assert_eq!(best(m), l.identifier.as_str(), "{m}");
            }
        }
        let mut keys = std::collections::BTreeMap::new();
        for l in a.landmarks() {
            for m in l.mentions() {
                if let Some(prev) = keys.insert(concept_key(m), l.identifier.clone()) {
                    assert_eq!(prev, l.identifier, "{m} collides");
                }
            }
        }
    }

    #[test]
    fn zero_placeholders_unchanged_and_floor_enforced() {
        let a = SymbolAlphabet::vineyard();
        let f = parse_ltlf("G true").unwrap();
        assert_eq!(ground_symbols(&f, &[], &a, Similarity::Lexical, DEFAULT_FLOOR).unwrap().formula, f);
        let g = parse_ltlf("F a").unwrap();
        let err = ground_symbols(&g, &[ph("a", &["the moon"])], &a, Similarity::Lexical, DEFAULT_FLOOR).unwrap_err();
        match err {
            NlError::Unresolved { candidates, .. } => assert_eq!(candidates.len(), 3),
            e => panic!("{e}"),
        }
        assert!(ground_symbols(&g, &[ph("a", &["line 1"])], &a, Similarity::Lexical, 1.01).is_err());
        assert!(matches!(
            ground_symbols(&g, &[], &a, Similarity::Lexical, DEFAULT_FLOOR),
            Err(NlError::PlaceholderMismatch(_))
        ));
    }

    #[test]
    fn grounding_is_deterministic() {
        let a = SymbolAlphabet::vineyard();
        let f = parse_ltlf("F a & G !b").unwrap();
        let p = [ph("a", &["line 2"]), ph("b", &["the crate is full"])];
        let x = ground_symbols(&f, &p, &a, Similarity::Lexical, DEFAULT_FLOOR).unwrap();
        let y = ground_symbols(&f, &p, &a, Similarity::Lexical, DEFAULT_FLOOR).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn embedding_path_matches_exact_glosses() {
        let a = SymbolAlphabet::vineyard();
        let c = LlmClient::new(BackendConfig::oracle()).unwrap();
        let r = rank_landmarks(&["call the support robot".into()], &a, Similarity::Embedding(&c)).unwrap();
        assert_eq!(r[0].identifier.as_str(), "call_support");
        assert!((r[0].score - 1.0).abs() < 1e-6);
    }
}
