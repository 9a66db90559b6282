//! Symbolic translation: placeholders for referring expressions, then a
//! pattern match on the symbolised sentence.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::patterns::{pieces, Pattern, Piece};
use super::rer::ReferringExpression;
use super::text::{concept_key, normalize};
use super::NlError;
use crate::ltlf::{parse_ltlf, Atom, Formula};
use crate::llmclient::{ChatRequest, LlmClient};

const LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";

/// One placeholder and the surface forms it replaced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placeholder {
    pub symbol: Atom,
    pub expressions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicTranslation {
    pub symbolic: String,
    pub placeholders: Vec<Placeholder>,
    pub formula: Formula,
    /// `None` when the formula came from the backend fallback.
    pub pattern: Option<Pattern>,
}

/// Letters in order of first occurrence; expressions with the same concept
/// key share a letter, distinct keys never do.
pub fn assign_placeholders(expressions: &[ReferringExpression]) -> Result<Vec<Placeholder>, NlError> {
    let mut sorted: Vec<&ReferringExpression> = expressions.iter().collect();
    sorted.sort_by_key(|e| e.offset);
    let mut by_key: BTreeMap<String, usize> = BTreeMap::new();
    let mut out: Vec<Placeholder> = Vec::new();
    for e in sorted {
        let text = normalize(&e.text);
        let key = concept_key(&text);
        let key = if key.is_empty() { text.clone() } else { key };
        match by_key.get(&key) {
            Some(&i) => {
                if !out[i].expressions.contains(&text) {
                    out[i].expressions.push(text);
                }
            }
            None => {
                let letter = LETTERS
                    .chars()
                    .nth(out.len())
                    .ok_or_else(|| NlError::TooManyExpressions(expressions.len()))?;
                by_key.insert(key, out.len());
                out.push(Placeholder {
                    symbol: Atom::new(letter.to_string()).expect("letters are atoms"),
                    expressions: vec![text],
                });
            }
        }
    }
    Ok(out)
}

/// Normalised sentence with every expression replaced by its placeholder.
pub fn symbolize(sentence: &str, placeholders: &[Placeholder]) -> String {
    let norm = normalize(sentence);
    let mut forms: Vec<(&str, &str)> = placeholders
        .iter()
        .flat_map(|p| p.expressions.iter().map(move |e| (e.as_str(), p.symbol.as_str())))
        .filter(|(e, _)| !e.is_empty())
        .collect();
    if forms.is_empty() {
        return norm;
    }
    forms.sort_by_key(|(e, _)| std::cmp::Reverse(e.len()));
    let alternation = forms.iter().map(|(e, _)| regex::escape(e)).collect::<Vec<_>>().join("|");
    let re = Regex::new(&format!(r"\b(?:{alternation})\b")).expect("escaped alternation");
    let lookup: BTreeMap<&str, &str> = forms.into_iter().collect();
    re.replace_all(&norm, |c: &regex::Captures<'_>| lookup[&c[0]].to_string())
        .into_owned()
}

struct Shape {
    pattern: Pattern,
    re: Regex,
    slot_of_group: Vec<usize>,
}

fn shapes() -> &'static [Shape] {
    static SHAPES: OnceLock<Vec<Shape>> = OnceLock::new();
    SHAPES.get_or_init(|| {
        let mut out = Vec::new();
        for pattern in Pattern::ALL {
            for ph in pattern.phrasings() {
                let mut re = String::from("^");
                let mut slot_of_group = Vec::new();
                for p in pieces(ph.text) {
                    match p {
                        Piece::Text(t) => re.push_str(&regex::escape(t)),
                        Piece::Slot { index, .. } => {
                            re.push_str("([a-z])");
                            slot_of_group.push(index);
                        }
                    }
                }
                re.push('$');
                out.push(Shape {
                    pattern,
                    re: Regex::new(&re).expect("phrasing regex"),
                    slot_of_group,
                });
            }
        }
        out
    })
}

/// The first phrasing whose shape the symbolised sentence has, with the
/// placeholder filling each slot.
pub fn match_pattern(symbolic: &str) -> Option<(Pattern, Vec<Atom>)> {
    'shape: for shape in shapes() {
        let Some(c) = shape.re.captures(symbolic) else { continue };
        let mut slots: Vec<Option<String>> = vec![None; shape.pattern.arity()];
        for (g, &slot) in shape.slot_of_group.iter().enumerate() {
            let letter = c[g + 1].to_string();
            match &slots[slot] {
                Some(prev) if *prev != letter => continue 'shape,
                _ => slots[slot] = Some(letter),
            }
        }
        let letters: Vec<String> = slots.into_iter().map(|s| s.expect("every slot captured")).collect();
        if letters.len() == 2 && letters[0] == letters[1] {
            continue;
        }
        return Some((shape.pattern, letters.into_iter().map(|l| Atom::new(l).expect("letter")).collect()));
    }
    None
}

fn known_placeholders(f: &Formula, placeholders: &[Placeholder]) -> bool {
    f.atoms().iter().all(|a| placeholders.iter().any(|p| &p.symbol == a))
}

pub fn symbolic_translate(
    sentence: &str,
    expressions: &[ReferringExpression],
    fallback: Option<&LlmClient>,
) -> Result<SymbolicTranslation, NlError> {
    let placeholders = assign_placeholders(expressions)?;
    let symbolic = symbolize(sentence, &placeholders);
    if let Some((pattern, args)) = match_pattern(&symbolic) {
        if args.iter().all(|a| placeholders.iter().any(|p| &p.symbol == a)) {
            return Ok(SymbolicTranslation {
                formula: pattern.instantiate_atoms(&args),
                symbolic,
                placeholders,
                pattern: Some(pattern),
            });
        }
    }
    let Some(client) = fallback else {
        return Err(NlError::NoPattern(symbolic));
    };
    let req = ChatRequest::new(
        "Translate the sentence into an LTLf formula over its single-letter placeholders. \
         Operators: ! & | -> <-> X WX U F G. Answer with the formula only.",
        &symbolic,
    );
    let answer = client.chat(&req)?.text;
    let line = answer.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let formula = parse_ltlf(line).map_err(|e| NlError::BadTranslation {
        answer: line.to_string(),
        message: e.to_string(),
    })?;
    if !known_placeholders(&formula, &placeholders) {
        return Err(NlError::BadTranslation {
            answer: line.to_string(),
            message: "formula uses symbols that are not placeholders of the sentence".into(),
        });
    }
    Ok(SymbolicTranslation {
        symbolic,
        placeholders,
        formula,
        pattern: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::{BackendConfig, BackendKind, ScriptRule};
    use crate::ltlf::to_dfa;

    fn exprs(sentence: &str, spans: &[&str]) -> Vec<ReferringExpression> {
        let lower = sentence.to_lowercase();
        spans
            .iter()
            .map(|s| ReferringExpression {
                text: s.to_string(),
                offset: lower.find(&s.to_lowercase()).unwrap(),
            })
            .collect()
    }

    #[test]
    fn reference_sentence_translates_to_bound_delay() {
        let s = "You may only call the support robot if you were at line 1 just before, and each time you are at line 1 you must follow up by calling the support robot";
        let e = exprs(s, &["call the support robot", "line 1", "calling the support robot"]);
        let t = symbolic_translate(s, &e, None).unwrap();
        assert_eq!(
            t.symbolic,
            "you may only a if you were at b just before and each time you are at b you must follow up by a"
        );
        assert_eq!(t.placeholders.len(), 2);
        assert_eq!(t.placeholders[0].expressions, ["call the support robot", "calling the support robot"]);
        assert_eq!(t.formula, parse_ltlf("G(b <-> X a)").unwrap());
        assert_eq!(t.pattern, Some(Pattern::BoundDelay));
    }

    #[test]
    fn symbolised_examples() {
        assert_eq!(match_pattern("visit a").unwrap().0, Pattern::Visit);
        let (p, args) = match_pattern("never a").unwrap();
        assert_eq!(p.instantiate_atoms(&args), parse_ltlf("G !a").unwrap());
        assert!(match_pattern("go to a and then to a").is_none());
        assert!(match_pattern("dance").is_none());
    }

    #[test]
    fn longest_expression_wins() {
        let p = vec![
            Placeholder { symbol: Atom::new("a").unwrap(), expressions: vec!["the box".into()] },
            Placeholder { symbol: Atom::new("b").unwrap(), expressions: vec!["unload the box".into()] },
        ];
        assert_eq!(symbolize("Unload the box, then the box.", &p), "b then a");
        assert_eq!(symbolize("the boxes", &p), "the boxes");
    }

    #[test]
    fn distinct_concepts_get_distinct_letters() {
        let s = "go to line 1 and then to line 2";
        let p = assign_placeholders(&exprs(s, &["line 2", "line 1"])).unwrap();
        assert_eq!(p[0].expressions, ["line 1"]);
        assert_eq!(p[0].symbol.as_str(), "a");
        assert_eq!(p[1].symbol.as_str(), "b");
    }

    #[test]
    fn fallback_backend_is_used_when_no_pattern_matches() {
        let s = "line 1 is nice";
        let e = exprs(s, &["line 1"]);
        assert!(matches!(symbolic_translate(s, &e, None), Err(NlError::NoPattern(_))));
        let c = LlmClient::new(BackendConfig::new(BackendKind::MockScripted {
            rules: vec![ScriptRule { when: "a is nice".into(), answer: "true U a\n".into() }],
            file: None,
        }))
        .unwrap();
        let t = symbolic_translate(s, &e, Some(&c)).unwrap();
        assert!(t.pattern.is_none());
        assert!(to_dfa(&t.formula).unwrap().equivalent(&to_dfa(&parse_ltlf("F a").unwrap()).unwrap()));
        let bad = LlmClient::new(BackendConfig::new(BackendKind::MockScripted {
            rules: vec![ScriptRule { when: "nice".into(), answer: "F z".into() }],
            file: None,
        }))
        .unwrap();
        assert!(matches!(symbolic_translate(s, &e, Some(&bad)), Err(NlError::BadTranslation { .. })));
    }
}
