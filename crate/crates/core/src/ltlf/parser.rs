//! Infix LTLf grammar.
//!
//! ```text
//! formula  := equiv
//! equiv    := disj (("->" | "<->") equiv)?
//! disj     := conj ("|" conj)*
//! conj     := until ("&" until)*
//! until    := unary ("U" until)?
//! unary    := ("!" | "X" | "WX" | "F" | "G") unary | primary
//! primary  := "true" | "false" | atom | "(" formula ")"
//! ```

use super::{Atom, Formula, LtlfError};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    WeakNext,
    Until,
    Eventually,
    Globally,
    True,
    False,
    Ident(String),
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Not => "'!'".into(),
        Tok::And => "'&'".into(),
        Tok::Or => "'|'".into(),
        Tok::Implies => "'->'".into(),
        Tok::Iff => "'<->'".into(),
        Tok::Next => "'X'".into(),
        Tok::WeakNext => "'WX'".into(),
        Tok::Until => "'U'".into(),
        Tok::Eventually => "'F'".into(),
        Tok::Globally => "'G'".into(),
        Tok::True => "'true'".into(),
        Tok::False => "'false'".into(),
        Tok::Ident(s) => format!("atom '{s}'"),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LtlfError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b'!' | b'~' => {
                out.push((start, Tok::Not));
                i += 1;
            }
            b'&' => {
                i += if bytes.get(i + 1) == Some(&b'&') { 2 } else { 1 };
                out.push((start, Tok::And));
            }
            b'|' => {
                i += if bytes.get(i + 1) == Some(&b'|') { 2 } else { 1 };
                out.push((start, Tok::Or));
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((start, Tok::Implies));
                i += 2;
            }
            b'<' if text[i..].starts_with("<->") => {
                out.push((start, Tok::Iff));
                i += 3;
            }
            c if c.is_ascii_alphanumeric() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'-')
                {
                    // `a->b`: stop before an implication arrow.
                    if bytes[i] == b'-' && bytes.get(i + 1) == Some(&b'>') {
                        break;
                    }
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "X" => Tok::Next,
                    "WX" => Tok::WeakNext,
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    "G" => Tok::Globally,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    w if Atom::is_valid(w) => Tok::Ident(w.to_string()),
                    w => {
                        return Err(LtlfError::UnknownOperator {
                            token: w.to_string(),
                            position: start,
                        })
                    }
                };
                out.push((start, tok));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(LtlfError::UnknownOperator {
                    token: ch.to_string(),
                    position: start,
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn error(&self, message: impl Into<String>) -> LtlfError {
        LtlfError::Syntax {
            position: self.offset(),
            message: message.into(),
        }
    }

    fn equiv(&mut self) -> Result<Formula, LtlfError> {
        let lhs = self.disj()?;
        match self.peek() {
            Some(Tok::Implies) => {
                self.bump();
                Ok(Formula::implies(lhs, self.equiv()?))
            }
            Some(Tok::Iff) => {
                self.bump();
                Ok(Formula::iff(lhs, self.equiv()?))
            }
            _ => Ok(lhs),
        }
    }

    fn disj(&mut self) -> Result<Formula, LtlfError> {
        let mut lhs = self.conj()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            lhs = Formula::or(lhs, self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, LtlfError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlfError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Until) {
            self.bump();
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlfError> {
        let wrap: fn(Formula) -> Formula = match self.peek() {
            Some(Tok::Not) => Formula::not,
            Some(Tok::Next) => Formula::next,
            Some(Tok::WeakNext) => Formula::weak_next,
            Some(Tok::Eventually) => Formula::eventually,
            Some(Tok::Globally) => Formula::globally,
            _ => return self.primary(),
        };
        self.bump();
        Ok(wrap(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, LtlfError> {
        match self.bump() {
            Some(Tok::True) => Ok(Formula::True),
            Some(Tok::False) => Ok(Formula::False),
            Some(Tok::Ident(name)) => Ok(Formula::Atom(Atom::new(name)?)),
            Some(Tok::LParen) => {
                let inner = self.equiv()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    Some(_) => {
                        self.pos -= 1;
                        Err(self.error("expected ')'"))
                    }
                    None => Err(self.error("unbalanced '(': expected ')'")),
                }
            }
            Some(t) => {
                self.pos -= 1;
                Err(self.error(format!("unexpected {}", describe(&t))))
            }
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Parse an LTLf formula. Precedence, tightest first: unary operators, `U`,
/// `&`, `|`, then `->`/`<->`.
pub fn parse_ltlf(text: &str) -> Result<Formula, LtlfError> {
    if text.trim().is_empty() {
        return Err(LtlfError::Syntax {
            position: 0,
            message: "empty formula".into(),
        });
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        len: text.len(),
    };
    let f = p.equiv()?;
    if let Some(t) = p.peek().cloned() {
        return Err(p.error(format!("unexpected {} after formula", describe(&t))));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Formula {
        Formula::atom(n)
    }

    #[test]
    fn parses_bound_delay_example() {
        let f = parse_ltlf("G (b <-> X a)").unwrap();
        assert_eq!(f, Formula::globally(Formula::iff(a("b"), Formula::next(a("a")))));
        assert_eq!(f.to_string(), "G (b <-> X a)");
    }

    #[test]
    fn parses_constants() {
        assert_eq!(parse_ltlf("true").unwrap(), Formula::True);
        assert_eq!(parse_ltlf("false").unwrap(), Formula::False);
    }

    #[test]
    fn nested_eventually_reprints_to_fixpoint() {
        let f = parse_ltlf("F (a & F b)").unwrap();
        assert_eq!(
            f,
            Formula::eventually(Formula::and(a("a"), Formula::eventually(a("b"))))
        );
        let printed = f.to_string();
        assert_eq!(parse_ltlf(&printed).unwrap(), f);
        assert_eq!(parse_ltlf(&printed).unwrap().to_string(), printed);
    }

    #[test]
    fn precedence_ladder() {
        let f = parse_ltlf("!a U b & c | d -> e").unwrap();
        let expected = Formula::implies(
            Formula::or(
                Formula::and(Formula::until(Formula::not(a("a")), a("b")), a("c")),
                a("d"),
            ),
            a("e"),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn weak_next_and_hyphenated_atoms() {
        let f = parse_ltlf("WX robot-at_l1->call-support").unwrap();
        assert_eq!(
            f,
            Formula::implies(Formula::weak_next(a("robot-at_l1")), a("call-support"))
        );
    }

    #[test]
    fn reports_unknown_operator_with_position() {
        match parse_ltlf("a R b") {
            Err(LtlfError::UnknownOperator { token, position }) => {
                assert_eq!(token, "R");
                assert_eq!(position, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_ltlf("a ^ b"),
            Err(LtlfError::UnknownOperator { position: 2, .. })
        ));
    }

    #[test]
    fn reports_syntax_errors() {
        assert!(matches!(parse_ltlf(""), Err(LtlfError::Syntax { .. })));
        assert!(matches!(
            parse_ltlf("(a & b"),
            Err(LtlfError::Syntax { position: 6, .. })
        ));
        assert!(matches!(
            parse_ltlf("a &"),
            Err(LtlfError::Syntax { position: 3, .. })
        ));
        assert!(matches!(
            parse_ltlf("a b"),
            Err(LtlfError::Syntax { position: 2, .. })
        ));
    }
}
