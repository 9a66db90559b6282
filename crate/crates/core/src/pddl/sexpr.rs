use std::fmt;

use super::PddlError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Symbol(String, Span),
    List(Vec<SExpr>, Span),
}

impl SExpr {
    pub fn span(&self) -> Span {
        match self {
            SExpr::Symbol(_, s) | SExpr::List(_, s) => *s,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Symbol(..) => None,
        }
    }

    /// The head symbol of a list, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(SExpr::symbol)
    }
}

/// Read every top-level expression. Symbols are lowercased; `;` starts a comment.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, PddlError> {
    let mut stack: Vec<(Vec<SExpr>, Span)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let here = Span { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
                col += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '(' => stack.push((Vec::new(), here)),
            ')' => {
                let (items, span) = stack.pop().ok_or_else(|| PddlError::Syntax {
                    span: here,
                    message: "unbalanced ')'".into(),
                })?;
                let e = SExpr::List(items, span);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => top.push(e),
                }
            }
            _ => {
                let mut sym = String::new();
                sym.extend(c.to_lowercase());
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    sym.extend(n.to_lowercase());
                    chars.next();
                    col += 1;
                }
                let e = SExpr::Symbol(sym, here);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => top.push(e),
                }
            }
        }
        col += 1;
    }
    if let Some((_, span)) = stack.pop() {
        return Err(PddlError::Syntax {
            span,
            message: "unclosed '('".into(),
        });
    }
    Ok(top)
}
