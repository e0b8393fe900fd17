//! S-expression reader with source positions. Symbols are lower-cased.

use super::error::{ErrorKind, Loc, PddlError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Symbol { text: String, loc: Loc },
    List { items: Vec<Sexp>, loc: Loc },
}

impl Sexp {
    pub fn loc(&self) -> Loc {
        match self {
            Sexp::Symbol { loc, .. } | Sexp::List { loc, .. } => *loc,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Symbol { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Symbol { .. } => None,
        }
    }

    /// Head symbol of a list, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::symbol)
    }
}

fn is_forbidden(c: char) -> bool {
    matches!(c, '"' | '\'' | '`' | '{' | '}' | '[' | ']' | ',' | '#' | '\\') || c.is_control()
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Loc, Vec<Sexp>)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let loc = Loc { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((loc, Vec::new()));
            }
            ')' => {
                chars.next();
                col += 1;
                let (open, items) = stack
                    .pop()
                    .ok_or_else(|| PddlError::at(ErrorKind::Lexical("unbalanced `)`".into()), loc))?;
                let list = Sexp::List { items, loc: open };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if is_forbidden(c) => {
                return Err(PddlError::at(
                    ErrorKind::Lexical(format!("unexpected character {c:?}")),
                    loc,
                ));
            }
            _ => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    if is_forbidden(c) {
                        return Err(PddlError::at(
                            ErrorKind::Lexical(format!("unexpected character {c:?}")),
                            Loc { line, col },
                        ));
                    }
                    text.extend(c.to_lowercase());
                    chars.next();
                    col += 1;
                }
                let sym = Sexp::Symbol { text, loc };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(sym),
                    None => top.push(sym),
                }
            }
        }
    }
    if let Some((open, _)) = stack.last() {
        return Err(PddlError::at(ErrorKind::Lexical("unclosed `(`".into()), *open));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_lowercases() {
        let v = read_all("(Define (Domain X)) ; trailing\n sym").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].head(), Some("define"));
        let inner = &v[0].list().unwrap()[1];
        assert_eq!(inner.list().unwrap()[1].symbol(), Some("x"));
        assert_eq!(v[1].loc(), Loc { line: 2, col: 2 });
    }

    #[test]
    fn unbalanced_input_reports_location() {
        let e = read_all("(a (b)").unwrap_err();
        assert_eq!(e.loc, Some(Loc { line: 1, col: 1 }));
        let e = read_all("(a))").unwrap_err();
        assert_eq!(e.loc, Some(Loc { line: 1, col: 4 }));
    }

    #[test]
    fn rejects_quotes() {
        assert!(read_all("(a \"b\")").is_err());
    }
}
