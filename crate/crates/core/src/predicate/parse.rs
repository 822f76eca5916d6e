//! Reader for the parenthesized prefix syntax.
//!
//! ```text
//! expr   = "(" "and" expr* ")" | "(" "or" expr* ")" | "(" "not" expr ")" | atom
//! atom   = "(" cmp path literal ")"
//!        | "(" "in" path literal+ ")"
//!        | "(" "has_role" "subject" name ")"
//!        | "(" "has_capability" "subject" name ")"
//!        | "(" "has_tag" ("object" | "context") name ")"
//!        | "(" "affords" "object" name ")"
//!        | "(" "exists" path ")"
//! cmp    = "=" | "!=" | "<" | "<=" | ">" | ">="
//! path   = ("subject" | "object" | "op" | "context") ("." segment)+
//! name   = identifier | string
//! ```

use std::fmt;

use thiserror::Error;

use super::ast::{Atom, AttrPath, PredicateExpr, TagHolder};
use crate::literal::{unquote, CmpOp, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownAtom,
    Arity,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownAtom => "unknown atom",
            ParseErrorKind::Arity => "arity mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
    Str(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    let err = |line, column, message: &str| ParseError {
        kind: ParseErrorKind::Syntax,
        line,
        column,
        message: message.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, column);
        match c {
            '\n' => {
                line += 1;
                column = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '(' => out.push(Spanned {
                tok: Tok::Open,
                line,
                column,
            }),
            ')' => out.push(Spanned {
                tok: Tok::Close,
                line,
                column,
            }),
            '"' => {
                let start = i;
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(l0, c0, "unterminated string")),
                        Some('\\') => i += 2,
                        Some('"') => break,
                        Some(_) => i += 1,
                    }
                }
                let raw: String = chars[start..=i].iter().collect();
                let s = unquote(&raw).ok_or_else(|| err(l0, c0, "bad escape in string"))?;
                column += i - start;
                out.push(Spanned {
                    tok: Tok::Str(s),
                    line: l0,
                    column: c0,
                });
            }
            _ => {
                let start = i;
                while i + 1 < chars.len()
                    && !chars[i + 1].is_whitespace()
                    && !matches!(chars[i + 1], '(' | ')' | '"')
                {
                    i += 1;
                }
                let word: String = chars[start..=i].iter().collect();
                column += i - start;
                out.push(Spanned {
                    tok: Tok::Word(word),
                    line: l0,
                    column: c0,
                });
            }
        }
        i += 1;
        column += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn error_at(&self, idx: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        let (line, column) = self
            .toks
            .get(idx)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.end);
        ParseError {
            kind,
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn expr(&mut self) -> Result<PredicateExpr, ParseError> {
        let open = self.pos;
        match self.peek() {
            Some(Tok::Open) => self.pos += 1,
            Some(_) => return Err(self.error_at(open, ParseErrorKind::Syntax, "expected '('")),
            None => {
                return Err(self.error_at(open, ParseErrorKind::Syntax, "unexpected end of input"))
            }
        }
        let head_idx = self.pos;
        let head = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            _ => {
                return Err(self.error_at(
                    head_idx,
                    ParseErrorKind::Syntax,
                    "expected operator name",
                ))
            }
        };
        self.pos += 1;

        if matches!(head.as_str(), "and" | "or" | "not") {
            let mut kids = Vec::new();
            while !matches!(self.peek(), Some(Tok::Close)) {
                if self.peek().is_none() {
                    return Err(self.error_at(self.pos, ParseErrorKind::Syntax, "missing ')'"));
                }
                kids.push(self.expr()?);
            }
            self.pos += 1;
            return Ok(match head.as_str() {
                "and" => PredicateExpr::And(kids),
                "or" => PredicateExpr::Or(kids),
                _ => {
                    if kids.len() != 1 {
                        return Err(self.error_at(
                            head_idx,
                            ParseErrorKind::Arity,
                            format!("not takes 1 argument, got {}", kids.len()),
                        ));
                    }
                    PredicateExpr::Not(Box::new(kids.pop().unwrap()))
                }
            });
        }

        // atom: gather flat arguments up to ')'
        let mut args = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Close) => break,
                Some(Tok::Open) => {
                    return Err(self.error_at(
                        self.pos,
                        ParseErrorKind::Syntax,
                        "nested expression inside atom",
                    ))
                }
                Some(_) => {
                    args.push(self.pos);
                    self.pos += 1;
                }
                None => return Err(self.error_at(self.pos, ParseErrorKind::Syntax, "missing ')'")),
            }
        }
        self.pos += 1;
        let atom = self.atom(&head, head_idx, &args)?;
        Ok(PredicateExpr::Atom(atom))
    }

    fn arity(
        &self,
        head: &str,
        head_idx: usize,
        args: &[usize],
        want: usize,
    ) -> Result<(), ParseError> {
        if args.len() != want {
            return Err(self.error_at(
                head_idx,
                ParseErrorKind::Arity,
                format!("{head} takes {want} arguments, got {}", args.len()),
            ));
        }
        Ok(())
    }

    fn path(&self, idx: usize) -> Result<AttrPath, ParseError> {
        match &self.toks[idx].tok {
            Tok::Word(w) => AttrPath::parse(w).ok_or_else(|| {
                self.error_at(
                    idx,
                    ParseErrorKind::Syntax,
                    format!("invalid attribute path '{w}'"),
                )
            }),
            _ => Err(self.error_at(idx, ParseErrorKind::Syntax, "expected attribute path")),
        }
    }

    fn literal(&self, idx: usize) -> Result<Literal, ParseError> {
        match &self.toks[idx].tok {
            Tok::Str(s) => Ok(Literal::Str(s.clone())),
            Tok::Word(w) => Literal::parse(w).ok_or_else(|| {
                self.error_at(
                    idx,
                    ParseErrorKind::Syntax,
                    format!("invalid literal '{w}'"),
                )
            }),
            _ => Err(self.error_at(idx, ParseErrorKind::Syntax, "expected literal")),
        }
    }

    fn name(&self, idx: usize) -> Result<String, ParseError> {
        match &self.toks[idx].tok {
            Tok::Str(s) => Ok(s.clone()),
            Tok::Word(w) if Literal::parse(w).is_none() => Ok(w.clone()),
            _ => Err(self.error_at(idx, ParseErrorKind::Syntax, "expected name")),
        }
    }

    fn keyword(&self, idx: usize, allowed: &[&str]) -> Result<String, ParseError> {
        match &self.toks[idx].tok {
            Tok::Word(w) if allowed.contains(&w.as_str()) => Ok(w.clone()),
            _ => Err(self.error_at(
                idx,
                ParseErrorKind::Syntax,
                format!("expected one of {allowed:?}"),
            )),
        }
    }

    fn atom(&self, head: &str, head_idx: usize, args: &[usize]) -> Result<Atom, ParseError> {
        if let Some(op) = CmpOp::from_symbol(head) {
            self.arity(head, head_idx, args, 2)?;
            return Ok(Atom::Cmp {
                path: self.path(args[0])?,
                op,
                value: self.literal(args[1])?,
            });
        }
        match head {
            "in" => {
                if args.len() < 2 {
                    return Err(self.error_at(
                        head_idx,
                        ParseErrorKind::Arity,
                        "in needs a path and at least one literal",
                    ));
                }
                let set = args[1..]
                    .iter()
                    .map(|&i| self.literal(i))
                    .collect::<Result<_, _>>()?;
                Ok(Atom::In {
                    path: self.path(args[0])?,
                    set,
                })
            }
            "has_role" | "has_capability" => {
                self.arity(head, head_idx, args, 2)?;
                self.keyword(args[0], &["subject"])?;
                let name = self.name(args[1])?;
                Ok(if head == "has_role" {
                    Atom::HasRole(name)
                } else {
                    Atom::HasCapability(name)
                })
            }
            "has_tag" => {
                self.arity(head, head_idx, args, 2)?;
                let holder = match self.keyword(args[0], &["object", "context"])?.as_str() {
                    "object" => TagHolder::Object,
                    _ => TagHolder::Context,
                };
                Ok(Atom::HasTag {
                    holder,
                    tag: self.name(args[1])?,
                })
            }
            "affords" => {
                self.arity(head, head_idx, args, 2)?;
                self.keyword(args[0], &["object"])?;
                Ok(Atom::Affords(self.name(args[1])?))
            }
            "exists" => {
                self.arity(head, head_idx, args, 1)?;
                Ok(Atom::Exists(self.path(args[0])?))
            }
            _ => Err(self.error_at(
                head_idx,
                ParseErrorKind::UnknownAtom,
                format!("unknown atom '{head}'"),
            )),
        }
    }
}

/// Parses one predicate expression; trailing input is an error.
pub fn parse_predicate(text: &str) -> Result<PredicateExpr, ParseError> {
    let toks = lex(text)?;
    let end = {
        let lines: Vec<&str> = text.split('\n').collect();
        (
            lines.len(),
            lines.last().map_or(0, |l| l.chars().count()) + 1,
        )
    };
    let mut p = Parser { toks, pos: 0, end };
    let expr = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.error_at(
            p.pos,
            ParseErrorKind::Syntax,
            "trailing input after expression",
        ));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::ast::Entity;

    #[test]
    fn comparison_atom() {
        let e = parse_predicate("(> object.state.temperature 80)").unwrap();
        assert_eq!(
            e,
            PredicateExpr::Atom(Atom::Cmp {
                path: AttrPath::new(Entity::Object, "state.temperature"),
                op: CmpOp::Gt,
                value: Literal::Int(80),
            })
        );
    }

    #[test]
    fn empty_conjunction_is_truth() {
        assert_eq!(parse_predicate("(and)").unwrap(), PredicateExpr::truth());
        assert_eq!(
            parse_predicate(" ( or ) ").unwrap(),
            PredicateExpr::Or(vec![])
        );
    }

    #[test]
    fn compound_with_names_and_strings() {
        let text = r#"(and (has_role subject operator) (not (= object.attributes.Sensitivity "Confidential")) (in op.args.mode "a" 2 2.5 true))"#;
        let e = parse_predicate(text).unwrap();
        assert_eq!(e.to_string(), text);
        assert_eq!(e.atoms().len(), 3);
    }

    #[test]
    fn errors_carry_location_and_kind() {
        let e = parse_predicate("(and\n  (frobnicate subject x))").unwrap_err();
        assert_eq!(
            (e.kind, e.line, e.column),
            (ParseErrorKind::UnknownAtom, 2, 4)
        );

        let e = parse_predicate("(> object.state.t)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);

        let e = parse_predicate("(not (and) (and))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);

        let e = parse_predicate("(and (exists object.state.t)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);

        let e = parse_predicate("(exists thing.x)").unwrap_err();
        assert_eq!((e.kind, e.column), (ParseErrorKind::Syntax, 9));

        let e = parse_predicate("(and) (and)").unwrap_err();
        assert_eq!((e.kind, e.column), (ParseErrorKind::Syntax, 7));

        assert!(parse_predicate("").is_err());
        assert!(parse_predicate("(in object.state.x)").is_err());
        assert!(parse_predicate("(= object.state.x \"open)").is_err());
    }
}
