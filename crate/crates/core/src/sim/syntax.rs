//! Line tokenizer and statement readers for scenario and snapshot text.

use std::collections::{BTreeMap, BTreeSet};

use crate::action::{ActionTemplate, ArgValue, Effect, ObjectRef};
use crate::bib::EventKind;
use crate::literal::{unquote, Literal};
use crate::predicate::{parse_predicate, PredicateExpr};
use crate::trigger::EventPattern;

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    /// A balanced parenthesized predicate, raw text.
    Pred(String),
    Sym(char),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub col: usize,
}

pub(crate) fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, ScenarioError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |col: usize, msg: &str| ScenarioError::parse(line_no, col, msg);
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '#' => break,
            '[' | ']' | '{' | '}' | ',' | '|' | '=' => {
                out.push(Token {
                    tok: Tok::Sym(c),
                    col,
                });
                i += 1;
            }
            '"' => {
                let start = i;
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(col, "unterminated string")),
                        Some('\\') => i += 2,
                        Some('"') => break,
                        Some(_) => i += 1,
                    }
                }
                let raw: String = chars[start..=i].iter().collect();
                let s = unquote(&raw).ok_or_else(|| err(col, "bad escape in string"))?;
                out.push(Token {
                    tok: Tok::Str(s),
                    col,
                });
                i += 1;
            }
            '(' => {
                let start = i;
                let mut depth = 0usize;
                let mut in_str = false;
                loop {
                    match chars.get(i) {
                        None => return Err(err(col, "unbalanced parentheses")),
                        Some('\\') if in_str => i += 1,
                        Some('"') => in_str = !in_str,
                        Some('(') if !in_str => depth += 1,
                        Some(')') if !in_str => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Pred(chars[start..=i].iter().collect()),
                    col,
                });
                i += 1;
            }
            ')' => return Err(err(col, "unexpected ')'")),
            _ => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    if d.is_whitespace()
                        || matches!(d, '[' | ']' | '{' | '}' | ',' | '|' | '"' | '(' | ')' | '#')
                    {
                        break;
                    }
                    // '=' ends a word unless it completes an operator like >= or !=
                    if d == '=' {
                        let word: String = chars[start..i].iter().collect();
                        if !matches!(word.as_str(), "<" | ">" | "!" | "=") {
                            break;
                        }
                    }
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Word(chars[start..i].iter().collect()),
                    col: start + 1,
                });
            }
        }
    }
    Ok(out)
}

/// Cursor over one statement's tokens.
pub(crate) struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], line: usize, line_len: usize) -> Self {
        Cursor {
            toks,
            pos: 0,
            line,
            end_col: line_len + 1,
        }
    }

    pub fn line(&self) -> usize {
        self.line
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    pub fn error(&self, msg: impl Into<String>) -> ScenarioError {
        ScenarioError::parse(self.line, self.col(), msg)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    pub fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        self.pos += 1;
        t
    }

    pub fn word(&mut self, what: &str) -> Result<String, ScenarioError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    /// A bare word or a quoted string.
    pub fn name(&mut self, what: &str) -> Result<String, ScenarioError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    pub fn keyword(&mut self, kw: &str) -> Result<(), ScenarioError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected '{kw}'"))),
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_word() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn sym(&mut self, c: char) -> Result<(), ScenarioError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected '{c}'"))),
        }
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn int(&mut self, what: &str) -> Result<i64, ScenarioError> {
        let col = self.col();
        let w = self.word(what)?;
        w.parse().map_err(|_| {
            ScenarioError::parse(
                self.line,
                col,
                format!("expected integer {what}, got '{w}'"),
            )
        })
    }

    pub fn literal(&mut self) -> Result<Literal, ScenarioError> {
        let col = self.col();
        match self.next().cloned() {
            Some(Tok::Str(s)) => Ok(Literal::Str(s)),
            Some(Tok::Word(w)) => Literal::parse(&w).ok_or_else(|| {
                ScenarioError::parse(
                    self.line,
                    col,
                    format!("invalid literal '{w}' (quote strings)"),
                )
            }),
            _ => Err(ScenarioError::parse(self.line, col, "expected literal")),
        }
    }

    pub fn predicate(&mut self) -> Result<PredicateExpr, ScenarioError> {
        let col = self.col();
        match self.next().cloned() {
            Some(Tok::Pred(raw)) => parse_predicate(&raw).map_err(|e| {
                ScenarioError::parse(
                    self.line,
                    col + e.column - 1,
                    format!("{}: {}", e.kind, e.message),
                )
            }),
            _ => Err(ScenarioError::parse(
                self.line,
                col,
                "expected parenthesized predicate",
            )),
        }
    }

    /// `[a, b c]`
    pub fn name_list(&mut self) -> Result<Vec<String>, ScenarioError> {
        self.sym('[')?;
        let mut out = Vec::new();
        while !self.eat_sym(']') {
            if self.at_end() {
                return Err(self.error("missing ']'"));
            }
            self.eat_sym(',');
            if self.eat_sym(']') {
                break;
            }
            out.push(self.name("list item")?);
        }
        Ok(out)
    }

    pub fn name_set(&mut self) -> Result<BTreeSet<String>, ScenarioError> {
        Ok(self.name_list()?.into_iter().collect())
    }

    /// `{k=v, ...}` where values go through `value`.
    pub fn map_of<T>(
        &mut self,
        mut value: impl FnMut(&mut Self) -> Result<T, ScenarioError>,
    ) -> Result<BTreeMap<String, T>, ScenarioError> {
        self.sym('{')?;
        let mut out = BTreeMap::new();
        loop {
            self.eat_sym(',');
            if self.eat_sym('}') {
                break;
            }
            if self.at_end() {
                return Err(self.error("missing '}'"));
            }
            let key = self.name("key")?;
            self.sym('=')?;
            let v = value(self)?;
            if out.insert(key.clone(), v).is_some() {
                return Err(self.error(format!("duplicate key '{key}'")));
            }
        }
        Ok(out)
    }

    pub fn literal_map(&mut self) -> Result<BTreeMap<String, Literal>, ScenarioError> {
        self.map_of(|c| c.literal())
    }

    pub fn arg_value(&mut self) -> Result<ArgValue, ScenarioError> {
        match self.peek_word() {
            Some(w) if w.starts_with('$') => {
                let v = match w {
                    "$event.entity" => ArgValue::EventEntity,
                    "$event.cause" => ArgValue::EventCause,
                    "$event.id" => ArgValue::EventId,
                    "$tick" => ArgValue::Tick,
                    _ => return Err(self.error(format!("unknown variable '{w}'"))),
                };
                self.pos += 1;
                Ok(v)
            }
            _ => Ok(ArgValue::Lit(self.literal()?)),
        }
    }

    /// `[kind=... entity=... tags=a,b path=...]`
    pub fn pattern(&mut self) -> Result<EventPattern, ScenarioError> {
        self.sym('[')?;
        let mut p = EventPattern::default();
        while !self.eat_sym(']') {
            if self.at_end() {
                return Err(self.error("missing ']'"));
            }
            let key = self.word("pattern field")?;
            self.sym('=')?;
            match key.as_str() {
                "kind" => {
                    let w = self.word("event kind")?;
                    p.kind = Some(
                        EventKind::parse(&w)
                            .ok_or_else(|| self.error(format!("unknown event kind '{w}'")))?,
                    );
                }
                "entity" => p.entity_id = Some(self.name("entity id")?),
                "path" => p.path_prefix = Some(self.name("path prefix")?),
                "tags" | "tag" => {
                    p.tags.insert(self.name("tag")?);
                    while self.eat_sym(',') {
                        p.tags.insert(self.name("tag")?);
                    }
                }
                _ => return Err(self.error(format!("unknown pattern field '{key}'"))),
            }
        }
        Ok(p)
    }

    /// `<operation> <object|$event.entity> [with {..}] [set {..}] [incr {..}]`
    pub fn template(&mut self) -> Result<ActionTemplate, ScenarioError> {
        let operation = self.word("operation")?;
        let object = match self.word("object")?.as_str() {
            "$event.entity" => ObjectRef::EventEntity,
            w if w.starts_with('$') => return Err(self.error(format!("unknown variable '{w}'"))),
            w => ObjectRef::Id(w.to_string()),
        };
        let mut t = ActionTemplate {
            operation,
            object,
            args: BTreeMap::new(),
            effects: Vec::new(),
        };
        loop {
            if self.eat_keyword("with") {
                t.args.extend(self.map_of(|c| c.arg_value())?);
            } else if self.eat_keyword("set") {
                t.effects.extend(
                    self.literal_map()?
                        .into_iter()
                        .map(|(k, v)| Effect::Set(k, v)),
                );
            } else if self.eat_keyword("incr") {
                for (k, v) in self.literal_map()? {
                    let n = v
                        .as_decimal()
                        .ok_or_else(|| self.error(format!("incr {k} needs a number")))?;
                    t.effects.push(Effect::Incr(k, n));
                }
            } else {
                break;
            }
        }
        Ok(t)
    }

    pub fn expect_end(&self) -> Result<(), ScenarioError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }
}

fn list_text(items: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let v: Vec<String> = items.into_iter().map(|s| name_text(s.as_ref())).collect();
    format!("[{}]", v.join(", "))
}

pub(crate) fn name_text(s: &str) -> String {
    if crate::literal::is_bare_name(s) {
        s.to_string()
    } else {
        crate::literal::quote(s)
    }
}

pub(crate) fn set_text(items: &BTreeSet<String>) -> String {
    list_text(items)
}

pub(crate) fn vec_text(items: &[String]) -> String {
    list_text(items)
}

pub(crate) fn map_text<V: std::fmt::Display>(m: &BTreeMap<String, V>) -> String {
    let v: Vec<String> = m
        .iter()
        .map(|(k, v)| format!("{}={v}", name_text(k)))
        .collect();
    format!("{{{}}}", v.join(", "))
}

pub(crate) fn template_text(t: &ActionTemplate) -> String {
    let mut s = format!(
        "{} {}",
        t.operation,
        match &t.object {
            ObjectRef::Id(id) => id.clone(),
            ObjectRef::EventEntity => "$event.entity".into(),
        }
    );
    if !t.args.is_empty() {
        s.push_str(&format!(" with {}", map_text(&t.args)));
    }
    // one group per sorted run of same-kind effects, so order survives a round trip
    let mut groups: Vec<(&str, Vec<(&str, String)>)> = Vec::new();
    for e in &t.effects {
        let (kw, key, value) = match e {
            Effect::Set(k, v) => ("set", k.as_str(), v.to_string()),
            Effect::Incr(k, n) => ("incr", k.as_str(), n.to_string()),
        };
        match groups.last_mut() {
            Some((g, items)) if *g == kw && items.last().is_some_and(|(last, _)| *last < key) => {
                items.push((key, value))
            }
            _ => groups.push((kw, vec![(key, value)])),
        }
    }
    for (kw, items) in groups {
        let items: Vec<String> = items
            .iter()
            .map(|(k, v)| format!("{}={v}", name_text(k)))
            .collect();
        s.push_str(&format!(" {kw} {{{}}}", items.join(", ")));
    }
    s
}
