//! A small total predicate language for policy constraints, trigger
//! conditions and agent clause guards.

mod ast;
mod eval;
mod parse;
mod validate;

pub use ast::{Atom, AttrPath, Entity, PredicateExpr, TagHolder};
pub use eval::{blame, evaluate, holds, BindingEnv, Evaluation, FailingAtom, OpBinding};
pub use parse::{parse_predicate, ParseError, ParseErrorKind};
pub use validate::{validate_predicate, AttributeCatalog, Warning};
