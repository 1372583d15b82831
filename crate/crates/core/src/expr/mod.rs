//! Expression language used by edge relations and viability predicates.
//!
//! Grammar, loosest binding first: `or`, `and`, comparisons (non-chaining),
//! `+ -`, `* / %`, unary `not -`, and right-associative `^`. Calls resolve
//! against a [`Registry`]; `if(c, a, b)` is a lazy conditional.

mod ast;
mod builtins;
mod eval;
mod parser;
mod token;

pub use ast::{BinaryOp, Expr, UnaryOp, ITERATION_IDENT};
pub use builtins::{
    bool_arg, probability_arg, real_arg, Arity, Builtin, BuiltinFn, DuplicateBuiltin, Registry,
};
pub use eval::{evaluate, Bindings, CallContext, EvalContext, EvalError, KeyedStream};
pub use parser::{parse_expression, ParseError};
pub use token::{tokenize, LexError, Token, TokenKind, KEYWORDS};
