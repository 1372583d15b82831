use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp, ITERATION_IDENT};
use super::builtins::Registry;
use crate::model_io::TableStore;
use crate::value::Value;

pub type Bindings = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("type mismatch in {context}: got {found}")]
    TypeMismatch { context: String, found: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
    #[error("builtin '{name}' expects {expected} arguments, got {found}")]
    ArityMismatch {
        name: String,
        expected: String,
        found: usize,
    },
    #[error("integer overflow in {0}")]
    Overflow(String),
    #[error("non-finite result in {0}")]
    NonFinite(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("table '{table}' has no column '{column}'")]
    UnknownColumn { table: String, column: String },
    #[error("no row in '{table}' with key {key}")]
    KeyNotFound { table: String, key: String },
}

impl EvalError {
    pub(crate) fn mismatch(context: impl Into<String>, found: &[&Value]) -> Self {
        EvalError::TypeMismatch {
            context: context.into(),
            found: found.iter().map(|v| v.type_name()).collect::<Vec<_>>().join(", "),
        }
    }
}

/// Everything a relation may observe while it is evaluated.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub bindings: &'a Bindings,
    pub rng_seed: u64,
    /// Keys the stochastic stream; the solver uses the edge id.
    pub edge_id: &'a str,
    pub iteration: u64,
    pub tables: &'a TableStore,
    pub registry: &'a Registry,
}

/// Deterministic uniform draws keyed by (seed, key, iteration, ordinal).
///
/// Each draw depends only on its key tuple, so the order in which a solver
/// explores edges never changes the values an edge samples.
#[derive(Debug, Clone)]
pub struct KeyedStream {
    seed: u64,
    key_hash: u64,
    iteration: u64,
    ordinal: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, key: &str, iteration: u64) -> Self {
        Self {
            seed,
            key_hash: fnv1a(key.as_bytes()),
            iteration,
            ordinal: 0,
        }
    }

    /// Next draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ self.key_hash);
        h = splitmix64(h ^ self.iteration);
        h = splitmix64(h ^ self.ordinal);
        self.ordinal += 1;
        ChaCha8Rng::seed_from_u64(h).gen::<f64>()
    }

    pub fn draws(&self) -> u64 {
        self.ordinal
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Handed to builtins: table access and the firing's stochastic stream.
pub struct CallContext<'c> {
    pub tables: &'c TableStore,
    pub stream: &'c mut KeyedStream,
    pub iteration: u64,
}

impl CallContext<'_> {
    pub fn draw(&mut self) -> f64 {
        self.stream.next_f64()
    }
}

/// Evaluates `ast` under `ctx`. Pure: identical contexts give identical
/// results, stochastic builtins included.
pub fn evaluate(ast: &Expr, ctx: &EvalContext<'_>) -> Result<Value, EvalError> {
    let mut stream = KeyedStream::new(ctx.rng_seed, ctx.edge_id, ctx.iteration);
    Evaluator {
        ctx,
        stream: &mut stream,
    }
    .eval(ast)
}

struct Evaluator<'e, 'a> {
    ctx: &'e EvalContext<'a>,
    stream: &'e mut KeyedStream,
}

impl Evaluator<'_, '_> {
    fn eval(&mut self, ast: &Expr) -> Result<Value, EvalError> {
        match ast {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Param(name) if name == ITERATION_IDENT => Ok(Value::Int(
                i64::try_from(self.ctx.iteration).map_err(|_| EvalError::Overflow(name.clone()))?,
            )),
            Expr::Param(name) => self
                .ctx
                .bindings
                .get(name)
                .cloned()
                .ok_or_else(|| EvalError::UnboundParameter(name.clone())),
            Expr::Unary(op, inner) => {
                let v = self.eval(inner)?;
                unary(*op, &v)
            }
            Expr::Binary(BinaryOp::And, l, r) => {
                if !self.boolean(l, "and")? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.boolean(r, "and")?))
            }
            Expr::Binary(BinaryOp::Or, l, r) => {
                if self.boolean(l, "or")? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.boolean(r, "or")?))
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                binary(*op, &a, &b)
            }
            Expr::Conditional(test, then, otherwise) => {
                if self.boolean(test, "if")? {
                    self.eval(then)
                } else {
                    self.eval(otherwise)
                }
            }
            Expr::Call(name, args) => {
                let values = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                let mut cx = CallContext {
                    tables: self.ctx.tables,
                    stream: &mut *self.stream,
                    iteration: self.ctx.iteration,
                };
                self.ctx.registry.call(name, &values, &mut cx)
            }
        }
    }

    fn boolean(&mut self, e: &Expr, context: &str) -> Result<bool, EvalError> {
        let v = self.eval(e)?;
        v.as_bool().ok_or_else(|| EvalError::mismatch(context, &[&v]))
    }
}

pub(crate) fn unary(op: UnaryOp, v: &Value) -> Result<Value, EvalError> {
    match (op, v) {
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnaryOp::Neg, Value::Int(i)) => i
            .checked_neg()
            .map(Value::Int)
            .ok_or_else(|| EvalError::Overflow("negation".into())),
        (UnaryOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
        (UnaryOp::Not, _) => Err(EvalError::mismatch("not", &[v])),
        (UnaryOp::Neg, _) => Err(EvalError::mismatch("negation", &[v])),
    }
}

fn finite(r: f64, context: &str) -> Result<Value, EvalError> {
    if r.is_finite() {
        Ok(Value::Real(r))
    } else {
        Err(EvalError::NonFinite(context.into()))
    }
}

fn floor_mod_i64(a: i64, b: i64) -> Result<i64, EvalError> {
    if b == 0 {
        return Err(EvalError::DivisionByZero);
    }
    let r = a.checked_rem(b).ok_or_else(|| EvalError::Overflow("%".into()))?;
    Ok(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r })
}

fn floor_mod_f64(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let r = a % b;
    Ok(if r != 0.0 && ((r < 0.0) != (b < 0.0)) {
        r + b
    } else {
        r
    })
}

/// Arithmetic and comparison with integer-to-real promotion.
pub(crate) fn binary(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let sym = op.symbol();
    match op {
        Eq | Ne => {
            let equal = if a.is_numeric() && b.is_numeric() {
                a.numeric_eq(b)
            } else {
                a == b
            };
            Ok(Value::Bool(equal == (op == Eq)))
        }
        Lt | Le | Gt | Ge => {
            let ord = match (a, b) {
                (Value::Int(x), Value::Int(y)) => x.cmp(y),
                (Value::Text(x), Value::Text(y)) => x.cmp(y),
                _ => {
                    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                        return Err(EvalError::mismatch(sym, &[a, b]));
                    };
                    match x.partial_cmp(&y) {
                        Some(o) => o,
                        None => return Ok(Value::Bool(false)),
                    }
                }
            };
            use std::cmp::Ordering::*;
            Ok(Value::Bool(match op {
                Lt => ord == Less,
                Le => ord != Greater,
                Gt => ord == Greater,
                _ => ord != Less,
            }))
        }
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(if op == And { *x && *y } else { *x || *y })),
            _ => Err(EvalError::mismatch(sym, &[a, b])),
        },
        Add | Sub | Mul | Div | Rem | Pow => arithmetic(op, a, b),
    }
}

fn arithmetic(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let sym = op.symbol();
    let overflow = || EvalError::Overflow(sym.into());
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let (x, y) = (*x, *y);
        return match op {
            Add => x.checked_add(y).map(Value::Int).ok_or_else(overflow),
            Sub => x.checked_sub(y).map(Value::Int).ok_or_else(overflow),
            Mul => x.checked_mul(y).map(Value::Int).ok_or_else(overflow),
            Div => {
                if y == 0 {
                    Err(EvalError::DivisionByZero)
                } else {
                    finite(x as f64 / y as f64, sym)
                }
            }
            Rem => floor_mod_i64(x, y).map(Value::Int),
            Pow => match u32::try_from(y) {
                Ok(e) => x.checked_pow(e).map(Value::Int).ok_or_else(overflow),
                Err(_) if y < 0 => {
                    if x == 0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        finite((x as f64).powf(y as f64), sym)
                    }
                }
                Err(_) => Err(overflow()),
            },
            _ => unreachable!("non-arithmetic operator"),
        };
    }
    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
        return Err(EvalError::mismatch(sym, &[a, b]));
    };
    match op {
        Add => finite(x + y, sym),
        Sub => finite(x - y, sym),
        Mul => finite(x * y, sym),
        Div => {
            if y == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                finite(x / y, sym)
            }
        }
        Rem => floor_mod_f64(x, y).and_then(|r| finite(r, sym)),
        Pow => finite(x.powf(y), sym),
        _ => unreachable!("non-arithmetic operator"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn eval_with(src: &str, bindings: &[(&str, Value)]) -> Result<Value, EvalError> {
        let bindings: Bindings = bindings.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let tables = TableStore::default();
        let registry = Registry::core();
        let ctx = EvalContext {
            bindings: &bindings,
            rng_seed: 7,
            edge_id: "e",
            iteration: 3,
            tables: &tables,
            registry: &registry,
        };
        evaluate(&parse_expression(src).unwrap(), &ctx)
    }

    fn eval(src: &str) -> Result<Value, EvalError> {
        eval_with(src, &[])
    }

    #[test]
    fn pv_power_formula() {
        let v = eval_with(
            "eta * I * a / 1000",
            &[
                ("eta", Value::Real(0.2)),
                ("I", Value::Int(1000)),
                ("a", Value::Int(10)),
            ],
        )
        .unwrap();
        assert_eq!(v, Value::Real(2.0));
    }

    #[test]
    fn not_inverts_boolean() {
        assert_eq!(
            eval_with("not x", &[("x", Value::Bool(true))]).unwrap(),
            Value::Bool(false)
        );
        for x in [true, false] {
            assert_eq!(
                eval_with("not (not x)", &[("x", Value::Bool(x))]).unwrap(),
                Value::Bool(x)
            );
        }
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(eval("1 / 0"), Err(EvalError::DivisionByZero));
        assert_eq!(eval("1.5 % 0.0"), Err(EvalError::DivisionByZero));
        assert_eq!(eval("5 % 0"), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn integer_arithmetic_and_promotion() {
        assert_eq!(eval("1 + 2 * 3").unwrap(), Value::Int(7));
        assert_eq!(eval("2 ^ 3 ^ 2").unwrap(), Value::Int(512));
        assert_eq!(eval("(2 ^ 3) ^ 2").unwrap(), Value::Int(64));
        assert_eq!(eval("7 / 2").unwrap(), Value::Real(3.5));
        assert_eq!(eval("1 + 0.5").unwrap(), Value::Real(1.5));
        assert_eq!(eval("-7 % 3").unwrap(), Value::Int(2));
        assert_eq!(eval("7 % -3").unwrap(), Value::Int(-2));
        assert_eq!(eval("2 ^ -1").unwrap(), Value::Real(0.5));
        assert!(matches!(
            eval("9223372036854775807 + 1"),
            Err(EvalError::Overflow(_))
        ));
    }

    #[test]
    fn comparisons() {
        assert_eq!(eval("1 == 1.0").unwrap(), Value::Bool(true));
        assert_eq!(eval("\"on\" == \"on\"").unwrap(), Value::Bool(true));
        assert_eq!(eval("\"on\" == 1").unwrap(), Value::Bool(false));
        assert_eq!(eval("2 < 2.5").unwrap(), Value::Bool(true));
        assert_eq!(eval("\"a\" < \"b\"").unwrap(), Value::Bool(true));
        assert!(matches!(eval("true < 1"), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn boolean_operators_short_circuit() {
        // the right operand would be a type error if evaluated
        assert_eq!(eval("false and (1 + true)").unwrap(), Value::Bool(false));
        assert_eq!(eval("true or (1 / 0)").unwrap(), Value::Bool(true));
        assert_eq!(eval("if(true, 1, 1 / 0)").unwrap(), Value::Int(1));
        assert!(matches!(eval("1 and true"), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn unbound_and_reserved_identifiers() {
        assert_eq!(eval("y"), Err(EvalError::UnboundParameter("y".into())));
        assert_eq!(eval("__iteration__ + 1").unwrap(), Value::Int(4));
    }

    #[test]
    fn builtin_errors() {
        assert_eq!(eval("nope(1)"), Err(EvalError::UnknownBuiltin("nope".into())));
        assert!(matches!(eval("abs(1, 2)"), Err(EvalError::ArityMismatch { .. })));
    }

    #[test]
    fn keyed_stream_is_reproducible_and_key_sensitive() {
        let mut a = KeyedStream::new(1, "edge", 4);
        let mut b = KeyedStream::new(1, "edge", 4);
        let xs: Vec<f64> = (0..5).map(|_| a.next_f64()).collect();
        let ys: Vec<f64> = (0..5).map(|_| b.next_f64()).collect();
        assert_eq!(xs, ys);
        assert!(xs.iter().all(|x| (0.0..1.0).contains(x)));
        let mut c = KeyedStream::new(1, "edge", 5);
        assert_ne!(c.next_f64(), xs[0]);
        let mut d = KeyedStream::new(2, "edge", 4);
        assert_ne!(d.next_f64(), xs[0]);
    }

    #[test]
    fn stochastic_evaluation_is_pure() {
        let first = eval("uniform(0, 1) + uniform(0, 1)").unwrap();
        let second = eval("uniform(0, 1) + uniform(0, 1)").unwrap();
        assert_eq!(first, second);
    }
}
