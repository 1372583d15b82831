use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{BinaryOp, UnaryOp};
use super::eval::{binary, unary, CallContext, EvalError};
use crate::value::Value;

pub type BuiltinFn = Arc<dyn Fn(&[Value], &mut CallContext<'_>) -> Result<Value, EvalError> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
}

impl Arity {
    fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exact(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

#[derive(Clone)]
pub struct Builtin {
    pub name: String,
    pub arity: Arity,
    pub doc: String,
    func: BuiltinFn,
}

impl fmt::Debug for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Builtin")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("builtin '{0}' is already registered")]
pub struct DuplicateBuiltin(pub String);

/// Named functions callable from expressions and builtin relations.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    builtins: BTreeMap<String, Builtin>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding the core function set.
    pub fn core() -> Self {
        let mut r = Self::empty();
        register_core(&mut r);
        r
    }

    pub fn register<F>(
        &mut self,
        name: &str,
        arity: Arity,
        doc: &str,
        func: F,
    ) -> Result<(), DuplicateBuiltin>
    where
        F: Fn(&[Value], &mut CallContext<'_>) -> Result<Value, EvalError> + Send + Sync + 'static,
    {
        if self.builtins.contains_key(name) {
            return Err(DuplicateBuiltin(name.to_owned()));
        }
        self.builtins.insert(
            name.to_owned(),
            Builtin {
                name: name.to_owned(),
                arity,
                doc: doc.to_owned(),
                func: Arc::new(func),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Builtin> {
        self.builtins.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builtins.keys().map(String::as_str)
    }

    pub fn call(&self, name: &str, args: &[Value], cx: &mut CallContext<'_>) -> Result<Value, EvalError> {
        let builtin = self
            .builtins
            .get(name)
            .ok_or_else(|| EvalError::UnknownBuiltin(name.to_owned()))?;
        if !builtin.arity.accepts(args.len()) {
            return Err(EvalError::ArityMismatch {
                name: name.to_owned(),
                expected: builtin.arity.to_string(),
                found: args.len(),
            });
        }
        (builtin.func)(args, cx)
    }
}

/// Numeric argument, or a type mismatch naming the builtin.
pub fn real_arg(name: &str, v: &Value) -> Result<f64, EvalError> {
    v.as_f64().ok_or_else(|| EvalError::mismatch(name, &[v]))
}

pub fn bool_arg(name: &str, v: &Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::mismatch(name, &[v]))
}

pub fn probability_arg(name: &str, v: &Value) -> Result<f64, EvalError> {
    let p = real_arg(name, v)?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(EvalError::Domain(format!(
            "{name}: probability {p} outside [0, 1]"
        )))
    }
}

fn extremum(name: &'static str, args: &[Value], pick_left: fn(f64, f64) -> bool) -> Result<Value, EvalError> {
    let mut best = args[0].clone();
    for v in &args[1..] {
        let (Some(a), Some(b)) = (best.as_f64(), v.as_f64()) else {
            return Err(EvalError::mismatch(name, &[&best, v]));
        };
        if !pick_left(a, b) {
            best = v.clone();
        }
    }
    if !best.is_numeric() {
        return Err(EvalError::mismatch(name, &[&best]));
    }
    // mixed integer/real arguments promote to real
    if args.iter().any(|v| matches!(v, Value::Real(_))) {
        best = Value::Real(best.as_f64().unwrap_or_default());
    }
    Ok(best)
}

fn register_core(r: &mut Registry) {
    let mut add = |name: &str, arity: Arity, doc: &str, f: BuiltinFn| {
        let f = f.clone();
        r.register(name, arity, doc, move |args, cx| f(args, cx))
            .expect("core builtin names are unique");
    };

    add(
        "abs",
        Arity::Exact(1),
        "absolute value",
        Arc::new(|a, _| match &a[0] {
            Value::Int(i) => i
                .checked_abs()
                .map(Value::Int)
                .ok_or_else(|| EvalError::Overflow("abs".into())),
            Value::Real(r) => Ok(Value::Real(r.abs())),
            other => Err(EvalError::mismatch("abs", &[other])),
        }),
    );
    add(
        "min",
        Arity::AtLeast(1),
        "smallest argument",
        Arc::new(|a, _| extremum("min", a, |x, y| x <= y)),
    );
    add(
        "max",
        Arity::AtLeast(1),
        "largest argument",
        Arc::new(|a, _| extremum("max", a, |x, y| x >= y)),
    );
    add(
        "floor",
        Arity::Exact(1),
        "round toward negative infinity, as integer",
        Arc::new(|a, _| match &a[0] {
            Value::Int(i) => Ok(Value::Int(*i)),
            Value::Real(r) => {
                let f = r.floor();
                if (-9.223_372_036_854_776e18..9.223_372_036_854_776e18).contains(&f) {
                    Ok(Value::Int(f as i64))
                } else {
                    Err(EvalError::Overflow("floor".into()))
                }
            }
            other => Err(EvalError::mismatch("floor", &[other])),
        }),
    );
    add(
        "ceil",
        Arity::Exact(1),
        "round toward positive infinity, as integer",
        Arc::new(|a, _| match &a[0] {
            Value::Int(i) => Ok(Value::Int(*i)),
            Value::Real(r) => {
                let c = r.ceil();
                if (-9.223_372_036_854_776e18..9.223_372_036_854_776e18).contains(&c) {
                    Ok(Value::Int(c as i64))
                } else {
                    Err(EvalError::Overflow("ceil".into()))
                }
            }
            other => Err(EvalError::mismatch("ceil", &[other])),
        }),
    );
    add(
        "sqrt",
        Arity::Exact(1),
        "square root",
        Arc::new(|a, _| {
            let x = real_arg("sqrt", &a[0])?;
            if x < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative {x}")));
            }
            Ok(Value::Real(x.sqrt()))
        }),
    );
    add(
        "real",
        Arity::Exact(1),
        "convert a number to real",
        Arc::new(|a, _| Ok(Value::Real(real_arg("real", &a[0])?))),
    );
    add(
        "mod",
        Arity::Exact(2),
        "floored modulus, same as %",
        Arc::new(|a, _| binary(BinaryOp::Rem, &a[0], &a[1])),
    );
    add(
        "clamp",
        Arity::Exact(3),
        "clamp(x, lo, hi)",
        Arc::new(|a, _| {
            let lo_gt_hi = binary(BinaryOp::Gt, &a[1], &a[2])?;
            if lo_gt_hi == Value::Bool(true) {
                return Err(EvalError::Domain(format!("clamp bounds {} > {}", a[1], a[2])));
            }
            let lower = extremum("clamp", &a[..2], |x, y| x >= y)?;
            extremum("clamp", &[lower, a[2].clone()], |x, y| x <= y)
        }),
    );
    add(
        "if",
        Arity::Exact(3),
        "if(c, a, b); both branches are already evaluated",
        Arc::new(|a, _| {
            Ok(if bool_arg("if", &a[0])? {
                a[1].clone()
            } else {
                a[2].clone()
            })
        }),
    );
    for (name, op) in [
        ("eq", BinaryOp::Eq),
        ("ne", BinaryOp::Ne),
        ("lt", BinaryOp::Lt),
        ("le", BinaryOp::Le),
        ("gt", BinaryOp::Gt),
        ("ge", BinaryOp::Ge),
        ("and", BinaryOp::And),
        ("or", BinaryOp::Or),
    ] {
        add(
            name,
            Arity::Exact(2),
            op.symbol(),
            Arc::new(move |a, _| binary(op, &a[0], &a[1])),
        );
    }
    add(
        "not",
        Arity::Exact(1),
        "boolean negation",
        Arc::new(|a, _| unary(UnaryOp::Not, &a[0])),
    );
    add(
        "bernoulli",
        Arity::Exact(1),
        "true with probability p",
        Arc::new(|a, cx| {
            let p = probability_arg("bernoulli", &a[0])?;
            Ok(Value::Bool(cx.draw() < p))
        }),
    );
    add(
        "uniform",
        Arity::Exact(2),
        "uniform real in [lo, hi)",
        Arc::new(|a, cx| {
            let lo = real_arg("uniform", &a[0])?;
            let hi = real_arg("uniform", &a[1])?;
            if lo > hi {
                return Err(EvalError::Domain(format!("uniform bounds {lo} > {hi}")));
            }
            Ok(Value::Real(lo + (hi - lo) * cx.draw()))
        }),
    );
    add(
        "lookup",
        Arity::Exact(4),
        "lookup(table, key_col, key, val_col)",
        Arc::new(|a, cx| {
            let table = a[0]
                .as_table()
                .ok_or_else(|| EvalError::mismatch("lookup", &[&a[0]]))?;
            let key_col = a[1]
                .as_str()
                .ok_or_else(|| EvalError::mismatch("lookup", &[&a[1]]))?;
            let val_col = a[3]
                .as_str()
                .ok_or_else(|| EvalError::mismatch("lookup", &[&a[3]]))?;
            cx.tables.lookup(table.name(), key_col, &a[2], val_col)
        }),
    );
    add(
        "tuple",
        Arity::AtLeast(0),
        "tuple(a, b, ...)",
        Arc::new(|a, _| Ok(Value::Tuple(a.to_vec()))),
    );
    add(
        "at",
        Arity::Exact(2),
        "at(tuple, i), zero-based",
        Arc::new(|a, _| {
            let items = a[0]
                .as_tuple()
                .ok_or_else(|| EvalError::mismatch("at", &[&a[0]]))?;
            let i = a[1].as_i64().ok_or_else(|| EvalError::mismatch("at", &[&a[1]]))?;
            usize::try_from(i)
                .ok()
                .and_then(|i| items.get(i))
                .cloned()
                .ok_or_else(|| {
                    EvalError::Domain(format!("index {i} out of range for tuple of {}", items.len()))
                })
        }),
    );
    add(
        "len",
        Arity::Exact(1),
        "number of tuple items",
        Arc::new(|a, _| {
            let items = a[0]
                .as_tuple()
                .ok_or_else(|| EvalError::mismatch("len", &[&a[0]]))?;
            Ok(Value::Int(items.len() as i64))
        }),
    );
    add(
        "sum",
        Arity::Exact(1),
        "sum of a numeric tuple",
        Arc::new(|a, _| {
            let items = a[0]
                .as_tuple()
                .ok_or_else(|| EvalError::mismatch("sum", &[&a[0]]))?;
            items
                .iter()
                .try_fold(Value::Int(0), |acc, v| binary(BinaryOp::Add, &acc, v))
        }),
    );
}
