use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::{evaluate, parse_expression, EvalContext, EvalError, Expr, ParseError};
use crate::value::Value;

/// The function carried by a hyperedge (or its viability predicate).
#[derive(Debug, Clone, PartialEq)]
pub enum Relation {
    /// Parsed expression; `source` is kept verbatim for saving.
    Expression {
        source: String,
        ast: Expr,
    },
    /// Registry function applied to the named parameters, in order.
    Builtin {
        name: String,
        args: Vec<String>,
    },
    /// Row lookup; every field names an edge parameter.
    TableQuery {
        table: String,
        key_column: String,
        key: String,
        value_column: String,
    },
    Identity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("unknown relation kind '{0}'")]
    UnknownKind(String),
    #[error("bad {kind} body '{body}': {reason}")]
    BadBody {
        kind: String,
        body: String,
        reason: String,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Relation {
    pub fn expr(source: &str) -> Result<Self, ParseError> {
        Ok(Relation::Expression {
            source: source.to_owned(),
            ast: parse_expression(source)?,
        })
    }

    pub fn builtin(name: &str, args: &[&str]) -> Self {
        Relation::Builtin {
            name: name.to_owned(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn identity(param: &str) -> Self {
        Relation::Identity(param.to_owned())
    }

    pub fn table_query(table: &str, key_column: &str, key: &str, value_column: &str) -> Self {
        Relation::TableQuery {
            table: table.to_owned(),
            key_column: key_column.to_owned(),
            key: key.to_owned(),
            value_column: value_column.to_owned(),
        }
    }

    /// Builds a relation from its document form (`kind`, `body`).
    pub fn parse(kind: &str, body: &str) -> Result<Self, RelationError> {
        let bad = |reason: &str| RelationError::BadBody {
            kind: kind.to_owned(),
            body: body.to_owned(),
            reason: reason.to_owned(),
        };
        match kind {
            "expr" => Ok(Relation::expr(body)?),
            "builtin" => match parse_expression(body)? {
                Expr::Call(name, args) => {
                    let args = args
                        .into_iter()
                        .map(|a| match a {
                            Expr::Param(p) => Ok(p),
                            _ => Err(bad("arguments must be parameter names")),
                        })
                        .collect::<Result<_, _>>()?;
                    Ok(Relation::Builtin { name, args })
                }
                _ => Err(bad("expected name(param, ...)")),
            },
            "table" => {
                let parts: Vec<&str> = body.split(',').map(str::trim).collect();
                match parts[..] {
                    [table, key_column, key, value_column] if parts.iter().all(|p| is_ident(p)) => {
                        Ok(Relation::table_query(table, key_column, key, value_column))
                    }
                    _ => Err(bad("expected 'table, key_column, key, value_column'")),
                }
            }
            "identity" => {
                let p = body.trim();
                if is_ident(p) {
                    Ok(Relation::identity(p))
                } else {
                    Err(bad("expected a parameter name"))
                }
            }
            other => Err(RelationError::UnknownKind(other.to_owned())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Relation::Expression { .. } => "expr",
            Relation::Builtin { .. } => "builtin",
            Relation::TableQuery { .. } => "table",
            Relation::Identity(_) => "identity",
        }
    }

    /// Document body; `Relation::parse(self.kind(), &self.body())` round-trips.
    pub fn body(&self) -> String {
        match self {
            Relation::Expression { source, .. } => source.clone(),
            Relation::Builtin { name, args } => format!("{name}({})", args.join(", ")),
            Relation::TableQuery {
                table,
                key_column,
                key,
                value_column,
            } => format!("{table}, {key_column}, {key}, {value_column}"),
            Relation::Identity(p) => p.clone(),
        }
    }

    pub fn params(&self) -> BTreeSet<&str> {
        match self {
            Relation::Expression { ast, .. } => ast.params(),
            Relation::Builtin { args, .. } => args.iter().map(String::as_str).collect(),
            Relation::TableQuery {
                table,
                key_column,
                key,
                value_column,
            } => [table, key_column, key, value_column]
                .into_iter()
                .map(String::as_str)
                .collect(),
            Relation::Identity(p) => [p.as_str()].into_iter().collect(),
        }
    }

    pub fn uses_iteration(&self) -> bool {
        matches!(self, Relation::Expression { ast, .. } if ast.uses_iteration())
    }

    pub fn evaluate(&self, ctx: &EvalContext<'_>) -> Result<Value, EvalError> {
        let bound = |p: &str| {
            ctx.bindings
                .get(p)
                .cloned()
                .ok_or_else(|| EvalError::UnboundParameter(p.to_owned()))
        };
        match self {
            Relation::Expression { ast, .. } => evaluate(ast, ctx),
            Relation::Identity(p) => bound(p),
            Relation::Builtin { name, args } => {
                let call = Expr::Call(
                    name.clone(),
                    args.iter().map(|a| Expr::Param(a.clone())).collect(),
                );
                evaluate(&call, ctx)
            }
            Relation::TableQuery {
                table,
                key_column,
                key,
                value_column,
            } => {
                let t = bound(table)?;
                let handle = t
                    .as_table()
                    .ok_or_else(|| EvalError::mismatch("table query", &[&t]))?;
                let kc = bound(key_column)?;
                let vc = bound(value_column)?;
                let (Some(kc), Some(vc)) = (kc.as_str(), vc.as_str()) else {
                    return Err(EvalError::mismatch("table query", &[&kc, &vc]));
                };
                ctx.tables.lookup(handle.name(), kc, &bound(key)?, vc)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_forms_round_trip() {
        for (kind, body) in [
            ("expr", "eta * I * a / 1000"),
            ("builtin", "pv_supply(I, a, eta)"),
            ("table", "data, key_col, hour, label"),
            ("identity", "x"),
        ] {
            let rel = Relation::parse(kind, body).unwrap();
            assert_eq!(rel.kind(), kind);
            assert_eq!(Relation::parse(kind, &rel.body()).unwrap(), rel);
        }
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(
            Relation::parse("builtin", "f(x + 1)"),
            Err(RelationError::BadBody { .. })
        ));
        assert!(matches!(
            Relation::parse("table", "a, b"),
            Err(RelationError::BadBody { .. })
        ));
        assert!(matches!(
            Relation::parse("shell", "ls"),
            Err(RelationError::UnknownKind(_))
        ));
        assert!(matches!(
            Relation::parse("expr", "1 +"),
            Err(RelationError::Parse(_))
        ));
    }

    #[test]
    fn params_cover_every_kind() {
        let rel = Relation::expr("if(__iteration__ == n, x, y)").unwrap();
        assert_eq!(rel.params().into_iter().collect::<Vec<_>>(), ["n", "x", "y"]);
        assert!(rel.uses_iteration());
        let rel = Relation::table_query("t", "k", "key", "v");
        assert_eq!(rel.params().len(), 4);
    }
}
