//! Parsing of `--input k=v` and `--input-type k=ty` pairs.

use chg_core::solver::Inputs;
use chg_core::Value;

use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputType {
    Bool,
    Int,
    Real,
    Text,
}

impl std::str::FromStr for InputType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bool" | "boolean" => Ok(Self::Bool),
            "int" | "integer" => Ok(Self::Int),
            "real" => Ok(Self::Real),
            "text" => Ok(Self::Text),
            _ => Err(format!("unknown input type '{s}' (bool, int, real, text)")),
        }
    }
}

pub fn split_pair(pair: &str) -> Result<(&str, &str), Failure> {
    pair.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Failure::usage(format!("expected key=value, got '{pair}'")))
}

fn unquote(raw: &str) -> Option<&str> {
    ['"', '\'']
        .iter()
        .find_map(|&q| raw.strip_prefix(q).and_then(|r| r.strip_suffix(q)))
}

/// `true`/`false` are booleans, integer literals integers, other numbers
/// reals; anything else, or anything quoted, is text.
pub fn infer(raw: &str) -> Value {
    if let Some(text) = unquote(raw).filter(|_| raw.len() >= 2) {
        return Value::text(text);
    }
    match raw {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Int(i);
    }
    match raw.parse::<f64>() {
        Ok(r) if r.is_finite() => Value::Real(r),
        _ => Value::text(raw),
    }
}

pub fn coerce(raw: &str, ty: InputType) -> Result<Value, Failure> {
    let bad = || Failure::usage(format!("'{raw}' is not a valid {ty:?} input").to_lowercase());
    Ok(match ty {
        InputType::Bool => match raw {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => return Err(bad()),
        },
        InputType::Int => Value::Int(raw.parse().map_err(|_| bad())?),
        InputType::Real => Value::Real(raw.parse().map_err(|_| bad())?),
        InputType::Text => Value::text(unquote(raw).unwrap_or(raw)),
    })
}

pub fn parse_inputs(pairs: &[String], types: &[String]) -> Result<Inputs, Failure> {
    let mut overrides = std::collections::BTreeMap::new();
    for t in types {
        let (k, ty) = split_pair(t)?;
        overrides.insert(k, ty.parse::<InputType>().map_err(Failure::usage)?);
    }
    let mut inputs = Inputs::new();
    for pair in pairs {
        let (k, raw) = split_pair(pair)?;
        let value = match overrides.get(k) {
            Some(&ty) => coerce(raw, ty)?,
            None => infer(raw),
        };
        inputs.insert(k.to_owned(), value);
    }
    if let Some(k) = overrides.keys().find(|k| !inputs.contains_key(**k)) {
        return Err(Failure::usage(format!(
            "--input-type names '{k}', which has no --input"
        )));
    }
    Ok(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference() {
        assert_eq!(infer("true"), Value::Bool(true));
        assert_eq!(infer("1"), Value::Int(1));
        assert_eq!(infer("-7"), Value::Int(-7));
        assert_eq!(infer("1.5"), Value::Real(1.5));
        assert_eq!(infer("1e3"), Value::Real(1000.0));
        assert_eq!(infer("on"), Value::text("on"));
        assert_eq!(infer("\"1\""), Value::text("1"));
        assert_eq!(infer("'true'"), Value::text("true"));
        assert_eq!(infer("nan"), Value::text("nan"));
        assert_eq!(infer("\""), Value::text("\""));
    }

    #[test]
    fn overrides() {
        let inputs = parse_inputs(&["x=1".into(), "y=2".into()], &["x=real".into()]).unwrap();
        assert_eq!(inputs["x"], Value::Real(1.0));
        assert_eq!(inputs["y"], Value::Int(2));
        assert!(parse_inputs(&["x=on".into()], &["x=int".into()]).is_err());
        assert!(parse_inputs(&[], &["x=int".into()]).is_err());
        assert!(parse_inputs(&["novalue".into()], &[]).is_err());
    }

    #[test]
    fn values_may_contain_equals() {
        let inputs = parse_inputs(&["expr=a=b".into()], &[]).unwrap();
        assert_eq!(inputs["expr"], Value::text("a=b"));
    }
}
