//! JSON configuration for offspring laws and mark functions.
//!
//! Law files:
//!
//! ```json
//! {"p": {"0": "1/2", "2": "1/2"}}
//! {"p": ["1/2", 0, "1/2"]}
//! {"p": {"geometric": "1/2"}, "cap": 64}
//! ```
//!
//! Mark files:
//!
//! ```json
//! {"q": {"0": 0}, "default": 1}
//! {"constant": "1/2"}
//! {"named": "internal"}
//! ```
//!
//! Probabilities are JSON numbers, fractions `"a/b"` or decimal strings.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::laws::{LawError, MarkFunction, OffspringLaw, DEFAULT_DEGREE_CAP};
use crate::scalar::Scalar;

fn config_err(msg: impl Into<String>) -> LawError {
    LawError::Config(msg.into())
}

fn scalar<S: Scalar>(value: &Value) -> Result<S, LawError> {
    let text = match value {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(config_err(format!("expected a probability, found {other}"))),
    };
    Ok(S::parse(&text)?)
}

fn degree_key(key: &str) -> Result<usize, LawError> {
    key.trim()
        .parse()
        .map_err(|_| config_err(format!("degree key {key:?} is not a nonnegative integer")))
}

fn table<S: Scalar>(value: &Value) -> Result<BTreeMap<usize, S>, LawError> {
    match value {
        Value::Array(items) => items.iter().enumerate().map(|(k, v)| Ok((k, scalar(v)?))).collect(),
        Value::Object(map) => map.iter().map(|(k, v)| Ok((degree_key(k)?, scalar(v)?))).collect(),
        other => Err(config_err(format!("expected a list or a degree map, found {other}"))),
    }
}

pub fn parse_law<S: Scalar>(text: &str) -> Result<OffspringLaw<S>, LawError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    law_from_value(&doc)
}

pub fn law_from_value<S: Scalar>(doc: &Value) -> Result<OffspringLaw<S>, LawError> {
    let p = doc.get("p").ok_or_else(|| config_err("missing field \"p\""))?;
    if let Some(ratio) = p.get("geometric") {
        let cap = match doc.get("cap") {
            None => DEFAULT_DEGREE_CAP,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| config_err("\"cap\" must be a nonnegative integer"))? as usize,
        };
        return OffspringLaw::geometric(scalar(ratio)?, cap);
    }
    OffspringLaw::from_map(&table(p)?)
}

pub fn parse_marks<S: Scalar>(text: &str) -> Result<MarkFunction<S>, LawError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    marks_from_value(&doc)
}

pub fn marks_from_value<S: Scalar>(doc: &Value) -> Result<MarkFunction<S>, LawError> {
    if let Some(name) = doc.get("named") {
        return match name.as_str() {
            Some("all") => Ok(MarkFunction::all()),
            Some("internal") => Ok(MarkFunction::internal()),
            Some("leaves") => Ok(MarkFunction::leaves()),
            _ => Err(config_err(format!("unknown mark function {name}; use all, internal or leaves"))),
        };
    }
    if let Some(c) = doc.get("constant") {
        return MarkFunction::constant(scalar(c)?);
    }
    let q = doc.get("q").ok_or_else(|| config_err("expected \"q\", \"constant\" or \"named\""))?;
    let default = match doc.get("default") {
        Some(v) => scalar(v)?,
        None => S::zero(),
    };
    let map = table::<S>(q)?;
    let len = map.keys().next_back().map_or(0, |&k| k + 1);
    let dense = (0..len)
        .map(|k| map.get(&k).cloned().unwrap_or_else(|| default.clone()))
        .collect();
    MarkFunction::new(dense, default)
}
