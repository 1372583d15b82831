use serde::Serialize;

use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TraceLevel {
    #[default]
    None,
    /// Successful firings only, with their outputs.
    Values,
    /// Every attempted firing, rejections included.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    Fired,
    NotViable,
    EvalError,
    CacheOccupied,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub edge: String,
    pub iteration: u64,
    pub status: TraceStatus,
    pub cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// One JSON object per line.
pub fn trace_to_json_lines(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for rec in trace {
        out.push_str(&serde_json::to_string(rec).expect("trace records hold finite values"));
        out.push('\n');
    }
    out
}
