//! JSON reports. Finite numbers use the shortest decimal that parses back to
//! the same `f64`; non-finite values, which JSON cannot carry, are written as
//! the strings `"inf"`, `"-inf"` and `"nan"`.

use scorelab::numerics::Matrix;
use serde_json::{json, Map, Value};

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn matrix(m: &Matrix) -> Value {
    Value::Array((0..m.rows()).map(|i| nums(m.row(i))).collect())
}

pub fn opt_matrix(m: Option<&Matrix>) -> Value {
    m.map_or(Value::Null, matrix)
}

/// Command-specific payload. `failure` marks a numeric failure that still
/// produced a partial report; the run then exits with status 3.
#[derive(Debug, Default)]
pub struct Output {
    pub results: Value,
    pub diagnostics: Map<String, Value>,
    pub failure: Option<String>,
}

impl Output {
    pub fn new(results: Value) -> Self {
        Self {
            results,
            ..Self::default()
        }
    }

    pub fn diagnostic(mut self, key: &str, value: Value) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

pub fn envelope(command: &str, config: Value, output: Option<&Output>, error: Option<String>, seconds: f64) -> Value {
    json!({
        "tool": "scorelab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "results": output.map_or(Value::Null, |o| o.results.clone()),
        "diagnostics": output.map_or(Value::Object(Map::new()), |o| Value::Object(o.diagnostics.clone())),
        "error": error,
        "wall_clock_seconds": seconds,
    })
}
