use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A sample location `(t, x, y)` with the value observed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

impl Witness {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>, value: f64) -> Self {
        Self { t, x, y, value }
    }
}

/// A fitted exponent with its goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedExponent {
    pub value: f64,
    pub r_squared: f64,
}

/// Outcome of one estimate check: empirical constants, extremal witnesses,
/// fitted exponents and a verdict.
///
/// `verdict` is `None` when the check is undefined (degenerate regression).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub constants: BTreeMap<String, f64>,
    pub witnesses: BTreeMap<String, Witness>,
    pub exponents: BTreeMap<String, FittedExponent>,
    pub verdict: Option<bool>,
    /// Relative change of the main constant under a scan twice as dense.
    pub drift: Option<f64>,
    /// Sample points whose evaluation failed; excluded from the extrema.
    pub failures: usize,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    pub fn set_constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    pub fn set_witness(&mut self, key: &str, w: Witness) {
        self.witnesses.insert(key.to_string(), w);
    }

    pub fn passed(&self) -> bool {
        self.verdict == Some(true)
    }

    /// JSON value with keys in sorted order.
    pub fn to_json(&self) -> serde_json::Value {
        // serde_json's map is ordered by key, so going through Value sorts struct fields too
        serde_json::to_value(self).expect("report is serializable")
    }
}
