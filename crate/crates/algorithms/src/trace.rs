use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{AlgoError, Result};

/// Hint values at one point of an execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub pi: Vec<usize>,
    pub dist: Vec<f64>,
}

impl Snapshot {
    /// Initial state: source at distance 0, everything else unreached.
    pub fn initial(n: usize, source: usize) -> Self {
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        Self { pi: (0..n).collect(), dist }
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn reached(&self, v: usize) -> bool {
        self.dist[v].is_finite()
    }
}

/// Snapshots `0..=T` of one execution; `T` is the number of steps that changed state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub steps: Vec<Snapshot>,
}

impl ExecutionTrace {
    pub fn n(&self) -> usize {
        self.steps[0].n()
    }

    /// Number of state-changing steps (`steps.len() - 1`).
    pub fn terminated_at(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn last(&self) -> &Snapshot {
        self.steps.last().expect("trace has at least the initial snapshot")
    }

    /// Snapshot after `t` steps; steps past termination repeat the fixed point.
    pub fn at(&self, t: usize) -> &Snapshot {
        &self.steps[t.min(self.steps.len() - 1)]
    }

    /// JSON form `{"steps": [{"pi": [...], "dist": [...]}, ...]}`; infinite
    /// distances are written as the string `"inf"`.
    pub fn to_json_value(&self) -> Value {
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|s| {
                let dist: Vec<Value> = s
                    .dist
                    .iter()
                    .map(|&d| if d.is_finite() { json!(d) } else { json!("inf") })
                    .collect();
                json!({ "pi": s.pi, "dist": dist })
            })
            .collect();
        json!({ "steps": steps })
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize, Serialize)]
        #[serde(untagged)]
        enum Dist {
            Num(f64),
            Tag(String),
        }
        #[derive(Deserialize)]
        struct RawStep {
            pi: Vec<usize>,
            dist: Vec<Dist>,
        }
        #[derive(Deserialize)]
        struct Raw {
            steps: Vec<RawStep>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        if raw.steps.is_empty() {
            return Err(AlgoError::Malformed("trace has no snapshots".into()));
        }
        let n = raw.steps[0].pi.len();
        let mut steps = Vec::with_capacity(raw.steps.len());
        for s in raw.steps {
            if s.pi.len() != n || s.dist.len() != n || s.pi.iter().any(|&p| p >= n) {
                return Err(AlgoError::Malformed("inconsistent snapshot sizes".into()));
            }
            let dist = s
                .dist
                .into_iter()
                .map(|d| match d {
                    Dist::Num(x) => Ok(x),
                    Dist::Tag(t) if t == "inf" => Ok(f64::INFINITY),
                    Dist::Tag(t) => Err(AlgoError::Malformed(format!("bad distance `{t}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            steps.push(Snapshot { pi: s.pi, dist });
        }
        Ok(Self { steps })
    }
}
