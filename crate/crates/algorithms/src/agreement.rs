use std::str::FromStr;

use crate::{AlgoError, ExecutionTrace, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementMode {
    /// Final pointers of both traces match.
    Final,
    /// The final pointer of `a` appears in some snapshot of `b`.
    AnyStep,
}

impl FromStr for AgreementMode {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Self::Final),
            "any_step" | "any-step" => Ok(Self::AnyStep),
            _ => Err(AlgoError::Unknown { what: "agreement mode", name: s.into() }),
        }
    }
}

/// Fraction of nodes on which two traces agree under `mode`.
pub fn agreement(a: &ExecutionTrace, b: &ExecutionTrace, mode: AgreementMode) -> Result<f64> {
    let n = a.n();
    if b.n() != n {
        return Err(AlgoError::SizeMismatch(n, b.n()));
    }
    let target = &a.last().pi;
    let hits = match mode {
        AgreementMode::Final => (0..n).filter(|&v| b.last().pi[v] == target[v]).count(),
        AgreementMode::AnyStep => {
            (0..n).filter(|&v| b.steps.iter().any(|s| s.pi[v] == target[v])).count()
        }
    };
    Ok(hits as f64 / n as f64)
}
