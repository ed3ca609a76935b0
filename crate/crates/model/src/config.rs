use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Message-passing core applied once per algorithm step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Processor {
    /// MLP messages, MLP update.
    Mpnn,
    /// MLP messages, single-layer ReLU update.
    Pgn,
    /// Affine messages and update; the aggregator is the only nonlinearity.
    LinearPgn,
    /// MPNN messages enriched with max-reduced two-hop features.
    TripletLite,
}

/// Permutation-invariant reduction over incoming messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Max,
    Mean,
    Sum,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    ToZero,
    ToMean,
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self> {
                let norm = s.replace('-', "_");
                $ty::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == norm)
                    .ok_or_else(|| ModelError::Config(format!("unknown {} `{s}`", $what)))
            }
        }
    };
}

named_enum!(Processor, "processor", Mpnn => "mpnn", Pgn => "pgn", LinearPgn => "linear_pgn", TripletLite => "triplet_lite");
named_enum!(Aggregator, "aggregator", Max => "max", Mean => "mean", Sum => "sum", Softmax => "softmax");
named_enum!(DecayMode, "decay mode", ToZero => "to_zero", ToMean => "to_mean");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub processor: Processor,
    pub aggregator: Aggregator,
    pub softmax_temperature: f64,
    /// 1.0 disables decay.
    pub decay_factor: f64,
    pub decay_mode: DecayMode,
    /// Hidden width of the message MLP.
    pub message_hidden: usize,
    /// Hidden width of the pointer decoder.
    pub pointer_hidden: usize,
    /// Channels of the two-hop features (`triplet_lite` only).
    pub triplet_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 128,
            processor: Processor::Mpnn,
            aggregator: Aggregator::Max,
            softmax_temperature: 0.01,
            decay_factor: 1.0,
            decay_mode: DecayMode::ToZero,
            message_hidden: 128,
            pointer_hidden: 32,
            triplet_channels: 8,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.latent_dim == 0 || self.message_hidden == 0 || self.pointer_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.processor == Processor::TripletLite && self.triplet_channels == 0 {
            return bad("triplet_lite needs at least one triplet channel".into());
        }
        if self.aggregator == Aggregator::Softmax && !(self.softmax_temperature > 0.0) {
            return bad(format!("softmax temperature must be positive, got {}", self.softmax_temperature));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay factor must lie in (0, 1], got {}", self.decay_factor));
        }
        Ok(())
    }

    pub fn decays(&self) -> bool {
        self.decay_factor < 1.0
    }
}
