//! Interface shared by the linear and neural dueling policies.

use serde::{Deserialize, Serialize};

use crate::environment::ArmSet;
use crate::error::Result;

/// How a policy treats feedback that is pending or censored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Every played round enters the loss; arrived labels are scaled by
    /// `1/ρ`, missing ones count as zero.
    Ipw,
    /// Only arrived feedback is used, unweighted.
    Ignore,
    /// Missing feedback is imputed with the model's own predicted preference.
    Heuristic,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ipw, Variant::Ignore, Variant::Heuristic];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ipw => "ipw",
            Variant::Ignore => "ignore",
            Variant::Heuristic => "heuristic",
        }
    }

    /// Observation probability the variant corrects for. Only the weighted
    /// variant accounts for censoring, so the others behave as if `ρ = 1`.
    pub fn effective_rho(self, rho: f64) -> f64 {
        match self {
            Variant::Ipw => rho,
            Variant::Ignore | Variant::Heuristic => 1.0,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Feedback drawn for a played pair: the preference and how long it takes
/// to arrive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub preference: bool,
    pub delay: u32,
}

/// Source of duel outcomes. The simulator draws them from the environment
/// and delay model; tests script them.
pub trait DuelOracle {
    fn duel(&mut self, round: usize, first: &[f64], second: &[f64]) -> Result<Outcome>;
}

/// Arm indices played in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Duel {
    pub round: usize,
    pub first: usize,
    pub second: usize,
}

pub trait DuelingPolicy {
    /// Index of the next round to be played, starting at 1.
    fn round(&self) -> usize;

    /// Plays one round against `arms` and records its (future) feedback.
    fn step(&mut self, arms: &ArmSet, oracle: &mut dyn DuelOracle) -> Result<Duel>;
}

/// Index of the largest score, lowest index on ties.
pub(crate) fn argmax(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}
