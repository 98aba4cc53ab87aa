use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Terminal regime of a run, ordered by stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Extinction,
    PreySurvival,
    Coexistence,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Extinction, Regime::PreySurvival, Regime::Coexistence];

    pub fn classify(prey: usize, predators: usize) -> Self {
        match (prey, predators) {
            (0, _) => Regime::Extinction,
            (_, 0) => Regime::PreySurvival,
            _ => Regime::Coexistence,
        }
    }

    /// Ordinal encoding on {0, 0.5, 1}.
    pub fn score(self) -> f64 {
        match self {
            Regime::Extinction => 0.0,
            Regime::PreySurvival => 0.5,
            Regime::Coexistence => 1.0,
        }
    }

    pub fn from_score(score: f64) -> Option<Self> {
        Regime::ALL.into_iter().find(|r| r.score() == score)
    }

    /// Class index used by classifiers.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Regime::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Extinction => "extinction",
            Regime::PreySurvival => "prey_survival",
            Regime::Coexistence => "coexistence",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown regime {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: Regime,
    pub final_prey: usize,
    pub final_pred: usize,
    pub end_tick: u32,
}

impl Outcome {
    pub fn new(final_prey: usize, final_pred: usize, end_tick: u32) -> Self {
        Outcome {
            label: Regime::classify(final_prey, final_pred),
            final_prey,
            final_pred,
            end_tick,
        }
    }

    pub fn score(&self) -> f64 {
        self.label.score()
    }
}
