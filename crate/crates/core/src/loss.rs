//! Margin losses `ℓ(y, ŷ)` and their derivatives with respect to `ŷ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Hinge,
    SquaredHinge,
    Logistic,
}

impl LossKind {
    pub fn is_smooth(self) -> bool {
        !matches!(self, LossKind::Hinge)
    }

    /// The loss used when a differentiable surrogate is required.
    pub fn smooth_surrogate(self) -> LossKind {
        match self {
            LossKind::Hinge => LossKind::SquaredHinge,
            other => other,
        }
    }

    pub fn value(self, y: f64, score: f64) -> f64 {
        let margin = y * score;
        match self {
            LossKind::Hinge => (1.0 - margin).max(0.0),
            LossKind::SquaredHinge => {
                let r = (1.0 - margin).max(0.0);
                r * r
            }
            LossKind::Logistic => softplus(-margin),
        }
    }

    /// `∂ℓ/∂ŷ`. For the hinge this is the subgradient `-y` on the active side.
    pub fn derivative(self, y: f64, score: f64) -> f64 {
        let margin = y * score;
        match self {
            LossKind::Hinge => {
                if margin < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LossKind::SquaredHinge => -2.0 * y * (1.0 - margin).max(0.0),
            LossKind::Logistic => -y * sigmoid(-margin),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::SquaredHinge => "squared_hinge",
            LossKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<LossKind> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "squared_hinge" | "squared-hinge" => Ok(LossKind::SquaredHinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
