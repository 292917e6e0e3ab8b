//! β formulas and the conjugate-gradient-type direction update, with the
//! gradient replaced by the residual `x − T(x)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Default magnitude guard for β denominators (effectively exact-zero detection).
pub const DEFAULT_EPS_DENOM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaKind {
    /// β = 0: steepest-descent-type direction.
    Sd,
    /// Hestenes–Stiefel, clamped at zero.
    HsPlus,
    /// Fletcher–Reeves.
    Fr,
    /// Polak–Ribière–Polyak, clamped at zero.
    PrpPlus,
    /// Dai–Yuan.
    Dy,
    /// Hager–Zhang.
    Hz,
}

impl BetaKind {
    pub const ALL: [BetaKind; 6] = [
        BetaKind::Sd,
        BetaKind::HsPlus,
        BetaKind::Fr,
        BetaKind::PrpPlus,
        BetaKind::Dy,
        BetaKind::Hz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BetaKind::Sd => "SD",
            BetaKind::HsPlus => "HS+",
            BetaKind::Fr => "FR",
            BetaKind::PrpPlus => "PRP+",
            BetaKind::Dy => "DY",
            BetaKind::Hz => "HZ",
        }
    }
}

impl fmt::Display for BetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Ok(BetaKind::Sd),
            "hs+" | "hs_plus" => Ok(BetaKind::HsPlus),
            "fr" => Ok(BetaKind::Fr),
            "prp+" | "prp_plus" => Ok(BetaKind::PrpPlus),
            "dy" => Ok(BetaKind::Dy),
            "hz" => Ok(BetaKind::Hz),
            _ => Err(Error::Parse(format!("unknown beta formula '{s}'"))),
        }
    }
}

/// Residuals before and after a step, and the direction the step used.
#[derive(Debug, Clone)]
pub struct DirectionState {
    r_prev: Vector,
    r_next: Vector,
    d_prev: Vector,
}

impl DirectionState {
    pub fn new(r_prev: Vector, r_next: Vector, d_prev: Vector) -> Result<Self> {
        for other in [&r_next, &d_prev] {
            if other.dim() != r_prev.dim() {
                return Err(Error::DimensionMismatch {
                    expected: r_prev.dim(),
                    found: other.dim(),
                });
            }
        }
        Ok(Self {
            r_prev,
            r_next,
            d_prev,
        })
    }

    pub fn r_prev(&self) -> &Vector {
        &self.r_prev
    }

    pub fn r_next(&self) -> &Vector {
        &self.r_next
    }

    pub fn d_prev(&self) -> &Vector {
        &self.d_prev
    }

    /// `y = r_next − r_prev`.
    pub fn y(&self) -> Vector {
        self.r_next
            .sub(&self.r_prev)
            .expect("dimensions checked on construction")
    }
}

/// β for the given formula.
///
/// Fails with [`Error::DegenerateDenominator`] when a denominator has
/// magnitude at most `eps_denom`; callers restart with β = 0.
pub fn beta(kind: BetaKind, state: &DirectionState, eps_denom: f64) -> Result<f64> {
    let guard = |den: f64| -> Result<f64> {
        if den.abs() <= eps_denom {
            Err(Error::DegenerateDenominator { formula: kind.name() })
        } else {
            Ok(den)
        }
    };
    let r1 = &state.r_next;
    let d = &state.d_prev;
    // All dot products below are between vectors of the checked common dimension.
    let dot = |a: &Vector, b: &Vector| a.dot(b).expect("dimensions checked on construction");

    let value = match kind {
        BetaKind::Sd => 0.0,
        BetaKind::Fr => r1.norm_squared() / guard(state.r_prev.norm_squared())?,
        BetaKind::PrpPlus => {
            let y = state.y();
            (dot(r1, &y) / guard(state.r_prev.norm_squared())?).max(0.0)
        }
        BetaKind::HsPlus => {
            let y = state.y();
            (dot(r1, &y) / guard(dot(d, &y))?).max(0.0)
        }
        BetaKind::Dy => {
            let y = state.y();
            r1.norm_squared() / guard(dot(d, &y))?
        }
        BetaKind::Hz => {
            let y = state.y();
            let dy = guard(dot(d, &y))?;
            let hs = dot(r1, &y) / dy;
            hs - 2.0 * y.norm_squared() / dy * (dot(r1, d) / dy)
        }
    };
    if !value.is_finite() {
        return Err(Error::DegenerateDenominator { formula: kind.name() });
    }
    Ok(value)
}

/// `−r_next + β d_prev`.
pub fn next_direction(state: &DirectionState, beta_value: f64) -> Result<Vector> {
    direction_from(&state.r_next, &state.d_prev, beta_value)
}

/// `−r + β d`, shared by the solver and trace replay.
pub(crate) fn direction_from(r: &Vector, d: &Vector, beta_value: f64) -> Result<Vector> {
    r.neg().add_scaled(beta_value, d)
}

/// `⟨r, d⟩ ≤ −c‖r‖²`.
pub fn descent_check(r: &Vector, d: &Vector, c: f64) -> Result<bool> {
    Ok(r.dot(d)? <= -c * r.norm_squared())
}
