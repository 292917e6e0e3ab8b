//! Step-size conditions on the residual functional `P(α) = ‖Q(α)‖²`, where
//! `Q(α) = x(α) − T(x(α))` and `x(α) = x + αd`, and the bracketing/bisection
//! search that finds steps satisfying them.
//!
//! The public predicate functions use the non-strict inequalities and are
//! what postcondition re-checks call. The search itself drives its bracket
//! with the strict forms, so any step it accepts also passes the non-strict
//! re-check (both evaluate `Q(α)` through the same arithmetic).

use crate::error::{invalid, Result};
use crate::mappings::{residual, FixedPointMap};
use crate::vector::Vector;

/// Which step-size conditions a search enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Sufficient decrease plus curvature.
    Wolfe,
    /// Sufficient decrease plus the two-sided curvature bound; needs `σ ≤ 1/2`.
    StrongWolfe,
    /// Sufficient decrease of the potential `gₙ` along `T(x) − x`; no curvature test.
    ArmijoPotential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchConfig {
    pub delta: f64,
    pub sigma: f64,
    pub mode: SearchMode,
    /// Cap on trial steps per search.
    pub max_probes: usize,
    /// `D` in the potential decrease condition.
    pub armijo_d: f64,
    /// `β` weighting the `α(1 − α)` term of the potential.
    pub armijo_beta: f64,
    /// Backtracking base `b`; trial steps are `b^l`.
    pub armijo_base: f64,
    /// Start the bisection with upper bracket 1 so the step never exceeds 1.
    pub clamp_unit_step: bool,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            delta: 0.3,
            sigma: 0.5,
            mode: SearchMode::Wolfe,
            max_probes: 60,
            armijo_d: 0.3,
            armijo_beta: 0.5,
            armijo_base: 0.5,
            clamp_unit_step: false,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.delta) || !open_unit(self.sigma) {
            return Err(invalid(format!(
                "delta={} and sigma={} must lie in (0,1)",
                self.delta, self.sigma
            )));
        }
        if self.delta > self.sigma {
            return Err(invalid(format!(
                "delta={} must not exceed sigma={}",
                self.delta, self.sigma
            )));
        }
        if self.mode == SearchMode::StrongWolfe && self.sigma > 0.5 {
            return Err(invalid(format!(
                "strong Wolfe search requires sigma <= 1/2, got {}",
                self.sigma
            )));
        }
        if self.max_probes == 0 {
            return Err(invalid("max_probes must be positive"));
        }
        if !(self.armijo_d > 0.0) || !(self.armijo_beta > 0.0) {
            return Err(invalid("armijo D and beta must be positive"));
        }
        if !open_unit(self.armijo_base) {
            return Err(invalid(format!(
                "armijo base {} must lie in (0,1)",
                self.armijo_base
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    /// Trial steps evaluated (both legs when a fallback ran).
    pub probes: usize,
    /// The configured conditions hold at `alpha`.
    pub satisfied: bool,
    /// `alpha` was found along the steepest-descent fallback direction.
    pub used_fallback: bool,
}

impl LineSearchOutcome {
    /// Returned without probing when `x` is already a fixed point.
    fn degenerate() -> Self {
        Self {
            alpha: 1.0,
            probes: 0,
            satisfied: true,
            used_fallback: false,
        }
    }
}

/// `Q(0)` and the two scalars every condition compares against.
struct Anchor {
    r0: Vector,
    p0: f64,
    slope: f64,
}

impl Anchor {
    fn new(map: &FixedPointMap, x: &Vector, d: &Vector) -> Result<Self> {
        let r0 = residual(map, x)?;
        let p0 = r0.norm_squared();
        let slope = r0.dot(d)?;
        Ok(Self { r0, p0, slope })
    }
}

/// `(P(α), ⟨Q(α), d⟩)`.
fn probe(map: &FixedPointMap, x: &Vector, d: &Vector, alpha: f64) -> Result<(f64, f64)> {
    let q = residual(map, &x.add_scaled(alpha, d)?)?;
    Ok((q.norm_squared(), q.dot(d)?))
}

/// Sufficient decrease: `P(α) − P(0) ≤ δ α ⟨Q(0), d⟩`.
pub fn wolfe_armijo_predicate(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    alpha: f64,
    delta: f64,
) -> Result<bool> {
    let a = Anchor::new(map, x, d)?;
    let (p, _) = probe(map, x, d, alpha)?;
    Ok(p - a.p0 <= delta * alpha * a.slope)
}

/// Curvature: `⟨Q(α), d⟩ ≥ σ ⟨Q(0), d⟩`.
pub fn wolfe_curvature_predicate(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    alpha: f64,
    sigma: f64,
) -> Result<bool> {
    let a = Anchor::new(map, x, d)?;
    let (_, s) = probe(map, x, d, alpha)?;
    Ok(s >= sigma * a.slope)
}

/// Two-sided curvature: `|⟨Q(α), d⟩| ≤ −σ ⟨Q(0), d⟩`.
pub fn strong_wolfe_predicate(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    alpha: f64,
    sigma: f64,
) -> Result<bool> {
    let a = Anchor::new(map, x, d)?;
    let (_, s) = probe(map, x, d, alpha)?;
    Ok(s.abs() <= -sigma * a.slope)
}

/// `g(α) = ‖x(α) − T(x(α))‖² − β α (1 − α) ‖T(x) − x‖²` with
/// `x(α) = x + α (T(x) − x)`.
pub fn armijo_potential(map: &FixedPointMap, x: &Vector, alpha: f64, beta: f64) -> Result<f64> {
    let r0 = residual(map, x)?;
    potential_at(map, x, &r0.neg(), r0.norm_squared(), alpha, beta)
}

fn potential_at(
    map: &FixedPointMap,
    x: &Vector,
    toward_t: &Vector,
    r0_sq: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let q = residual(map, &x.add_scaled(alpha, toward_t)?)?;
    Ok(q.norm_squared() - beta * alpha * (1.0 - alpha) * r0_sq)
}

/// True when `x + αd` rounds back to `x`, so a probe there carries no information.
fn step_vanishes(x: &Vector, d: &Vector, alpha: f64) -> bool {
    x.iter().zip(d.iter()).all(|(xi, di)| xi + alpha * di == *xi)
}

/// Smallest `l ≥ 0` with `g(bˡ) − g(0) ≤ −D bˡ ‖T(x) − x‖²`; returns `α = bˡ`.
pub fn armijo_backtrack(
    map: &FixedPointMap,
    x: &Vector,
    config: &LineSearchConfig,
) -> Result<LineSearchOutcome> {
    let r0 = residual(map, x)?;
    let r0_sq = r0.norm_squared();
    if r0_sq == 0.0 {
        return Ok(LineSearchOutcome::degenerate());
    }
    let toward_t = r0.neg();
    let g0 = r0_sq;
    let mut alpha = 1.0;
    for l in 0..config.max_probes {
        if step_vanishes(x, &toward_t, alpha) {
            return Ok(LineSearchOutcome {
                alpha,
                probes: l,
                satisfied: false,
                used_fallback: false,
            });
        }
        let g = potential_at(map, x, &toward_t, r0_sq, alpha, config.armijo_beta)?;
        if g - g0 <= -config.armijo_d * alpha * r0_sq {
            return Ok(LineSearchOutcome {
                alpha,
                probes: l + 1,
                satisfied: true,
                used_fallback: false,
            });
        }
        if l + 1 < config.max_probes {
            alpha *= config.armijo_base;
        }
    }
    Ok(LineSearchOutcome {
        alpha,
        probes: config.max_probes,
        satisfied: false,
        used_fallback: false,
    })
}

#[derive(PartialEq, Eq)]
enum Verdict {
    Stalled,
    TooLong,
    TooShort,
    Accept,
}

/// Bracketing/bisection search: start at `t = 1`; shrink the upper bracket
/// when decrease fails, raise the lower bracket when curvature fails, bisect
/// once an upper bracket exists and double otherwise.
///
/// In [`SearchMode::ArmijoPotential`] the direction argument is ignored and
/// the search runs along `T(x) − x`.
pub fn bisection_wolfe_search(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    config: &LineSearchConfig,
) -> Result<LineSearchOutcome> {
    search_observed(map, x, d, config, &mut |_, _| {})
}

pub(crate) fn search_observed(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    config: &LineSearchConfig,
    observe: &mut dyn FnMut(f64, f64),
) -> Result<LineSearchOutcome> {
    let anchor = Anchor::new(map, x, d)?;
    if anchor.p0 == 0.0 {
        return Ok(LineSearchOutcome::degenerate());
    }
    let toward_t;
    let dir = if config.mode == SearchMode::ArmijoPotential {
        toward_t = anchor.r0.neg();
        &toward_t
    } else {
        d
    };

    let judge = |t: f64| -> Result<Verdict> {
        if step_vanishes(x, dir, t) {
            return Ok(Verdict::Stalled);
        }
        match config.mode {
            SearchMode::ArmijoPotential => {
                let g = potential_at(map, x, dir, anchor.p0, t, config.armijo_beta)?;
                Ok(if g - anchor.p0 < -config.armijo_d * t * anchor.p0 {
                    Verdict::Accept
                } else {
                    Verdict::TooLong
                })
            }
            SearchMode::Wolfe | SearchMode::StrongWolfe => {
                let (p, s) = probe(map, x, dir, t)?;
                if !(p - anchor.p0 < config.delta * t * anchor.slope) {
                    return Ok(Verdict::TooLong);
                }
                if !(s > config.sigma * anchor.slope) {
                    return Ok(Verdict::TooShort);
                }
                if config.mode == SearchMode::StrongWolfe && !(s < -config.sigma * anchor.slope) {
                    return Ok(Verdict::TooLong);
                }
                Ok(Verdict::Accept)
            }
        }
    };

    let mut lo = 0.0_f64;
    let mut hi = if config.clamp_unit_step {
        1.0
    } else {
        f64::INFINITY
    };
    let mut t = 1.0_f64;
    let mut probes = 0;
    while probes < config.max_probes {
        let verdict = judge(t)?;
        if verdict == Verdict::Stalled {
            break;
        }
        probes += 1;
        match verdict {
            Verdict::Stalled => unreachable!(),
            Verdict::Accept => {
                return Ok(LineSearchOutcome {
                    alpha: t,
                    probes,
                    satisfied: true,
                    used_fallback: false,
                })
            }
            Verdict::TooLong => hi = t,
            Verdict::TooShort => lo = t,
        }
        observe(lo, hi);
        if lo >= hi {
            break;
        }
        let next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        t = next;
    }
    Ok(LineSearchOutcome {
        alpha: t,
        probes,
        satisfied: false,
        used_fallback: false,
    })
}

/// Searches along `d`; on failure, searches again along `−(x − T(x))`.
///
/// Returns the outcome together with the direction that `alpha` belongs to.
/// `probes` counts both legs.
pub fn search_with_fallback(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    config: &LineSearchConfig,
) -> Result<(LineSearchOutcome, Vector)> {
    let first = bisection_wolfe_search(map, x, d, config)?;
    if first.satisfied {
        return Ok((first, d.clone()));
    }
    let steepest = residual(map, x)?.neg();
    let mut second = bisection_wolfe_search(map, x, &steepest, config)?;
    second.used_fallback = true;
    second.probes += first.probes;
    Ok((second, steepest))
}

/// Re-checks the configured conditions at `alpha` using the non-strict forms.
pub fn conditions_hold(
    map: &FixedPointMap,
    x: &Vector,
    d: &Vector,
    alpha: f64,
    config: &LineSearchConfig,
) -> Result<bool> {
    match config.mode {
        SearchMode::Wolfe => Ok(wolfe_armijo_predicate(map, x, d, alpha, config.delta)?
            && wolfe_curvature_predicate(map, x, d, alpha, config.sigma)?),
        SearchMode::StrongWolfe => Ok(wolfe_armijo_predicate(map, x, d, alpha, config.delta)?
            && strong_wolfe_predicate(map, x, d, alpha, config.sigma)?),
        SearchMode::ArmijoPotential => {
            let g0 = armijo_potential(map, x, 0.0, config.armijo_beta)?;
            let g = armijo_potential(map, x, alpha, config.armijo_beta)?;
            Ok(g - g0 <= -config.armijo_d * alpha * g0)
        }
    }
}
