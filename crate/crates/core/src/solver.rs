//! The line-search fixed point loop, the Krasnosel'skiĭ–Mann baselines, and
//! convergence-rate bounds evaluated from a recorded trace.

use std::time::Instant;

use crate::directions::{self, beta, descent_check, BetaKind, DirectionState};
use crate::error::{invalid, Error, Result};
use crate::linesearch::{armijo_backtrack, search_with_fallback, LineSearchConfig, LineSearchOutcome};
use crate::mappings::{residual, FixedPointMap};
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub beta_kind: BetaKind,
    pub linesearch: LineSearchConfig,
    pub max_iters: usize,
    /// Stop once `‖x − T(x)‖ ≤ residual_tol`.
    pub residual_tol: f64,
    /// Attach the convergence-rate bound sequence to the result.
    pub rate_check: bool,
    /// Constant `c` of the descent diagnostic `⟨r, d⟩ ≤ −c‖r‖²`.
    pub diag_c: f64,
    pub eps_denom: f64,
    /// Skip the search and always step by this amount (conditions are still
    /// evaluated and recorded).
    pub fixed_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta_kind: BetaKind::Sd,
            linesearch: LineSearchConfig::default(),
            max_iters: 10,
            residual_tol: 1e-12,
            rate_check: false,
            diag_c: 1e-8,
            eps_denom: directions::DEFAULT_EPS_DENOM,
            fixed_step: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.linesearch.validate()?;
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(invalid("residual_tol must be nonnegative"));
        }
        if !(self.diag_c > 0.0) {
            return Err(invalid("diag_c must be positive"));
        }
        if let Some(a) = self.fixed_step {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid(format!("fixed step {a} must be positive")));
            }
        }
        Ok(())
    }
}

/// Shared settings of the Krasnosel'skiĭ–Mann baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct KmConfig {
    pub max_iters: usize,
    pub residual_tol: f64,
    /// δ, σ for the recorded step checks; `armijo_*` for the backtracking variant.
    pub linesearch: LineSearchConfig,
    pub diag_c: f64,
}

impl Default for KmConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            residual_tol: 1e-12,
            linesearch: LineSearchConfig::default(),
            diag_c: 1e-8,
        }
    }
}

/// One row of a run trace. Row `n` describes `xₙ` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub residual_norm: f64,
    /// Step size; 0 on the terminal row.
    pub alpha: f64,
    /// β used to build the next direction (0 after a restart).
    pub beta_value: f64,
    pub ls_probes: usize,
    /// The step satisfied the configured conditions along the primary direction.
    pub ls_satisfied: bool,
    pub used_fallback: bool,
    pub descent_ok: bool,
    /// `|⟨r_{n+1}, dₙ⟩| ≤ −σ⟨rₙ, dₙ⟩` held for the executed step.
    pub strong_wolfe_ok: bool,
    pub step_executed: bool,
    /// Time since the start of the run at which `xₙ` became available.
    pub elapsed_ns: u128,
}

impl IterationRecord {
    fn terminal(n: usize, residual_norm: f64, elapsed_ns: u128) -> Self {
        Self {
            n,
            residual_norm,
            alpha: 0.0,
            beta_value: 0.0,
            ls_probes: 0,
            ls_satisfied: false,
            used_fallback: false,
            descent_ok: false,
            strong_wolfe_ok: false,
            step_executed: false,
            elapsed_ns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ResidualZero,
    IterationCap,
    LinesearchFailure,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::ResidualZero => "residual_zero",
            Termination::IterationCap => "iteration_cap",
            Termination::LinesearchFailure => "linesearch_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_point: Vector,
    pub records: Vec<IterationRecord>,
    pub terminated_by: Termination,
    /// Iterations where a degenerate β denominator forced a restart.
    pub restarts: usize,
    /// Present when `rate_check` was requested and the formula has a bound.
    pub rate_bound: Option<Vec<f64>>,
}

impl RunResult {
    pub fn executed_steps(&self) -> usize {
        self.records.iter().filter(|r| r.step_executed).count()
    }

    pub fn satisfied_steps(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.step_executed && r.ls_satisfied)
            .count()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual_norm)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_norm).collect()
    }
}

fn check_start(map: &FixedPointMap, x0: &Vector) -> Result<()> {
    if map.dim() != x0.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: x0.dim(),
        });
    }
    Ok(())
}

/// Strict-form decrease and curvature checks for a step whose end residual is known.
fn strict_conditions(
    r: &Vector,
    r_next: &Vector,
    d: &Vector,
    alpha: f64,
    ls: &LineSearchConfig,
) -> Result<bool> {
    let slope = r.dot(d)?;
    let decrease = r_next.norm_squared() - r.norm_squared() < ls.delta * alpha * slope;
    let curvature = r_next.dot(d)? > ls.sigma * slope;
    Ok(decrease && curvature)
}

/// Line-search fixed point iteration with conjugate-gradient-type directions:
/// `x_{n+1} = xₙ + αₙdₙ`, `d_{n+1} = −r_{n+1} + βₙdₙ`, `d₀ = −r₀`.
pub fn run_algorithm1(map: &FixedPointMap, x0: &Vector, config: &SolverConfig) -> Result<RunResult> {
    config.validate()?;
    check_start(map, x0)?;
    let ls = &config.linesearch;
    let start = Instant::now();

    let mut x = x0.clone();
    let mut r = residual(map, &x)?;
    let mut d = r.neg();
    let mut records = Vec::new();
    let mut restarts = 0;
    let mut n = 0;

    let terminated_by = loop {
        let residual_norm = r.norm();
        let elapsed_ns = start.elapsed().as_nanos();
        if residual_norm <= config.residual_tol {
            records.push(IterationRecord::terminal(n, residual_norm, elapsed_ns));
            break Termination::ResidualZero;
        }
        if n == config.max_iters {
            records.push(IterationRecord::terminal(n, residual_norm, elapsed_ns));
            break Termination::IterationCap;
        }

        let (outcome, dir, ls_satisfied) = match config.fixed_step {
            Some(alpha) => {
                let outcome = LineSearchOutcome {
                    alpha,
                    probes: 1,
                    satisfied: true,
                    used_fallback: false,
                };
                (outcome, d.clone(), None)
            }
            None => {
                let (outcome, dir) = search_with_fallback(map, &x, &d, ls)?;
                (outcome, dir, Some(outcome.satisfied && !outcome.used_fallback))
            }
        };
        if !outcome.satisfied {
            let mut rec = IterationRecord::terminal(n, residual_norm, elapsed_ns);
            rec.alpha = outcome.alpha;
            rec.ls_probes = outcome.probes;
            rec.used_fallback = outcome.used_fallback;
            records.push(rec);
            break Termination::LinesearchFailure;
        }

        let alpha = outcome.alpha;
        let descent_ok = descent_check(&r, &dir, config.diag_c)?;
        let x_next = x.add_scaled(alpha, &dir)?;
        let r_next = residual(map, &x_next)?;
        let slope = r.dot(&dir)?;
        let strong_wolfe_ok = r_next.dot(&dir)?.abs() <= -ls.sigma * slope;
        let ls_satisfied = match ls_satisfied {
            Some(s) => s,
            None => strict_conditions(&r, &r_next, &dir, alpha, ls)?,
        };

        let state = DirectionState::new(r, r_next, dir)?;
        let beta_value = match beta(config.beta_kind, &state, config.eps_denom) {
            Ok(b) => b,
            Err(Error::DegenerateDenominator { .. }) => {
                restarts += 1;
                0.0
            }
            Err(e) => return Err(e),
        };
        let d_next = directions::direction_from(state.r_next(), state.d_prev(), beta_value)?;

        records.push(IterationRecord {
            n,
            residual_norm,
            alpha,
            beta_value,
            ls_probes: outcome.probes,
            ls_satisfied,
            used_fallback: outcome.used_fallback,
            descent_ok,
            strong_wolfe_ok,
            step_executed: true,
            elapsed_ns,
        });

        x = x_next;
        r = state.r_next().clone();
        d = d_next;
        n += 1;
    };

    let rate_bound = if config.rate_check {
        rate_bound(&records, config.beta_kind, ls.delta, ls.sigma, config.diag_c).ok()
    } else {
        None
    };
    Ok(RunResult {
        final_point: x,
        records,
        terminated_by,
        restarts,
        rate_bound,
    })
}

/// `x_{n+1} = xₙ + α(T(xₙ) − xₙ)` with a constant α. Each row records whether
/// that α happened to satisfy the strict decrease and curvature checks.
pub fn run_km_constant(
    map: &FixedPointMap,
    x0: &Vector,
    alpha_const: f64,
    config: &KmConfig,
) -> Result<RunResult> {
    if !(alpha_const > 0.0 && alpha_const < 1.0) {
        return Err(invalid(format!("constant step {alpha_const} must lie in (0,1)")));
    }
    run_km(
        map,
        x0,
        config,
        |_, _| {
            Ok(LineSearchOutcome {
                alpha: alpha_const,
                probes: 1,
                satisfied: true,
                used_fallback: false,
            })
        },
        true,
    )
}

/// Krasnosel'skiĭ–Mann with steps from potential backtracking.
pub fn run_km_armijo(map: &FixedPointMap, x0: &Vector, config: &KmConfig) -> Result<RunResult> {
    config.linesearch.validate()?;
    let ls = config.linesearch.clone();
    run_km(map, x0, config, move |m, x| armijo_backtrack(m, x, &ls), false)
}

fn run_km<F>(
    map: &FixedPointMap,
    x0: &Vector,
    config: &KmConfig,
    mut step: F,
    record_wolfe: bool,
) -> Result<RunResult>
where
    F: FnMut(&FixedPointMap, &Vector) -> Result<LineSearchOutcome>,
{
    if config.max_iters == 0 {
        return Err(invalid("max_iters must be at least 1"));
    }
    check_start(map, x0)?;
    let ls = &config.linesearch;
    let start = Instant::now();
    let mut x = x0.clone();
    let mut r = residual(map, &x)?;
    let mut records = Vec::new();
    let mut n = 0;

    let terminated_by = loop {
        let residual_norm = r.norm();
        let elapsed_ns = start.elapsed().as_nanos();
        if residual_norm <= config.residual_tol {
            records.push(IterationRecord::terminal(n, residual_norm, elapsed_ns));
            break Termination::ResidualZero;
        }
        if n == config.max_iters {
            records.push(IterationRecord::terminal(n, residual_norm, elapsed_ns));
            break Termination::IterationCap;
        }
        let outcome = step(map, &x)?;
        if !outcome.satisfied {
            let mut rec = IterationRecord::terminal(n, residual_norm, elapsed_ns);
            rec.alpha = outcome.alpha;
            rec.ls_probes = outcome.probes;
            records.push(rec);
            break Termination::LinesearchFailure;
        }
        let alpha = outcome.alpha;
        // T(x) − x, bit-identical to −(x − T(x))
        let toward_t = r.neg();
        let x_next = x.add_scaled(alpha, &toward_t)?;
        let r_next = residual(map, &x_next)?;
        let ls_satisfied = if record_wolfe {
            strict_conditions(&r, &r_next, &toward_t, alpha, ls)?
        } else {
            outcome.satisfied
        };
        let strong_wolfe_ok = r_next.dot(&toward_t)?.abs() <= -ls.sigma * r.dot(&toward_t)?;
        records.push(IterationRecord {
            n,
            residual_norm,
            alpha,
            beta_value: 0.0,
            ls_probes: outcome.probes,
            ls_satisfied,
            used_fallback: false,
            descent_ok: descent_check(&r, &toward_t, config.diag_c)?,
            strong_wolfe_ok,
            step_executed: true,
            elapsed_ns,
        });
        x = x_next;
        r = r_next;
        n += 1;
    };

    Ok(RunResult {
        final_point: x,
        records,
        terminated_by,
        restarts: 0,
        rate_bound: None,
    })
}

/// Upper bounds on `‖xₙ − T(xₙ)‖` implied by the step-size conditions,
/// evaluated from the recorded step sizes:
///
/// - SD: `‖r₀‖ / sqrt(δ Σ αₖ)`
/// - DY: `‖r₀‖ / sqrt(δ/(1+σ) Σ αₖ)`
/// - FR: `‖r₀‖ / sqrt(δ/(1−σ) Σ (1 − 2σ + σ^{k+1}) αₖ)`
/// - PRP+, HS+: `‖r₀‖ / sqrt(c δ Σ αₖ)`
///
/// Sums run over executed steps `k ≤ n`. Entries are `+∞` while the sum is zero.
pub fn rate_bound(
    records: &[IterationRecord],
    variant: BetaKind,
    delta: f64,
    sigma: f64,
    diag_c: f64,
) -> Result<Vec<f64>> {
    let weight: Box<dyn Fn(usize) -> f64> = match variant {
        BetaKind::Sd => Box::new(move |_| delta),
        BetaKind::Dy => Box::new(move |_| delta / (1.0 + sigma)),
        BetaKind::Fr => {
            Box::new(move |k| delta / (1.0 - sigma) * (1.0 - 2.0 * sigma + sigma.powi(k as i32 + 1)))
        }
        BetaKind::PrpPlus | BetaKind::HsPlus => Box::new(move |_| diag_c * delta),
        BetaKind::Hz => return Err(Error::NoRateBound(variant.name().to_string())),
    };
    let r0 = match records.first() {
        Some(r) => r.residual_norm,
        None => return Ok(Vec::new()),
    };
    let mut sum = 0.0;
    Ok(records
        .iter()
        .map(|rec| {
            if rec.step_executed {
                sum += weight(rec.n) * rec.alpha;
            }
            if sum > 0.0 {
                r0 / sum.sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect())
}
