//! Nonexpansive mappings: ball projections, the projected-gradient map of a
//! diagonal quadratic, and the weighted-projection map of the generalized
//! convex feasibility problem.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::vector::Vector;

/// Closed ball `{x : ‖x − center‖ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(center: Vector) -> Self {
        Self { center, radius: 1.0 }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        Ok(x.distance(&self.center)? <= self.radius)
    }

    /// Squared distance from `x` to the ball.
    pub fn distance_squared(&self, x: &Vector) -> Result<f64> {
        let gap = (x.distance(&self.center)? - self.radius).max(0.0);
        Ok(gap * gap)
    }

    /// Writes `weight * P(x)` into `out` (accumulating).
    fn project_accumulate(&self, x: &[f64], weight: f64, out: &mut [f64]) {
        let c = self.center.as_slice();
        let dist = x
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist <= self.radius {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += weight * xi;
            }
        } else {
            let s = self.radius / dist;
            for ((o, xi), ci) in out.iter_mut().zip(x).zip(c) {
                *o += weight * (ci + (xi - ci) * s);
            }
        }
    }

    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.project_accumulate(x, 1.0, &mut out);
        out
    }
}

/// Metric projection onto a ball. Points inside (boundary included) are
/// returned unchanged.
pub fn project_ball(x: &Vector, ball: &Ball) -> Result<Vector> {
    check_dim(ball.dim(), x.dim())?;
    Vector::new(ball.project_slice(x.as_slice()))
}

/// `f(x) = ½⟨x, Qx⟩ + ⟨b, x⟩` with diagonal positive semidefinite `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQuadratic {
    eigenvalues: Vector,
    linear: Vector,
    lambda_max: f64,
}

impl DiagonalQuadratic {
    pub fn new(eigenvalues: Vector, linear: Vector) -> Result<Self> {
        check_dim(eigenvalues.dim(), linear.dim())?;
        if eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(invalid("eigenvalues must be nonnegative"));
        }
        let lambda_max = eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(lambda_max > 0.0) {
            return Err(invalid("largest eigenvalue must be positive"));
        }
        Ok(Self {
            eigenvalues,
            linear,
            lambda_max,
        })
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    /// Lipschitz constant of the gradient.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(x.iter()
            .zip(self.eigenvalues.iter())
            .zip(self.linear.iter())
            .map(|((xi, li), bi)| 0.5 * li * xi * xi + bi * xi)
            .sum())
    }

    fn gradient_step(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        x.iter()
            .zip(self.eigenvalues.iter())
            .zip(self.linear.iter())
            .map(|((xi, li), bi)| xi - lambda * (li * xi + bi))
            .collect()
    }
}

/// `∇f(x) = Qx + b`.
pub fn qp_gradient(q: &DiagonalQuadratic, x: &Vector) -> Result<Vector> {
    check_dim(q.dim(), x.dim())?;
    let g = x
        .iter()
        .zip(q.eigenvalues.iter())
        .zip(q.linear.iter())
        .map(|((xi, li), bi)| li * xi + bi)
        .collect();
    Vector::new(g)
}

type MapFn = dyn Fn(&Vector) -> Result<Vector> + Send + Sync;

/// Evaluation oracle for a mapping `T: ℝᵈ → ℝᵈ`, assumed nonexpansive.
///
/// Nonexpansivity is not checked on construction; the property tests sample
/// it for every constructor in this module.
#[derive(Clone)]
pub struct FixedPointMap {
    dim: usize,
    descriptor: String,
    eval: Arc<MapFn>,
}

impl FixedPointMap {
    /// Wraps an arbitrary oracle. `f` must return vectors of dimension `dim`.
    pub fn new<F>(dim: usize, descriptor: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Self {
            dim,
            descriptor: descriptor.into(),
            eval: Arc::new(f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, format!("identity(d={dim})"), |x| Ok(x.clone()))
    }

    /// `T(x) = point` for every `x`.
    pub fn constant(point: Vector) -> Self {
        let dim = point.dim();
        Self::new(dim, format!("constant(d={dim})"), move |_| Ok(point.clone()))
    }

    /// `T = P_ball`.
    pub fn projection(ball: Ball) -> Self {
        let dim = ball.dim();
        let descriptor = format!("projection(d={dim}, radius={})", ball.radius());
        Self::new(dim, descriptor, move |x| project_ball(x, &ball))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.dim())?;
        let out = (self.eval)(x)?;
        check_dim(self.dim, out.dim())?;
        Ok(out)
    }
}

impl fmt::Debug for FixedPointMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FixedPointMap")
            .field("dim", &self.dim)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

/// `T = P_C(Id − λ∇f)`, nonexpansive for `λ ∈ (0, 2/L]`.
pub fn make_projected_gradient_map(q: DiagonalQuadratic, ball: Ball, lambda: f64) -> Result<FixedPointMap> {
    check_dim(q.dim(), ball.dim())?;
    let upper = 2.0 / q.lambda_max();
    if !(lambda > 0.0 && lambda <= upper) {
        return Err(invalid(format!("step {lambda} outside (0, 2/L] = (0, {upper}]")));
    }
    let dim = q.dim();
    let descriptor = format!(
        "projected_gradient(d={dim}, lambda_max={}, lambda={lambda}, radius={})",
        q.lambda_max(),
        ball.radius()
    );
    Ok(FixedPointMap::new(dim, descriptor, move |x| {
        let y = q.gradient_step(x.as_slice(), lambda);
        Vector::new(ball.project_slice(&y))
    }))
}

/// `T = P_outer(Σ wᵢ P_innerᵢ)`.
pub fn make_gcfp_map(outer: Ball, inner: Vec<Ball>, weights: Vec<f64>) -> Result<FixedPointMap> {
    if inner.is_empty() {
        return Err(invalid("at least one inner ball is required"));
    }
    if inner.len() != weights.len() {
        return Err(invalid(format!(
            "{} inner balls but {} weights",
            inner.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(invalid("weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("weights sum to {total}, expected 1")));
    }
    let dim = outer.dim();
    for b in &inner {
        check_dim(dim, b.dim())?;
    }
    let descriptor = format!("gcfp(d={dim}, m={})", inner.len());
    Ok(FixedPointMap::new(dim, descriptor, move |x| {
        let mut acc = vec![0.0; dim];
        for (ball, &w) in inner.iter().zip(&weights) {
            ball.project_accumulate(x.as_slice(), w, &mut acc);
        }
        Vector::new(outer.project_slice(&acc))
    }))
}

/// Weighted mean-square distance `Σ wᵢ d(x, Cᵢ)²`.
pub fn gcfp_objective(x: &Vector, inner: &[Ball], weights: &[f64]) -> Result<f64> {
    inner
        .iter()
        .zip(weights)
        .map(|(b, w)| Ok(w * b.distance_squared(x)?))
        .sum()
}

/// `x − T(x)`.
pub fn residual(map: &FixedPointMap, x: &Vector) -> Result<Vector> {
    x.sub(&map.evaluate(x)?)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
