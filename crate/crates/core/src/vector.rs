//! Dense vectors over ℝᵈ with checked dimensions and finite entries.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// A point or direction in ℝᵈ.
///
/// The dimension is fixed at construction and every entry is finite. All
/// arithmetic returns a fresh vector; values are never mutated in place, so a
/// `Vector` can be shared freely between threads.
#[derive(Clone, PartialEq)]
pub struct Vector {
    entries: Vec<f64>,
}

impl Vector {
    /// Builds a vector, rejecting empty input and NaN/Inf entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        check_finite(&entries)?;
        Ok(Self { entries })
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    /// Σ aᵢbᵢ.
    pub fn dot(&self, other: &Vector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(dot_slices(&self.entries, &other.entries))
    }

    /// Euclidean norm, `sqrt(dot(a, a))`.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        dot_slices(&self.entries, &self.entries)
    }

    /// `self + alpha * x`.
    pub fn add_scaled(&self, alpha: f64, x: &Vector) -> Result<Vector> {
        axpy(alpha, x, self)
    }

    /// `self - other`.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        same_dim(self, other)?;
        let out = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Vector::new(out)
    }

    pub fn neg(&self) -> Vector {
        Vector {
            entries: self.entries.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Result<Vector> {
        Vector::new(self.entries.iter().map(|a| alpha * a).collect())
    }

    /// Euclidean distance `‖self - other‖`.
    pub fn distance(&self, other: &Vector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.entries).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

/// Σ aᵢbᵢ for two vectors of equal dimension.
pub fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    a.dot(b)
}

pub fn norm(a: &Vector) -> f64 {
    a.norm()
}

/// `y + alpha * x`, componentwise.
pub fn axpy(alpha: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "axpy scale {alpha} is not finite"
        )));
    }
    same_dim(x, y)?;
    let out = x
        .entries
        .iter()
        .zip(&y.entries)
        .map(|(xi, yi)| yi + alpha * xi)
        .collect();
    Vector::new(out)
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_dim(a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

fn check_finite(entries: &[f64]) -> Result<()> {
    match entries.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
