use serde::{Deserialize, Serialize};

use super::kernel::GibbsKernel;
use crate::matrix::Matrix;

/// Nonnegative coupling between the columns of two scanlines.
///
/// Rows index the left (source) measure, columns the right (target) one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Matrix,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn new(entries: Matrix) -> Self {
        let row_marginal = entries.row_sums();
        let col_marginal = entries.col_sums();
        TransportPlan {
            entries,
            row_marginal,
            col_marginal,
        }
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }

    pub fn d(&self) -> usize {
        self.entries.rows()
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn mass(&self) -> f64 {
        self.row_marginal.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> TransportPlan {
        TransportPlan::new(self.entries.scale(factor))
    }

    pub fn transpose(&self) -> TransportPlan {
        TransportPlan {
            entries: self.entries.transpose(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
        }
    }

    /// Largest deviation of the column sums from `target`.
    pub fn col_violation(&self, target: &[f64]) -> f64 {
        max_abs_diff(&self.col_marginal, target)
    }

    /// Largest deviation of the row sums from `target`.
    pub fn row_violation(&self, target: &[f64]) -> f64 {
        max_abs_diff(&self.row_marginal, target)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Diagonal scalings `u`, `v` such that the plan is `diag(u) K diag(v)`.
///
/// In log-domain mode the vectors hold `ln u` and `ln v`, with `-inf` where
/// the corresponding marginal vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingVectors {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub log_domain: bool,
}

impl ScalingVectors {
    pub fn log_u(&self) -> Vec<f64> {
        if self.log_domain {
            self.u.clone()
        } else {
            self.u.iter().map(|x| x.ln()).collect()
        }
    }

    pub fn log_v(&self) -> Vec<f64> {
        if self.log_domain {
            self.v.clone()
        } else {
            self.v.iter().map(|x| x.ln()).collect()
        }
    }

    /// Rebuilds `diag(u) K diag(v)`.
    pub fn reconstruct(&self, kernel: &GibbsKernel) -> Matrix {
        let d = kernel.d();
        if self.log_domain {
            Matrix::from_fn(d, d, |i, j| {
                let (a, b) = (self.u[i], self.v[j]);
                if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a + kernel.log_entry(i, j) + b).exp()
                }
            })
        } else {
            Matrix::from_fn(d, d, |i, j| self.u[i] * kernel.get(i, j) * self.v[j])
        }
    }
}
