use super::kernel::cost;
use super::plan::TransportPlan;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// KL projection onto the plans whose row sums equal `mu`.
///
/// Each row is rescaled by `mu_i / sum_j gamma_ij`; rows with `mu_i = 0` are
/// zeroed.
pub fn project_rows(gamma: &Matrix, mu: &[f64]) -> Result<TransportPlan> {
    if mu.len() != gamma.rows() {
        return Err(Error::Dimension {
            expected: gamma.rows(),
            found: mu.len(),
        });
    }
    let mut out = gamma.clone();
    for (i, &target) in mu.iter().enumerate() {
        let row = out.row_mut(i);
        if target == 0.0 {
            row.fill(0.0);
            continue;
        }
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InfeasibleProjection {
                index: i,
                mass: target,
            });
        }
        let scale = target / sum;
        row.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(TransportPlan::new(out))
}

/// KL projection onto the plans whose column sums equal `rho`.
pub fn project_cols(gamma: &Matrix, rho: &[f64]) -> Result<TransportPlan> {
    if rho.len() != gamma.cols() {
        return Err(Error::Dimension {
            expected: gamma.cols(),
            found: rho.len(),
        });
    }
    let sums = gamma.col_sums();
    let mut scale = Vec::with_capacity(rho.len());
    for (j, (&target, &sum)) in rho.iter().zip(&sums).enumerate() {
        if target == 0.0 {
            scale.push(0.0);
        } else if sum > 0.0 {
            scale.push(target / sum);
        } else {
            return Err(Error::InfeasibleProjection {
                index: j,
                mass: target,
            });
        }
    }
    let out = Matrix::from_fn(gamma.rows(), gamma.cols(), |i, j| gamma[(i, j)] * scale[j]);
    Ok(TransportPlan::new(out))
}

/// `sum gamma_ij ln(gamma_ij / alpha_ij)` with `0 ln 0 = 0`; `+inf` when
/// `gamma` charges an entry where `alpha` vanishes.
pub fn kl_divergence(gamma: &Matrix, alpha: &Matrix) -> f64 {
    assert_eq!((gamma.rows(), gamma.cols()), (alpha.rows(), alpha.cols()));
    let mut total = 0.0;
    for (&g, &a) in gamma.as_slice().iter().zip(alpha.as_slice()) {
        if g == 0.0 {
            continue;
        }
        if a <= 0.0 {
            return f64::INFINITY;
        }
        total += g * (g / a).ln();
    }
    total
}

/// Transport cost `sum (i - j)^2 gamma_ij`.
pub fn transport_cost(gamma: &Matrix) -> f64 {
    gamma.iter().map(|(i, j, g)| cost(i, j) * g).sum()
}

/// Discrete entropy `-sum gamma_ij (ln gamma_ij - 1)`.
pub fn entropy(gamma: &Matrix) -> f64 {
    -gamma
        .as_slice()
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| g * (g.ln() - 1.0))
        .sum::<f64>()
}

/// Entropically regularized cost `<c, gamma> - epsilon h(gamma)`.
pub fn regularized_cost(gamma: &Matrix, epsilon: f64) -> f64 {
    transport_cost(gamma) - epsilon * entropy(gamma)
}
