//! Exact one-dimensional transport with quadratic cost, used as a reference
//! for the entropic solver.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sinkhorn::{transport_cost, TransportPlan};

/// Largest dimension accepted by [`brute_force_plan`].
pub const BRUTE_FORCE_MAX_D: usize = 4;

const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub plan: TransportPlan,
    pub cost: f64,
}

/// North-west corner coupling of two equal-mass measures.
///
/// Mass is moved greedily from the current source column to the current
/// target column, advancing whichever runs out (both on a tie). The result
/// never crosses, which makes it optimal for the quadratic cost.
pub fn monotone_plan(nu0: &[f64], nu1: &[f64]) -> Result<ExactSolution> {
    if nu0.len() != nu1.len() {
        return Err(Error::Dimension {
            expected: nu0.len(),
            found: nu1.len(),
        });
    }
    let (m0, m1): (f64, f64) = (nu0.iter().sum(), nu1.iter().sum());
    if (m0 - m1).abs() > MASS_TOLERANCE {
        return Err(Error::MassMismatch {
            left: m0,
            right: m1,
        });
    }
    let d = nu0.len();
    let eps = MASS_TOLERANCE * m0.max(1.0);
    let mut plan = Matrix::zeros(d, d);
    let (mut i, mut j) = (0, 0);
    let (mut left, mut right) = (
        nu0.first().copied().unwrap_or(0.0),
        nu1.first().copied().unwrap_or(0.0),
    );
    while i < d && j < d {
        if left <= eps {
            i += 1;
            left = nu0.get(i).copied().unwrap_or(0.0);
            continue;
        }
        if right <= eps {
            j += 1;
            right = nu1.get(j).copied().unwrap_or(0.0);
            continue;
        }
        let moved = left.min(right);
        plan[(i, j)] += moved;
        left -= moved;
        right -= moved;
    }
    let cost = transport_cost(&plan);
    Ok(ExactSolution {
        plan: TransportPlan::new(plan),
        cost,
    })
}

/// Optimal transport cost `L(nu0, nu1)`.
pub fn exact_cost(nu0: &[f64], nu1: &[f64]) -> Result<f64> {
    monotone_plan(nu0, nu1).map(|s| s.cost)
}

/// Exhaustive minimum over all couplings whose entries are multiples of
/// `1 / grid_steps`.
///
/// Inputs are rounded to that grid first, so they should already be
/// quantized.
pub fn brute_force_plan(nu0: &[f64], nu1: &[f64], grid_steps: u32) -> Result<ExactSolution> {
    let d = nu0.len();
    if nu1.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: nu1.len(),
        });
    }
    if d > BRUTE_FORCE_MAX_D {
        return Err(Error::TooLarge {
            max: BRUTE_FORCE_MAX_D,
            found: d,
        });
    }
    if grid_steps == 0 {
        return Err(Error::InvalidConfig("grid_steps must be positive".into()));
    }
    let steps = grid_steps as f64;
    let quantize =
        |m: &[f64]| -> Vec<u32> { m.iter().map(|x| (x * steps).round() as u32).collect() };
    let rows = quantize(nu0);
    let mut cols = quantize(nu1);
    let (r, c): (u32, u32) = (rows.iter().sum(), cols.iter().sum());
    if r != c {
        return Err(Error::MassMismatch {
            left: r as f64 / steps,
            right: c as f64 / steps,
        });
    }

    let mut current = vec![0u32; d * d];
    let mut best: Option<(u64, Vec<u32>)> = None;
    search(
        &rows,
        &mut cols,
        0,
        0,
        rows.first().copied().unwrap_or(0),
        &mut current,
        0,
        &mut best,
    );

    let (_, cells) = best.expect("equal quantized masses always admit a coupling");
    let plan = Matrix::from_fn(d, d, |i, j| cells[i * d + j] as f64 / steps);
    let cost = transport_cost(&plan);
    Ok(ExactSolution {
        plan: TransportPlan::new(plan),
        cost,
    })
}

/// Fills cell `(i, j)` with every feasible amount, row by row. `left` is the
/// mass still unassigned in row `i`; `cols` the capacity left per column.
#[allow(clippy::too_many_arguments)]
fn search(
    rows: &[u32],
    cols: &mut [u32],
    i: usize,
    j: usize,
    left: u32,
    current: &mut [u32],
    cost: u64,
    best: &mut Option<(u64, Vec<u32>)>,
) {
    let d = rows.len();
    if i == d {
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            *best = Some((cost, current.to_vec()));
        }
        return;
    }
    if j == d - 1 {
        // The last column takes whatever the row still holds.
        if left > cols[j] {
            return;
        }
        cols[j] -= left;
        current[i * d + j] = left;
        let extra = left as u64 * ((i as i64 - j as i64).pow(2) as u64);
        let next_left = rows.get(i + 1).copied().unwrap_or(0);
        search(rows, cols, i + 1, 0, next_left, current, cost + extra, best);
        cols[j] += left;
        current[i * d + j] = 0;
        return;
    }
    let unit = (i as i64 - j as i64).pow(2) as u64;
    for amount in 0..=left.min(cols[j]) {
        cols[j] -= amount;
        current[i * d + j] = amount;
        search(
            rows,
            cols,
            i,
            j + 1,
            left - amount,
            current,
            cost + amount as u64 * unit,
            best,
        );
        cols[j] += amount;
    }
    current[i * d + j] = 0;
}

/// True if no two positive entries `(i, j)`, `(i', j')` have `i < i'` and
/// `j > j'`.
pub fn is_monotone(plan: &Matrix) -> bool {
    let support: Vec<(usize, usize)> = plan
        .iter()
        .filter(|(_, _, x)| *x > 0.0)
        .map(|(i, j, _)| (i, j))
        .collect();
    support
        .iter()
        .all(|&(i, j)| support.iter().all(|&(i2, j2)| !(i < i2 && j > j2)))
}
