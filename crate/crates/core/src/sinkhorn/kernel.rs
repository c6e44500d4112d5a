use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Quadratic ground cost between pixel columns.
#[inline]
pub fn cost(i: usize, j: usize) -> f64 {
    let diff = i as f64 - j as f64;
    diff * diff
}

/// Gibbs kernel `exp(-(i - j)^2 / epsilon)` with its Birkhoff contraction data.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    d: usize,
    epsilon: f64,
    entries: Matrix,
    log_eta: f64,
    lambda: f64,
    underflow: bool,
}

impl GibbsKernel {
    pub fn new(d: usize, epsilon: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig(
                "kernel dimension must be at least 1".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let entries = Matrix::from_fn(d, d, |i, j| (-cost(i, j) / epsilon).exp());
        let underflow = entries.as_slice().contains(&0.0);
        if underflow {
            log::debug!("Gibbs kernel d={d} epsilon={epsilon} has entries underflowing to zero");
        }
        // The cross-ratio max sits at the corners (1, d, d, 1) for a quadratic cost.
        let log_eta = 2.0 * cost(0, d - 1) / epsilon;
        Ok(GibbsKernel {
            d,
            epsilon,
            entries,
            log_eta,
            lambda: (log_eta / 4.0).tanh(),
            underflow,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    #[inline]
    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        -cost(i, j) / self.epsilon
    }

    /// Cross-ratio bound `eta(K)`; overflows to infinity for wide kernels.
    pub fn eta(&self) -> f64 {
        self.log_eta.exp()
    }

    pub fn log_eta(&self) -> f64 {
        self.log_eta
    }

    /// Contraction factor `(sqrt(eta) - 1) / (sqrt(eta) + 1)` of the kernel
    /// in the Hilbert metric.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `1 - lambda`, accurate even when `lambda` rounds to 1.
    pub fn lambda_gap(&self) -> f64 {
        let t = (-self.log_eta / 2.0).exp();
        2.0 * t / (1.0 + t)
    }

    /// True if some entries are exactly zero in `f64`.
    pub fn underflows(&self) -> bool {
        self.underflow
    }
}

/// Convenience wrapper around [`GibbsKernel::new`].
pub fn build_kernel(d: usize, epsilon: f64) -> Result<GibbsKernel> {
    GibbsKernel::new(d, epsilon)
}
