use serde::{Deserialize, Serialize};

use super::kernel::GibbsKernel;
use super::plan::{ScalingVectors, TransportPlan};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Parameters of a Sinkhorn run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once `d_H(u_k, u_{k-1}) + d_H(v_k, v_{k-1})` drops to this value.
    /// With `0.0` the run only ends early at an exact fixed point.
    pub stop_tolerance: f64,
    pub log_domain: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.1,
            max_iterations: 100_000,
            stop_tolerance: 0.0,
            log_domain: true,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_tolerance must be nonnegative, got {}",
                self.stop_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

/// Per-iteration Hilbert-metric steps and final feasibility of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations_run: usize,
    pub hilbert_u: Vec<f64>,
    pub hilbert_v: Vec<f64>,
    pub final_marginal_violation: f64,
    pub lambda: f64,
    pub stop_reason: StopReason,
}

/// Rescale `ln ut`/`ln vt` back into the potentials once they pass this size.
const ABSORB_THRESHOLD: f64 = 50.0;
/// Row or column sums below this are treated as underflowed.
const TINY: f64 = 1e-280;

/// Step-by-step Sinkhorn iteration from `u = v = 1`.
///
/// After `k` steps the state holds `u_k = nu0 / (K v_{k-1})` and
/// `v_k = nu1 / (K^T u_k)`. The odd plan `diag(u_k) K diag(v_{k-1})` has row
/// sums `nu0`; the even plan `diag(u_k) K diag(v_k)` has column sums `nu1`.
pub struct SinkhornIteration<'k> {
    kernel: &'k GibbsKernel,
    nu0: Vec<f64>,
    nu1: Vec<f64>,
    iteration: usize,
    log_u: Vec<f64>,
    log_v: Vec<f64>,
    prev_log_v: Vec<f64>,
    engine: Engine,
}

enum Engine {
    Plain {
        u: Vec<f64>,
        v: Vec<f64>,
        prev_v: Vec<f64>,
    },
    Log(LogEngine),
}

/// Log-domain state kept as absorbed potentials plus bounded scalings:
/// `ln u_i = a_i + ln ut_i` and `work_ij = exp(a_i + b_j - c_ij / eps)` on
/// the supports of the two marginals.
struct LogEngine {
    rows: Vec<usize>,
    cols: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    ut: Vec<f64>,
    vt: Vec<f64>,
    work: Vec<f64>,
}

fn lse(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Variation of `a - b` over coordinates finite in both.
fn log_step(a: &[f64], b: &[f64]) -> f64 {
    let (lo, hi) = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| x - y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

impl<'k> SinkhornIteration<'k> {
    pub fn new(
        nu0: &[f64],
        nu1: &[f64],
        kernel: &'k GibbsKernel,
        log_domain: bool,
    ) -> Result<Self> {
        Self::warm(nu0, nu1, kernel, log_domain, &vec![0.0; kernel.d()])
    }

    /// Starts from `v_0 = exp(log_v0)` instead of the all-ones vector.
    pub fn warm(
        nu0: &[f64],
        nu1: &[f64],
        kernel: &'k GibbsKernel,
        log_domain: bool,
        log_v0: &[f64],
    ) -> Result<Self> {
        let d = kernel.d();
        if log_v0.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: log_v0.len(),
            });
        }
        for m in [nu0, nu1] {
            if m.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: m.len(),
                });
            }
            if let Some((column, &value)) = m
                .iter()
                .enumerate()
                .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
            {
                return Err(Error::InvalidIntensity { column, value });
            }
            if !m.iter().any(|&x| x > 0.0) {
                return Err(Error::EmptyScanline { y: 0 });
            }
        }
        let engine = if log_domain {
            let rows: Vec<usize> = (0..d).filter(|&i| nu0[i] > 0.0).collect();
            let cols: Vec<usize> = (0..d).filter(|&j| nu1[j] > 0.0).collect();
            Engine::Log(LogEngine {
                a: vec![0.0; rows.len()],
                b: vec![0.0; cols.len()],
                ut: vec![1.0; rows.len()],
                vt: vec![1.0; cols.len()],
                work: Vec::new(),
                rows,
                cols,
            })
        } else {
            let v0: Vec<f64> = log_v0.iter().map(|x| x.exp()).collect();
            Engine::Plain {
                u: vec![1.0; d],
                v: v0.clone(),
                prev_v: v0,
            }
        };
        Ok(SinkhornIteration {
            kernel,
            nu0: nu0.to_vec(),
            nu1: nu1.to_vec(),
            iteration: 0,
            log_u: vec![0.0; d],
            log_v: log_v0.to_vec(),
            prev_log_v: log_v0.to_vec(),
            engine,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `ln u_k`, `-inf` where `u_k` vanishes.
    pub fn log_u(&self) -> &[f64] {
        &self.log_u
    }

    /// `ln v_k`, `-inf` where `v_k` vanishes.
    pub fn log_v(&self) -> &[f64] {
        &self.log_v
    }

    /// Performs one `u` update followed by one `v` update and returns the
    /// Hilbert steps `(d_H(u_k, u_{k-1}), d_H(v_k, v_{k-1}))`.
    pub fn step(&mut self) -> Result<(f64, f64)> {
        let old_u = std::mem::take(&mut self.log_u);
        let old_v = std::mem::take(&mut self.log_v);
        let kernel = self.kernel;
        let first = self.iteration == 0;
        let (log_u, log_v) = match &mut self.engine {
            Engine::Plain { u, v, prev_v } => {
                plain_step(kernel, &self.nu0, &self.nu1, u, v, prev_v)?
            }
            Engine::Log(engine) => {
                engine.step(kernel, &self.nu0, &self.nu1, first.then_some(&old_v))
            }
        };
        self.log_u = log_u;
        self.log_v = log_v;
        let steps = (log_step(&self.log_u, &old_u), log_step(&self.log_v, &old_v));
        self.prev_log_v = old_v;
        self.iteration += 1;
        Ok(steps)
    }

    fn plan_from_logs(&self, log_v: &[f64]) -> TransportPlan {
        let d = self.kernel.d();
        let entries = Matrix::from_fn(d, d, |i, j| {
            let (a, b) = (self.log_u[i], log_v[j]);
            if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                0.0
            } else {
                (a + self.kernel.log_entry(i, j) + b).exp()
            }
        });
        TransportPlan::new(entries)
    }

    fn plain_plan(&self, u: &[f64], v: &[f64]) -> TransportPlan {
        let d = self.kernel.d();
        TransportPlan::new(Matrix::from_fn(d, d, |i, j| {
            u[i] * self.kernel.get(i, j) * v[j]
        }))
    }

    /// Row-feasible plan `diag(u_k) K diag(v_{k-1})`.
    pub fn odd_plan(&self) -> TransportPlan {
        match &self.engine {
            Engine::Plain { u, prev_v, .. } => self.plain_plan(u, prev_v),
            Engine::Log(_) => self.plan_from_logs(&self.prev_log_v),
        }
    }

    /// Column-feasible plan `diag(u_k) K diag(v_k)`.
    pub fn even_plan(&self) -> TransportPlan {
        match &self.engine {
            Engine::Plain { u, v, .. } => self.plain_plan(u, v),
            Engine::Log(_) => self.plan_from_logs(&self.log_v),
        }
    }

    /// Scalings reproducing [`Self::odd_plan`].
    pub fn odd_scalings(&self) -> ScalingVectors {
        match &self.engine {
            Engine::Plain { u, prev_v, .. } => ScalingVectors {
                u: u.clone(),
                v: prev_v.clone(),
                log_domain: false,
            },
            Engine::Log(_) => ScalingVectors {
                u: self.log_u.clone(),
                v: self.prev_log_v.clone(),
                log_domain: true,
            },
        }
    }

    /// Scalings reproducing [`Self::even_plan`].
    pub fn even_scalings(&self) -> ScalingVectors {
        match &self.engine {
            Engine::Plain { u, v, .. } => ScalingVectors {
                u: u.clone(),
                v: v.clone(),
                log_domain: false,
            },
            Engine::Log(_) => ScalingVectors {
                u: self.log_u.clone(),
                v: self.log_v.clone(),
                log_domain: true,
            },
        }
    }

    /// Runs until the stop rule fires. The first step moves the iterates
    /// onto the supports of the marginals, so convergence is only checked
    /// from the second step on.
    ///
    /// The final marginal violation is left at zero; it depends on which
    /// plan the caller reads out.
    fn run(&mut self, config: &SinkhornConfig) -> Result<ConvergenceReport> {
        let mut hilbert_u = Vec::new();
        let mut hilbert_v = Vec::new();
        let mut stop_reason = StopReason::MaxIterations;
        while self.iteration < config.max_iterations {
            let (du, dv) = self.step()?;
            hilbert_u.push(du);
            hilbert_v.push(dv);
            if self.iteration > 1 && du + dv <= config.stop_tolerance {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        Ok(ConvergenceReport {
            iterations_run: self.iteration,
            hilbert_u,
            hilbert_v,
            final_marginal_violation: 0.0,
            lambda: self.kernel.lambda(),
            stop_reason,
        })
    }
}

fn plain_step(
    kernel: &GibbsKernel,
    nu0: &[f64],
    nu1: &[f64],
    u: &mut Vec<f64>,
    v: &mut Vec<f64>,
    prev_v: &mut Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = kernel.d();
    let k = kernel.entries();
    let mut new_u = vec![0.0; d];
    for i in 0..d {
        if nu0[i] == 0.0 {
            continue;
        }
        let s: f64 = k.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let value = nu0[i] / s;
        if !(s > 0.0) || !value.is_finite() {
            return Err(Error::Underflow { index: i });
        }
        new_u[i] = value;
    }
    let mut t = vec![0.0; d];
    for (i, &ui) in new_u.iter().enumerate() {
        if ui != 0.0 {
            for (tj, kij) in t.iter_mut().zip(k.row(i)) {
                *tj += kij * ui;
            }
        }
    }
    let mut new_v = vec![0.0; d];
    for j in 0..d {
        if nu1[j] == 0.0 {
            continue;
        }
        let value = nu1[j] / t[j];
        if !(t[j] > 0.0) || !value.is_finite() {
            return Err(Error::Underflow { index: j });
        }
        new_v[j] = value;
    }
    let mut old_v = std::mem::replace(v, new_v);
    *u = new_u;
    // Mass-mismatched inputs drift u up and v down geometrically; a common
    // rescaling leaves every plan unchanged.
    let max_u = u.iter().copied().fold(0.0, f64::max);
    let max_v = v.iter().copied().fold(0.0, f64::max);
    let ratio = max_u / max_v;
    if !(1e-64..=1e64).contains(&ratio) {
        let c = ratio.sqrt().recip();
        u.iter_mut().for_each(|x| *x *= c);
        v.iter_mut().for_each(|x| *x /= c);
        old_v.iter_mut().for_each(|x| *x /= c);
    }
    *prev_v = old_v;
    Ok((
        u.iter().map(|&x| ln_or_neg_inf(x)).collect(),
        v.iter().map(|&x| ln_or_neg_inf(x)).collect(),
    ))
}

impl LogEngine {
    fn rebuild(&mut self, kernel: &GibbsKernel) {
        let (nr, nc) = (self.rows.len(), self.cols.len());
        self.work.resize(nr * nc, 0.0);
        for (r, &i) in self.rows.iter().enumerate() {
            let a = self.a[r];
            let row = &mut self.work[r * nc..(r + 1) * nc];
            for ((w, &j), &b) in row.iter_mut().zip(&self.cols).zip(&self.b) {
                *w = (a + b + kernel.log_entry(i, j)).exp();
            }
        }
    }

    fn rebuild_row(&mut self, kernel: &GibbsKernel, r: usize) {
        let nc = self.cols.len();
        let (i, a) = (self.rows[r], self.a[r]);
        for (c, &j) in self.cols.iter().enumerate() {
            self.work[r * nc + c] = (a + self.b[c] + kernel.log_entry(i, j)).exp();
        }
    }

    fn rebuild_col(&mut self, kernel: &GibbsKernel, c: usize) {
        let nc = self.cols.len();
        let (j, b) = (self.cols[c], self.b[c]);
        for (r, &i) in self.rows.iter().enumerate() {
            self.work[r * nc + c] = (self.a[r] + b + kernel.log_entry(i, j)).exp();
        }
    }

    fn absorb(&mut self, kernel: &GibbsKernel) {
        for (a, ut) in self.a.iter_mut().zip(self.ut.iter_mut()) {
            *a += ut.ln();
            *ut = 1.0;
        }
        for (b, vt) in self.b.iter_mut().zip(self.vt.iter_mut()) {
            *b += vt.ln();
            *vt = 1.0;
        }
        self.rebuild(kernel);
    }

    /// `initial` carries `ln v_0` on the first call, whose support may be
    /// wider than that of `nu1`.
    fn step(
        &mut self,
        kernel: &GibbsKernel,
        nu0: &[f64],
        nu1: &[f64],
        initial: Option<&Vec<f64>>,
    ) -> (Vec<f64>, Vec<f64>) {
        let d = kernel.d();
        let nc = self.cols.len();
        if let Some(log_v0) = initial {
            for (r, &i) in self.rows.iter().enumerate() {
                self.a[r] = nu0[i].ln() - lse((0..d).map(|j| log_v0[j] + kernel.log_entry(i, j)));
            }
            for (c, &j) in self.cols.iter().enumerate() {
                let col = self
                    .rows
                    .iter()
                    .zip(&self.a)
                    .map(|(&i, &a)| a + kernel.log_entry(i, j));
                self.b[c] = nu1[j].ln() - lse(col);
            }
            self.ut.fill(1.0);
            self.vt.fill(1.0);
            self.rebuild(kernel);
        } else {
            for r in 0..self.rows.len() {
                let row = &self.work[r * nc..(r + 1) * nc];
                let s: f64 = row.iter().zip(&self.vt).map(|(w, v)| w * v).sum();
                let i = self.rows[r];
                if s > TINY && s.is_finite() {
                    self.ut[r] = nu0[i] / s;
                } else {
                    let log_v = self.b.iter().zip(&self.vt).map(|(b, v)| b + v.ln());
                    let terms = log_v
                        .zip(&self.cols)
                        .map(|(lv, &j)| lv + kernel.log_entry(i, j));
                    self.a[r] = nu0[i].ln() - lse(terms);
                    self.ut[r] = 1.0;
                    self.rebuild_row(kernel, r);
                }
            }
            let mut t = vec![0.0; nc];
            for (r, &ut) in self.ut.iter().enumerate() {
                for (tj, w) in t.iter_mut().zip(&self.work[r * nc..(r + 1) * nc]) {
                    *tj += w * ut;
                }
            }
            // rebuild_col needs &mut self, so index rather than borrow.
            #[allow(clippy::needless_range_loop)]
            for c in 0..nc {
                let j = self.cols[c];
                if t[c] > TINY && t[c].is_finite() {
                    self.vt[c] = nu1[j] / t[c];
                } else {
                    let log_u = self.a.iter().zip(&self.ut).map(|(a, u)| a + u.ln());
                    let terms = log_u
                        .zip(&self.rows)
                        .map(|(lu, &i)| lu + kernel.log_entry(i, j));
                    self.b[c] = nu1[j].ln() - lse(terms);
                    self.vt[c] = 1.0;
                    self.rebuild_col(kernel, c);
                }
            }
        }
        let mut log_u = vec![f64::NEG_INFINITY; d];
        let mut big = false;
        for (r, &i) in self.rows.iter().enumerate() {
            let l = self.ut[r].ln();
            big |= l.abs() > ABSORB_THRESHOLD;
            log_u[i] = self.a[r] + l;
        }
        let mut log_v = vec![f64::NEG_INFINITY; d];
        for (c, &j) in self.cols.iter().enumerate() {
            let l = self.vt[c].ln();
            big |= l.abs() > ABSORB_THRESHOLD;
            log_v[j] = self.b[c] + l;
        }
        if big {
            self.absorb(kernel);
        }
        (log_u, log_v)
    }
}

fn run_balanced(
    nu0: &[f64],
    nu1: &[f64],
    kernel: &GibbsKernel,
    config: &SinkhornConfig,
    log_domain: bool,
) -> Result<(TransportPlan, ScalingVectors, ConvergenceReport)> {
    config.validate()?;
    let mut it = SinkhornIteration::new(nu0, nu1, kernel, log_domain)?;
    let mut report = it.run(config)?;
    let plan = it.odd_plan();
    report.final_marginal_violation = plan.col_violation(nu1);
    Ok((plan, it.odd_scalings(), report))
}

/// Sinkhorn iterations from `u = v = 1`, returning the row-feasible (odd)
/// plan. Uses plain arithmetic unless `config.log_domain` is set.
pub fn sinkhorn(
    nu0: &[f64],
    nu1: &[f64],
    kernel: &GibbsKernel,
    config: &SinkhornConfig,
) -> Result<(TransportPlan, ScalingVectors, ConvergenceReport)> {
    run_balanced(nu0, nu1, kernel, config, config.log_domain)
}

/// Log-domain Sinkhorn, regardless of `config.log_domain`.
pub fn sinkhorn_log(
    nu0: &[f64],
    nu1: &[f64],
    kernel: &GibbsKernel,
    config: &SinkhornConfig,
) -> Result<(TransportPlan, ScalingVectors, ConvergenceReport)> {
    run_balanced(nu0, nu1, kernel, config, true)
}

/// Result of the iteration when the source carries more mass than the target.
#[derive(Debug, Clone)]
pub struct ShiftedLimits {
    /// Column-feasible limit, a coupling of `nu0 / m0` and `nu1`.
    pub even_limit: TransportPlan,
    /// Row-feasible limit, `m0` times the even one.
    pub odd_limit: TransportPlan,
    pub odd_scalings: ScalingVectors,
    pub report: ConvergenceReport,
}

/// Alternating projections for a source of mass `m0 > 1` against a
/// probability target; even and odd iterates converge to separate limits.
pub fn shifted_sinkhorn(
    nu0: &[f64],
    nu1: &[f64],
    kernel: &GibbsKernel,
    config: &SinkhornConfig,
) -> Result<ShiftedLimits> {
    config.validate()?;
    let mass: f64 = nu0.iter().sum();
    if !(mass > 1.0) {
        return Err(Error::WrongPath { mass });
    }
    let mut it = SinkhornIteration::new(nu0, nu1, kernel, config.log_domain)?;
    let mut report = it.run(config)?;
    let even_limit = it.even_plan();
    let odd_limit = it.odd_plan();
    report.final_marginal_violation = odd_limit.scaled(1.0 / mass).col_violation(nu1);
    Ok(ShiftedLimits {
        even_limit,
        odd_limit,
        odd_scalings: it.odd_scalings(),
        report,
    })
}
