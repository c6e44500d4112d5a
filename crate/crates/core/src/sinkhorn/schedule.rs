use super::kernel::GibbsKernel;
use super::plan::{ScalingVectors, TransportPlan};
use super::solver::{
    ConvergenceReport, ShiftedLimits, SinkhornConfig, SinkhornIteration, StopReason,
};
use crate::error::{Error, Result};

/// Geometric decrease per continuation stage.
const STAGE_FACTOR: f64 = 0.5;
/// Stop rule for the intermediate (non-target) stages.
const STAGE_TOLERANCE: f64 = 1e-3;

/// Decreasing regularization levels ending at the target epsilon.
///
/// Each stage warm-starts from the dual potentials of the previous one, so
/// the final stage begins close to its fixed point. The fixed point itself
/// does not depend on the starting vectors.
#[derive(Debug, Clone)]
pub struct EpsilonSchedule {
    kernels: Vec<GibbsKernel>,
}

impl EpsilonSchedule {
    /// Halves epsilon from `(d - 1)^2` down to `epsilon`.
    pub fn new(d: usize, epsilon: f64) -> Result<Self> {
        let target = GibbsKernel::new(d, epsilon)?;
        let mut levels = Vec::new();
        let mut eps = ((d.saturating_sub(1)) as f64).powi(2);
        while eps > epsilon {
            levels.push(eps);
            eps *= STAGE_FACTOR;
        }
        let mut kernels = levels
            .into_iter()
            .map(|e| GibbsKernel::new(d, e))
            .collect::<Result<Vec<_>>>()?;
        kernels.push(target);
        Ok(EpsilonSchedule { kernels })
    }

    /// A single stage at the target epsilon (cold start).
    pub fn single(kernel: GibbsKernel) -> Self {
        EpsilonSchedule {
            kernels: vec![kernel],
        }
    }

    pub fn target(&self) -> &GibbsKernel {
        self.kernels.last().expect("schedule has a target stage")
    }

    pub fn stages(&self) -> usize {
        self.kernels.len()
    }

    /// Runs every stage within a total budget of `config.max_iterations` and
    /// returns the iteration state at the target epsilon.
    ///
    /// Hilbert steps of all stages are concatenated in the report; only the
    /// target stage honours `config.stop_tolerance`.
    pub fn run<'s>(
        &'s self,
        nu0: &[f64],
        nu1: &[f64],
        config: &SinkhornConfig,
    ) -> Result<(SinkhornIteration<'s>, ConvergenceReport)> {
        self.run_observed(nu0, nu1, config, |_, _, _| {})
    }

    /// Like [`run`](Self::run), calling `observe(state, du, dv)` after every
    /// step of the target stage.
    pub fn run_observed<'s>(
        &'s self,
        nu0: &[f64],
        nu1: &[f64],
        config: &SinkhornConfig,
        mut observe: impl FnMut(&SinkhornIteration<'s>, f64, f64),
    ) -> Result<(SinkhornIteration<'s>, ConvergenceReport)> {
        config.validate()?;
        let target = self.target();
        if (config.epsilon - target.epsilon()).abs() > 1e-12 * target.epsilon() {
            return Err(Error::InvalidConfig(format!(
                "schedule targets epsilon {} but config asks for {}",
                target.epsilon(),
                config.epsilon
            )));
        }
        let d = target.d();
        let mut warmup = self.kernels.len() - 1;
        let stage_cap = config.max_iterations / (2 * warmup.max(1));
        if stage_cap == 0 {
            // Budget too small to share; start cold at the target.
            warmup = 0;
        }
        let mut hilbert_u = Vec::new();
        let mut hilbert_v = Vec::new();
        let mut log_v = vec![0.0; d];
        let mut used = 0;
        for (s, kernel) in self.kernels[..warmup].iter().enumerate() {
            let mut it = SinkhornIteration::warm(nu0, nu1, kernel, config.log_domain, &log_v)?;
            for _ in 0..stage_cap {
                let (du, dv) = it.step()?;
                hilbert_u.push(du);
                hilbert_v.push(dv);
                if du + dv <= STAGE_TOLERANCE {
                    break;
                }
            }
            used += it.iteration();
            let ratio = kernel.epsilon() / self.kernels[s + 1].epsilon();
            log_v = it.log_v().iter().map(|x| x * ratio).collect();
        }
        let mut it = SinkhornIteration::warm(nu0, nu1, target, config.log_domain, &log_v)?;
        let budget = config.max_iterations - used;
        let mut stop_reason = StopReason::MaxIterations;
        while it.iteration() < budget {
            let (du, dv) = it.step()?;
            hilbert_u.push(du);
            hilbert_v.push(dv);
            observe(&it, du, dv);
            if it.iteration() > 1 && du + dv <= config.stop_tolerance {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        let report = ConvergenceReport {
            iterations_run: used + it.iteration(),
            hilbert_u,
            hilbert_v,
            final_marginal_violation: 0.0,
            lambda: target.lambda(),
            stop_reason,
        };
        Ok((it, report))
    }

    /// Balanced solve; returns the row-feasible plan.
    pub fn solve(
        &self,
        nu0: &[f64],
        nu1: &[f64],
        config: &SinkhornConfig,
    ) -> Result<(TransportPlan, ScalingVectors, ConvergenceReport)> {
        let (it, mut report) = self.run(nu0, nu1, config)?;
        let plan = it.odd_plan();
        report.final_marginal_violation = plan.col_violation(nu1);
        Ok((plan, it.odd_scalings(), report))
    }

    /// Shifted solve for a source of mass above 1.
    pub fn solve_shifted(
        &self,
        nu0: &[f64],
        nu1: &[f64],
        config: &SinkhornConfig,
    ) -> Result<ShiftedLimits> {
        let mass: f64 = nu0.iter().sum();
        if !(mass > 1.0) {
            return Err(Error::WrongPath { mass });
        }
        let (it, mut report) = self.run(nu0, nu1, config)?;
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
}
