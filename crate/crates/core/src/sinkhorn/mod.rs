//! Entropic optimal transport between two scanline measures.

mod hilbert;
mod kernel;
mod plan;
mod projection;
mod schedule;
mod solver;

pub use hilbert::{hilbert_distance, hilbert_distance_log, variation};
pub use kernel::{build_kernel, cost, GibbsKernel};
pub use plan::{ScalingVectors, TransportPlan};
pub use projection::{
    entropy, kl_divergence, project_cols, project_rows, regularized_cost, transport_cost,
};
pub use schedule::EpsilonSchedule;
pub use solver::{
    shifted_sinkhorn, sinkhorn, sinkhorn_log, ConvergenceReport, ShiftedLimits, SinkhornConfig,
    SinkhornIteration, StopReason,
};
