//! Disparity functions extracted from transport plans.

mod map;
mod occlusion;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sinkhorn::TransportPlan;

pub use map::{disparity_map, DisparityConfig, DisparityMap, ScanlineDiagnostics, ScanlineStatus};
pub use occlusion::{recover_occlusions, ColumnInterval, ObjectShift, OcclusionReport};

/// Two compression values closer than this count as a repeat.
pub const DEFAULT_PLATEAU_TOLERANCE: f64 = 1e-3;

/// Rightward shift per source column of one scanline.
///
/// Columns whose row of the plan carries no mass are undefined; their value
/// is `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityProfile {
    pub y: usize,
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

impl DisparityProfile {
    /// A profile with every column undefined.
    pub fn empty(d: usize, y: usize) -> Self {
        DisparityProfile {
            y,
            values: vec![f64::NAN; d],
            defined: vec![false; d],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.defined[i].then(|| self.values[i])
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.values[i] = value;
        self.defined[i] = true;
    }

    pub fn clear(&mut self, i: usize) {
        self.values[i] = f64::NAN;
        self.defined[i] = false;
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }
}

/// Barycentric target column of each row minus the row index.
pub fn disparity_profile(gamma: &TransportPlan, y: usize) -> DisparityProfile {
    let entries = gamma.entries();
    let mut profile = DisparityProfile::empty(entries.rows(), y);
    for i in 0..entries.rows() {
        let row = entries.row(i);
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            let moment: f64 = row.iter().enumerate().map(|(j, g)| j as f64 * g).sum();
            profile.set(i, moment / mass - i as f64);
        }
    }
    profile
}

/// Forward difference `f(i + 1) - f(i)`, `None` unless both ends are defined.
pub fn compression(profile: &DisparityProfile) -> Vec<Option<f64>> {
    (0..profile.len().saturating_sub(1))
        .map(|i| Some(profile.get(i + 1)? - profile.get(i)?))
        .collect()
}

/// Mass quotient implied by the repeated compression value.
///
/// Adjacent pairs of equal values (within `tolerance`) are collected; the
/// value repeated most often is the plateau `1 - 1/phi`.
pub fn estimate_phi(delta: &[Option<f64>], tolerance: f64) -> Result<f64> {
    plateau(delta, tolerance)
        .map(|p| 1.0 / (1.0 - p))
        .ok_or(Error::NoPlateau)
}

/// Modal repeated value of a compression vector.
pub fn plateau(delta: &[Option<f64>], tolerance: f64) -> Option<f64> {
    let repeats: Vec<f64> = delta
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) if (a - b).abs() <= tolerance => Some(0.5 * (a + b)),
            _ => None,
        })
        .collect();
    // Group repeats into clusters of nearby values; ties go to the first.
    let mut best: Option<(usize, f64)> = None;
    for &center in &repeats {
        let members: Vec<f64> = repeats
            .iter()
            .copied()
            .filter(|x| (x - center).abs() <= tolerance)
            .collect();
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        if best.is_none_or(|(count, _)| members.len() > count) {
            best = Some((members.len(), mean));
        }
    }
    best.map(|(_, mean)| mean)
}
