//! Whole-image disparity by independent scanline solves.

use std::collections::HashMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::occlusion::{recover_occlusions, OcclusionReport};
use super::{disparity_profile, DisparityProfile, DEFAULT_PLATEAU_TOLERANCE};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::measures::{
    compare_masses, measure_from_row, normalize, MassComparison, DEFAULT_BALANCE_TOLERANCE,
};
use crate::sinkhorn::{
    ConvergenceReport, EpsilonSchedule, GibbsKernel, SinkhornConfig, StopReason,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityConfig {
    pub sinkhorn: SinkhornConfig,
    /// Relative mass difference under which a scanline counts as balanced.
    pub balance_tolerance: f64,
    /// Solve through a decreasing epsilon schedule instead of a cold start.
    pub continuation: bool,
    /// Absolute mass slack of the occlusion peel (right scanline mass = 1).
    pub mass_tolerance: f64,
    pub plateau_tolerance: f64,
}

impl Default for DisparityConfig {
    fn default() -> Self {
        DisparityConfig {
            sinkhorn: SinkhornConfig::default(),
            balance_tolerance: DEFAULT_BALANCE_TOLERANCE,
            continuation: true,
            mass_tolerance: 1e-3,
            plateau_tolerance: DEFAULT_PLATEAU_TOLERANCE,
        }
    }
}

impl DisparityConfig {
    pub fn schedule(&self, d: usize) -> Result<EpsilonSchedule> {
        self.sinkhorn.validate()?;
        if self.continuation {
            EpsilonSchedule::new(d, self.sinkhorn.epsilon)
        } else {
            Ok(EpsilonSchedule::single(GibbsKernel::new(
                d,
                self.sinkhorn.epsilon,
            )?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "message")]
pub enum ScanlineStatus {
    Empty,
    Balanced,
    Occluded,
    /// More mass on the right; solved as balanced after normalizing.
    RightHeavier,
    /// Rejected input such as a scanline empty on one side only.
    Failed(String),
    /// The solver or the occlusion peel gave up.
    Numerical(String),
}

impl ScanlineStatus {
    fn from_error(e: &Error) -> Self {
        if e.is_numerical() {
            ScanlineStatus::Numerical(e.to_string())
        } else {
            ScanlineStatus::Failed(e.to_string())
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            ScanlineStatus::Failed(_) | ScanlineStatus::Numerical(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub iterations: usize,
    pub final_hilbert_u: f64,
    pub final_hilbert_v: f64,
    pub marginal_violation: f64,
    pub lambda: f64,
    pub stop_reason: StopReason,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        ConvergenceSummary {
            iterations: r.iterations_run,
            final_hilbert_u: r.hilbert_u.last().copied().unwrap_or(0.0),
            final_hilbert_v: r.hilbert_v.last().copied().unwrap_or(0.0),
            marginal_violation: r.final_marginal_violation,
            lambda: r.lambda,
            stop_reason: r.stop_reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanlineDiagnostics {
    pub y: usize,
    pub status: ScanlineStatus,
    pub masses: Option<MassComparison>,
    pub convergence: Option<ConvergenceSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub profiles: Vec<DisparityProfile>,
    /// Row-major flags for columns recovered as hidden.
    pub occluded: Vec<bool>,
    pub reports: Vec<OcclusionReport>,
    pub diagnostics: Vec<ScanlineDiagnostics>,
}

impl DisparityMap {
    /// A map with no data anywhere.
    pub fn new(width: usize, height: usize) -> Self {
        DisparityMap {
            width,
            height,
            profiles: (0..height)
                .map(|y| DisparityProfile::empty(width, y))
                .collect(),
            occluded: vec![false; width * height],
            reports: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.profiles[y].get(x)
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.profiles[y].set(x, value);
    }

    pub fn is_occluded(&self, x: usize, y: usize) -> bool {
        self.occluded[y * self.width + x]
    }

    pub fn mark_occluded(&mut self, x: usize, y: usize) {
        self.occluded[y * self.width + x] = true;
        self.profiles[y].clear(x);
    }

    pub fn defined_count(&self) -> usize {
        self.profiles
            .iter()
            .map(DisparityProfile::defined_count)
            .sum()
    }

    /// Rows as `Option` values, `None` for no-data.
    pub fn rows(&self) -> impl Iterator<Item = Vec<Option<f64>>> + '_ {
        self.profiles
            .iter()
            .map(|p| (0..p.len()).map(|i| p.get(i)).collect())
    }
}

struct Scanline {
    profile: DisparityProfile,
    report: Option<OcclusionReport>,
    status: ScanlineStatus,
    masses: Option<MassComparison>,
    convergence: Option<ConvergenceSummary>,
}

impl Scanline {
    fn blank(d: usize, status: ScanlineStatus, masses: Option<MassComparison>) -> Self {
        Scanline {
            profile: DisparityProfile::empty(d, 0),
            report: None,
            status,
            masses,
            convergence: None,
        }
    }
}

fn solve_scanline(
    left: &[f64],
    right: &[f64],
    schedule: &EpsilonSchedule,
    config: &DisparityConfig,
) -> Scanline {
    let d = left.len();
    let (nu0, nu1) = match (measure_from_row(left, 0), measure_from_row(right, 0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return Scanline::blank(d, ScanlineStatus::from_error(&e), None)
        }
    };
    if nu0.mass() == 0.0 && nu1.mass() == 0.0 {
        return Scanline::blank(d, ScanlineStatus::Empty, None);
    }
    let masses = match compare_masses(&nu0, &nu1, config.balance_tolerance) {
        Ok(m) => m,
        Err(e) => return Scanline::blank(d, ScanlineStatus::from_error(&e), None),
    };
    if masses.balanced || masses.m0 < masses.m1 {
        let status = if masses.balanced {
            ScanlineStatus::Balanced
        } else {
            ScanlineStatus::RightHeavier
        };
        let solved = normalize(&nu0).and_then(|(a, _)| {
            let (b, _) = normalize(&nu1)?;
            schedule.solve(a.values(), b.values(), &config.sinkhorn)
        });
        return match solved {
            Ok((plan, _, report)) => Scanline {
                profile: disparity_profile(&plan, 0),
                report: None,
                status,
                masses: Some(masses),
                convergence: Some((&report).into()),
            },
            Err(e) => Scanline::blank(d, ScanlineStatus::from_error(&e), Some(masses)),
        };
    }
    match recover_occlusions(&nu0, &nu1, schedule, config) {
        Ok((profile, report)) => Scanline {
            profile,
            report: Some(report),
            status: ScanlineStatus::Occluded,
            masses: Some(masses),
            convergence: None,
        },
        Err(Error::UnresolvedOcclusion {
            residual,
            objects,
            report,
        }) => Scanline {
            report: Some(*report),
            ..Scanline::blank(
                d,
                ScanlineStatus::Numerical(format!(
                    "unresolved occlusion: residual {residual} after {objects} objects"
                )),
                Some(masses),
            )
        },
        Err(e) => Scanline::blank(d, ScanlineStatus::from_error(&e), Some(masses)),
    }
}

/// Solves every scanline of a rectified pair.
///
/// Identical scanline pairs are solved once. A scanline that cannot be
/// solved becomes a no-data row and is flagged in the diagnostics.
pub fn disparity_map(
    left: &Image,
    right: &Image,
    config: &DisparityConfig,
) -> Result<DisparityMap> {
    if left.width() != right.width() {
        return Err(Error::Dimension {
            expected: left.width(),
            found: right.width(),
        });
    }
    if left.height() != right.height() {
        return Err(Error::Dimension {
            expected: left.height(),
            found: right.height(),
        });
    }
    let (d, h) = (left.width(), left.height());
    let mut map = DisparityMap::new(d, h);
    if d == 0 {
        return Ok(map);
    }
    let schedule = config.schedule(d)?;

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    for y in 0..h {
        let key: Vec<u64> = left
            .row(y)
            .iter()
            .chain(right.row(y))
            .map(|x| x.to_bits())
            .collect();
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(y);
    }
    debug!("{} scanlines, {} distinct", h, groups.len());

    let solved: Vec<Scanline> = groups
        .par_iter()
        .map(|rows| solve_scanline(left.row(rows[0]), right.row(rows[0]), &schedule, config))
        .collect();

    for (rows, line) in groups.iter().zip(&solved) {
        for &y in rows {
            let mut profile = line.profile.clone();
            profile.y = y;
            map.profiles[y] = profile;
            if let Some(report) = &line.report {
                let mut report = report.clone();
                report.y = y;
                for iv in &report.intervals {
                    for x in iv.start..=iv.end {
                        map.occluded[y * d + x] = true;
                    }
                }
                map.reports.push(report);
            }
            if let ScanlineStatus::Failed(msg) | ScanlineStatus::Numerical(msg) = &line.status {
                warn!("scanline {y}: {msg}");
            }
            map.diagnostics.push(ScanlineDiagnostics {
                y,
                status: line.status.clone(),
                masses: line.masses,
                convergence: line.convergence.clone(),
            });
        }
    }
    map.reports.sort_by_key(|r| r.y);
    map.diagnostics.sort_by_key(|r| r.y);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> DisparityConfig {
        DisparityConfig {
            sinkhorn: SinkhornConfig {
                epsilon: 0.1,
                max_iterations: 10_000,
                stop_tolerance: 1e-9,
                log_domain: true,
            },
            ..DisparityConfig::default()
        }
    }

    #[test]
    fn identical_images_have_zero_disparity() {
        let mut img = Image::new(16, 3);
        for x in 4..10 {
            img.set(x, 0, 0.6);
            img.set(x, 2, 0.6);
        }
        img.set(12, 1, 1.0);
        let map = disparity_map(&img, &img, &quick()).unwrap();
        for y in 0..3 {
            for x in 0..16 {
                match map.get(x, y) {
                    Some(f) => assert!(f.abs() < 0.5, "({x},{y}) = {f}"),
                    None => assert_eq!(img.get(x, y), 0.0),
                }
            }
        }
        assert_eq!(map.diagnostics.len(), 3);
        assert_eq!(map.profiles[2].y, 2);
    }

    #[test]
    fn empty_and_failed_rows_are_no_data() {
        let mut l = Image::new(8, 2);
        let r = Image::new(8, 2);
        l.set(3, 1, 0.5);
        let map = disparity_map(&l, &r, &quick()).unwrap();
        assert_eq!(map.defined_count(), 0);
        assert_eq!(map.diagnostics[0].status, ScanlineStatus::Empty);
        assert!(matches!(
            map.diagnostics[1].status,
            ScanlineStatus::Failed(_)
        ));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(matches!(
            disparity_map(&Image::new(4, 2), &Image::new(5, 2), &quick()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn rigid_shift_recovered() {
        let (d, h) = (30, 4);
        let mut l = Image::new(d, h);
        let mut r = Image::new(d, h);
        for y in 0..h {
            for x in 5..12 {
                l.set(x, y, 0.4);
                r.set(x + 4, y, 0.4);
            }
        }
        let map = disparity_map(&l, &r, &quick()).unwrap();
        for y in 0..h {
            for x in 5..12 {
                assert!((map.get(x, y).unwrap() - 4.0).abs() < 0.5);
            }
        }
    }
}
