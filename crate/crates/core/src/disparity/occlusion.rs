//! Peeling objects off an unbalanced scanline to find the columns hidden in
//! the right view.

use serde::{Deserialize, Serialize};

use super::map::DisparityConfig;
use super::{compression, disparity_profile, plateau, DisparityProfile};
use crate::error::{Error, Result};
use crate::measures::{compare_masses, ScanlineMeasure};
use crate::sinkhorn::EpsilonSchedule;

/// Inclusive range of left-image columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInterval {
    pub start: usize,
    pub end: usize,
}

impl ColumnInterval {
    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A processed object: its left-image extent and the recovered integer shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectShift {
    pub start: usize,
    pub end: usize,
    pub shift: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionReport {
    pub y: usize,
    /// Mass quotient `m1 / m0` of the raw scanlines.
    pub phi: f64,
    /// Left-image columns with no counterpart in the right image.
    pub intervals: Vec<ColumnInterval>,
    pub object_shifts: Vec<ObjectShift>,
    /// Repeated compression value on the leftmost object, if any.
    pub compression_plateau: Option<f64>,
    /// `1 / (1 - plateau)`.
    pub phi_estimate: Option<f64>,
    /// Mass removed as hidden, in units of the right scanline mass.
    pub hidden_mass: f64,
}

impl OcclusionReport {
    pub fn empty(y: usize, phi: f64) -> Self {
        OcclusionReport {
            y,
            phi,
            intervals: Vec::new(),
            object_shifts: Vec::new(),
            compression_plateau: None,
            phi_estimate: None,
            hidden_mass: 0.0,
        }
    }

    pub fn is_occluded(&self, i: usize) -> bool {
        self.intervals.iter().any(|iv| iv.contains(i))
    }
}

fn total(v: &[f64]) -> f64 {
    v.iter().sum()
}

fn first_run(v: &[f64]) -> Option<(usize, usize)> {
    let start = v.iter().position(|&x| x > 0.0)?;
    let len = v[start..].iter().take_while(|&&x| x > 0.0).count();
    Some((start, start + len - 1))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let m = total(v);
    v.iter().map(|x| x / m).collect()
}

/// Balanced profile of two rows after normalizing each to unit mass.
fn balanced_profile(
    schedule: &EpsilonSchedule,
    a: &[f64],
    b: &[f64],
    config: &DisparityConfig,
    y: usize,
) -> Result<DisparityProfile> {
    let (plan, _, _) = schedule.solve(&normalized(a), &normalized(b), &config.sinkhorn)?;
    Ok(disparity_profile(&plan, y))
}

/// Separates occluded columns from visible ones on a scanline whose left
/// mass exceeds the right one.
///
/// Objects are the maximal runs of positive left-image mass. Taking them
/// from left to right, the shift of the leftmost one is read off the
/// shifted plan at its first column. The left mass right of the object that
/// is missing from the right image right of the shifted object is then
/// looked for in the columns just after it; those columns are accepted as
/// hidden when the first column after them lands just past the shifted
/// object. When the masses agree the peel stops, otherwise the object is
/// removed from both rows and the next one is examined. The returned
/// profile carries the rigid shift on every processed object, leaves hidden
/// columns undefined, and takes the rest from a balanced solve on what is
/// left.
pub fn recover_occlusions(
    nu0: &ScanlineMeasure,
    nu1: &ScanlineMeasure,
    schedule: &EpsilonSchedule,
    config: &DisparityConfig,
) -> Result<(DisparityProfile, OcclusionReport)> {
    let d = nu0.len();
    if nu1.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: nu1.len(),
        });
    }
    if schedule.target().d() != d {
        return Err(Error::Dimension {
            expected: d,
            found: schedule.target().d(),
        });
    }
    let y = nu0.y();
    let masses = compare_masses(nu0, nu1, config.balance_tolerance)?;
    let mut report = OcclusionReport::empty(y, masses.phi);
    if masses.balanced {
        let profile = balanced_profile(schedule, nu0.values(), nu1.values(), config, y)?;
        return Ok((profile, report));
    }
    if masses.m0 < masses.m1 {
        return Err(Error::WrongPath {
            mass: masses.m0 / masses.m1,
        });
    }

    let tol = config.mass_tolerance;
    let mut r0: Vec<f64> = nu0.values().iter().map(|x| x / masses.m1).collect();
    let mut r1: Vec<f64> = nu1.values().iter().map(|x| x / masses.m1).collect();
    let mut visible0 = r0.clone();
    let mut visible1 = r1.clone();
    let mut resolved = false;

    while let Some((i0, i1)) = first_run(&r0) {
        let m1 = total(&r1);
        if m1 <= 0.0 {
            break;
        }
        let shifted = schedule.solve_shifted(
            &r0.iter().map(|x| x / m1).collect::<Vec<_>>(),
            &r1.iter().map(|x| x / m1).collect::<Vec<_>>(),
            &config.sinkhorn,
        )?;
        let f = disparity_profile(&shifted.odd_limit, y);
        if report.object_shifts.is_empty() {
            let delta = compression(&f);
            if let Some(p) = plateau(&delta[i0..i1.max(i0)], config.plateau_tolerance) {
                report.compression_plateau = Some(p);
                report.phi_estimate = Some(1.0 / (1.0 - p));
            }
        }
        let Some(f0) = f.get(i0) else { break };
        let s = f0.round() as i64;
        let right_end = i1 as i64 + s;
        if i0 as i64 + s < 0 || right_end >= d as i64 {
            break;
        }
        let right_end = right_end as usize;
        let hidden = total(&r0[i1 + 1..]) - total(&r1[right_end + 1..]);
        if hidden > tol {
            if let Some(interval) =
                locate_hidden(&r0, &r1, i1, right_end, hidden, tol, schedule, config, y)?
            {
                r0[interval.start..=interval.end]
                    .iter_mut()
                    .for_each(|x| *x = 0.0);
                visible0[interval.start..=interval.end]
                    .iter_mut()
                    .for_each(|x| *x = 0.0);
                report.hidden_mass += hidden;
                report.intervals.push(interval);
            }
        }
        report.object_shifts.push(ObjectShift {
            start: i0,
            end: i1,
            shift: s,
        });
        visible0[i0..=i1].iter_mut().for_each(|x| *x = 0.0);
        visible1[(i0 as i64 + s) as usize..=right_end]
            .iter_mut()
            .for_each(|x| *x = 0.0);
        if (total(&r0) - total(&r1)).abs() <= tol {
            resolved = true;
            break;
        }
        r0[i0..=i1].iter_mut().for_each(|x| *x = 0.0);
        r1[(i0 as i64 + s) as usize..=right_end]
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }

    if !resolved {
        let residual = total(&r0) - total(&r1);
        let objects = report.object_shifts.len();
        return Err(Error::UnresolvedOcclusion {
            residual,
            objects,
            report: Box::new(report),
        });
    }

    let mut profile = DisparityProfile::empty(d, y);
    let (rest0, rest1) = (total(&visible0), total(&visible1));
    if rest0 > tol && rest1 > tol {
        let rest = balanced_profile(schedule, &visible0, &visible1, config, y)?;
        for (i, &m) in visible0.iter().enumerate() {
            if m > 0.0 {
                if let Some(v) = rest.get(i) {
                    profile.set(i, v);
                }
            }
        }
    }
    for obj in &report.object_shifts {
        for i in obj.start..=obj.end {
            profile.set(i, obj.shift as f64);
        }
    }
    for iv in &report.intervals {
        for i in iv.start..=iv.end {
            profile.clear(i);
        }
    }
    Ok((profile, report))
}

/// Finds the hidden columns right after an object ending at `i1` whose image
/// ends at `right_end`, or `None` if the candidate is not covered by it.
#[allow(clippy::too_many_arguments)]
fn locate_hidden(
    r0: &[f64],
    r1: &[f64],
    i1: usize,
    right_end: usize,
    hidden: f64,
    tol: f64,
    schedule: &EpsilonSchedule,
    config: &DisparityConfig,
    y: usize,
) -> Result<Option<ColumnInterval>> {
    let d = r0.len();
    let Some(start) = (i1 + 1..d).find(|&i| r0[i] > 0.0) else {
        return Ok(None);
    };
    let mut acc = 0.0;
    let mut i2 = None;
    for (i, &x) in r0.iter().enumerate().skip(start) {
        acc += x;
        if acc >= hidden - tol {
            i2 = Some(i);
            break;
        }
    }
    let Some(i2) = i2 else { return Ok(None) };
    let mut trimmed = r0.to_vec();
    trimmed[start..=i2].iter_mut().for_each(|x| *x = 0.0);
    let Some(next) = (i2 + 1..d).find(|&i| trimmed[i] > 0.0) else {
        // Everything after the object is hidden.
        return Ok(Some(ColumnInterval { start, end: i2 }));
    };
    let g = balanced_profile(schedule, &trimmed, r1, config, y)?;
    let Some(gn) = g.get(next) else {
        return Ok(None);
    };
    let s_next = gn.round() as i64;
    let covered = i2 as i64 + s_next <= right_end as i64;
    let uncovered = next as i64 + s_next > right_end as i64;
    Ok((covered && uncovered).then_some(ColumnInterval { start, end: i2 }))
}
