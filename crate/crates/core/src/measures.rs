//! Scanline intensity rows viewed as discrete measures over pixel columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two scanline masses count as equal.
pub const DEFAULT_BALANCE_TOLERANCE: f64 = 1e-6;

/// Nonnegative mass per pixel column of one scanline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanlineMeasure {
    values: Vec<f64>,
    y: usize,
    mass: f64,
}

impl ScanlineMeasure {
    /// Wraps arbitrary nonnegative finite masses (not limited to `[0, 1]`).
    pub fn from_masses(values: Vec<f64>, y: usize) -> Result<Self> {
        if let Some((column, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidIntensity { column, value });
        }
        let mass = values.iter().sum();
        Ok(ScanlineMeasure { values, y, mass })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn y(&self) -> usize {
        self.y
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Column indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Every entry multiplied by `factor` (which must be positive and finite).
    pub fn scaled(&self, factor: f64) -> ScanlineMeasure {
        debug_assert!(factor > 0.0 && factor.is_finite());
        let values: Vec<f64> = self.values.iter().map(|v| v * factor).collect();
        let mass = values.iter().sum();
        ScanlineMeasure {
            values,
            y: self.y,
            mass,
        }
    }
}

/// Copies an intensity row in `[0, 1]` into a measure without normalizing it.
pub fn measure_from_row(row: &[f64], y: usize) -> Result<ScanlineMeasure> {
    if let Some((column, &value)) = row
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
    {
        return Err(Error::InvalidIntensity { column, value });
    }
    ScanlineMeasure::from_masses(row.to_vec(), y)
}

/// Rescales to a probability; returns the measure and the original mass.
pub fn normalize(m: &ScanlineMeasure) -> Result<(ScanlineMeasure, f64)> {
    if m.mass <= 0.0 {
        return Err(Error::EmptyScanline { y: m.y });
    }
    let scale = m.mass;
    let values: Vec<f64> = m.values.iter().map(|v| v / scale).collect();
    let mass = values.iter().sum();
    Ok((
        ScanlineMeasure {
            values,
            y: m.y,
            mass,
        },
        scale,
    ))
}

/// Masses of a left/right scanline pair and whether they count as balanced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassComparison {
    pub m0: f64,
    pub m1: f64,
    /// `m1 / m0`; below 1 when part of the left row is hidden on the right.
    pub phi: f64,
    pub balanced: bool,
}

pub fn compare_masses(
    left: &ScanlineMeasure,
    right: &ScanlineMeasure,
    balance_tolerance: f64,
) -> Result<MassComparison> {
    if left.mass <= 0.0 {
        return Err(Error::EmptyScanline { y: left.y });
    }
    if right.mass <= 0.0 {
        return Err(Error::EmptyScanline { y: right.y });
    }
    let (m0, m1) = (left.mass, right.mass);
    Ok(MassComparison {
        m0,
        m1,
        phi: m1 / m0,
        balanced: (m0 - m1).abs() <= balance_tolerance * m0.max(m1),
    })
}

/// Divides both rows by the right-hand mass.
///
/// The right measure becomes a probability and the left one carries mass
/// `m0 / m1`, which is the input expected by the shifted iteration.
pub fn normalize_pair(
    left: &ScanlineMeasure,
    right: &ScanlineMeasure,
) -> Result<(ScanlineMeasure, ScanlineMeasure)> {
    let (nu1, m1) = normalize(right)?;
    if left.mass <= 0.0 {
        return Err(Error::EmptyScanline { y: left.y });
    }
    Ok((left.scaled(1.0 / m1), nu1))
}
