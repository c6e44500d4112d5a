//! Synthetic cartoon stereo pairs with ground truth, and depth from disparity.

use serde::{Deserialize, Serialize};

use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use crate::image::Image;

/// Aligned two-camera rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    /// Distance between the optical centers.
    pub baseline: f64,
    /// Distance of the image plane from the optical line.
    pub focal: f64,
    /// Pixels per length unit.
    pub beta: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        CameraRig {
            baseline: 10.0,
            focal: 1000.0,
            beta: 2.0,
        }
    }
}

impl CameraRig {
    pub fn new(baseline: f64, focal: f64, beta: f64) -> Result<Self> {
        let rig = CameraRig {
            baseline,
            focal,
            beta,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("baseline", self.baseline),
            ("focal", self.focal),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Disparity in pixels of a point at depth `depth`, before rounding.
    pub fn disparity(&self, depth: f64) -> f64 {
        self.focal * self.baseline / (depth * self.beta)
    }

    /// Integer pixel shift applied by the renderer.
    pub fn pixel_shift(&self, depth: f64) -> i64 {
        self.disparity(depth).round() as i64
    }
}

pub fn depth_from_disparity(shift_px: f64, rig: &CameraRig) -> Result<f64> {
    if !(shift_px > 0.0) {
        return Err(Error::AtInfinity(shift_px));
    }
    Ok(rig.focal * rig.baseline / (rig.beta * shift_px))
}

/// Planar outline in left-view pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    /// Inclusive pixel bounds.
    Rect {
        x0: usize,
        x1: usize,
        y0: usize,
        y1: usize,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
    },
}

impl Shape {
    /// Inclusive column range covered on row `y`.
    pub fn extent(&self, y: usize) -> Option<(i64, i64)> {
        match *self {
            Shape::Rect { x0, x1, y0, y1 } => {
                (y0..=y1).contains(&y).then_some((x0 as i64, x1 as i64))
            }
            Shape::Ellipse { cx, cy, rx, ry } => {
                let t = (y as f64 - cy) / ry;
                let q = 1.0 - t * t;
                if !(q >= 0.0) {
                    return None;
                }
                let half = rx * q.sqrt();
                let (lo, hi) = ((cx - half).ceil() as i64, (cx + half).floor() as i64);
                (lo <= hi).then_some((lo, hi))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub depth: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartoonScene {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<SceneObject>,
}

impl CartoonScene {
    pub fn new(width: usize, height: usize) -> Self {
        CartoonScene {
            width,
            height,
            objects: Vec::new(),
        }
    }

    pub fn with(mut self, shape: Shape, depth: f64, intensity: f64) -> Self {
        self.objects.push(SceneObject {
            shape,
            depth,
            intensity,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (k, o) in self.objects.iter().enumerate() {
            if !(o.depth.is_finite() && o.depth > 0.0) {
                return Err(Error::Scene(format!(
                    "object {k}: depth must be positive, got {}",
                    o.depth
                )));
            }
            if !(o.intensity > 0.0 && o.intensity <= 1.0) {
                return Err(Error::Scene(format!(
                    "object {k}: intensity must lie in (0, 1], got {}",
                    o.intensity
                )));
            }
        }
        Ok(())
    }
}

/// Which view sees a point that the other view does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Left,
    Right,
}

/// Run of columns on one scanline seen only in `view`, in that view's columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenInterval {
    pub y: usize,
    pub view: View,
    pub start: usize,
    pub end: usize,
    pub object: usize,
}

#[derive(Debug, Clone)]
pub struct RenderedPair {
    pub left: Image,
    pub right: Image,
    /// Integer shift per visible left pixel; hidden pixels are marked occluded.
    pub truth: DisparityMap,
    pub hidden: Vec<HiddenInterval>,
    /// No two objects overlap in either view.
    pub non_occluded: bool,
}

/// Paints the scene far to near in both views.
///
/// Objects are given in left-view columns; the right view draws each one
/// shifted by its integer disparity.
pub fn render_pair(scene: &CartoonScene, rig: &CameraRig) -> Result<RenderedPair> {
    scene.validate()?;
    rig.validate()?;
    let (d, h) = (scene.width, scene.height);
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by(|&a, &b| scene.objects[b].depth.total_cmp(&scene.objects[a].depth));

    let shifts: Vec<i64> = scene
        .objects
        .iter()
        .map(|o| rig.pixel_shift(o.depth))
        .collect();
    for (k, o) in scene.objects.iter().enumerate() {
        for y in 0..h {
            if let Some((a, b)) = o.shape.extent(y) {
                let s = shifts[k];
                if a < 0 || b >= d as i64 || a + s < 0 || b + s >= d as i64 {
                    return Err(Error::OutOfFrame {
                        index: k,
                        start: a,
                        end: b,
                        shift: s,
                        width: d,
                    });
                }
            }
        }
    }

    let mut left = Image::new(d, h);
    let mut right = Image::new(d, h);
    let mut owner_left = vec![None; d * h];
    let mut owner_right = vec![None; d * h];
    let mut non_occluded = true;
    for &k in &order {
        let o = &scene.objects[k];
        for y in 0..h {
            let Some((a, b)) = o.shape.extent(y) else {
                continue;
            };
            for x in a..=b {
                let (xl, xr) = (x as usize, (x + shifts[k]) as usize);
                non_occluded &=
                    owner_left[y * d + xl].is_none() && owner_right[y * d + xr].is_none();
                owner_left[y * d + xl] = Some(k);
                owner_right[y * d + xr] = Some(k);
                left.set(xl, y, o.intensity);
                right.set(xr, y, o.intensity);
            }
        }
    }

    let mut truth = DisparityMap::new(d, h);
    let mut hidden = Vec::new();
    for y in 0..h {
        let mut runs = HiddenRuns::default();
        for x in 0..d {
            if let Some(k) = owner_left[y * d + x] {
                let xr = (x as i64 + shifts[k]) as usize;
                if owner_right[y * d + xr] == Some(k) {
                    truth.set(x, y, shifts[k] as f64);
                } else {
                    truth.mark_occluded(x, y);
                    runs.push(x, k);
                    continue;
                }
            }
            runs.close(y, View::Left, &mut hidden);
        }
        runs.close(y, View::Left, &mut hidden);
        for x in 0..d {
            if let Some(k) = owner_right[y * d + x] {
                let xl = x as i64 - shifts[k];
                if owner_left[y * d + xl as usize] != Some(k) {
                    runs.push(x, k);
                    continue;
                }
            }
            runs.close(y, View::Right, &mut hidden);
        }
        runs.close(y, View::Right, &mut hidden);
    }
    Ok(RenderedPair {
        left,
        right,
        truth,
        hidden,
        non_occluded,
    })
}

#[derive(Default)]
struct HiddenRuns {
    open: Option<(usize, usize, usize)>,
}

impl HiddenRuns {
    fn push(&mut self, x: usize, object: usize) {
        self.open = match self.open {
            Some((start, _, k)) if k == object => Some((start, x, k)),
            _ => Some((x, x, object)),
        };
    }

    fn close(&mut self, y: usize, view: View, out: &mut Vec<HiddenInterval>) {
        if let Some((start, end, object)) = self.open.take() {
            out.push(HiddenInterval {
                y,
                view,
                start,
                end,
                object,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One point per defined pixel of positive disparity, at its depth. The
/// intensity is read from the matching right-image pixel.
pub fn reconstruct(map: &DisparityMap, rig: &CameraRig, right: &Image) -> Result<PointCloud> {
    if map.width != right.width() {
        return Err(Error::Dimension {
            expected: map.width,
            found: right.width(),
        });
    }
    if map.height != right.height() {
        return Err(Error::Dimension {
            expected: map.height,
            found: right.height(),
        });
    }
    let mut cloud = PointCloud::default();
    for y in 0..map.height {
        for x in 0..map.width {
            let Some(f) = map.get(x, y) else { continue };
            let Ok(z) = depth_from_disparity(f, rig) else {
                continue;
            };
            let xr = (x as f64 + f).round().clamp(0.0, (map.width - 1) as f64) as usize;
            cloud.points.push(CloudPoint {
                x: x as f64,
                y: y as f64,
                z,
                intensity: right.get(xr, y),
            });
        }
    }
    Ok(cloud)
}
