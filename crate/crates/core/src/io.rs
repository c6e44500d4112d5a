//! File formats: PGM images, disparity CSV, ASCII PLY and key=value text.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::scene::{CameraRig, CartoonScene, SceneObject, Shape};

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    write_file(path, text)
}

struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmTokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start)
            .then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())
            .flatten()
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let line = 1 + self.bytes[..self.pos]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        let tok = self.token().ok_or_else(|| Error::Parse {
            line,
            message: format!("missing {what}"),
        })?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad {what} {tok:?}"),
        })
    }
}

/// Parses an 8-bit P2 or P5 image; samples are divided by 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut t = PgmTokens { bytes, pos: 0 };
    let magic = t.token().unwrap_or("");
    if magic != "P2" && magic != "P5" {
        return Err(Error::Parse {
            line: 1,
            message: format!("not a P2/P5 PGM (magic {magic:?})"),
        });
    }
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse {
            line: 1,
            message: format!("only 8-bit PGM is supported (maxval {maxval})"),
        });
    }
    let n = width * height;
    let mut data = Vec::with_capacity(n);
    if magic == "P2" {
        for _ in 0..n {
            let v = t.number("sample")?;
            if v > maxval {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("sample {v} above maxval {maxval}"),
                });
            }
            data.push(v as f64 / 255.0);
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        let start = t.pos + 1;
        let raster = bytes.get(start..start + n).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!(
                "raster truncated: expected {n} bytes, found {}",
                bytes.len().saturating_sub(start)
            ),
        })?;
        data.extend(raster.iter().map(|&b| b as f64 / 255.0));
    }
    Image::from_data(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    parse_pgm(&read_file(path)?).map_err(|e| io_error(path, e))
}

/// Plain P2 encoding, intensities rounded to the nearest of 256 levels.
pub fn format_pgm(image: &Image, comment: Option<&str>) -> String {
    let mut out = String::from("P2\n");
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{} {}\n255", image.width(), image.height());
    for y in 0..image.height() {
        let row: Vec<String> = image
            .row(y)
            .iter()
            .map(|v| ((v * 255.0).round() as u8).to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    write_file(path, format_pgm(image, None))
}

/// Disparity scaled so the largest value maps to 255; no-data and
/// negative values are black. The factor is stored in a comment line.
pub fn format_disparity_pgm(map: &DisparityMap) -> String {
    let max = map.rows().flatten().flatten().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 1.0 };
    let mut img = Image::new(map.width, map.height);
    for y in 0..map.height {
        for x in 0..map.width {
            if let Some(f) = map.get(x, y) {
                img.set(x, y, (f * scale).clamp(0.0, 255.0) / 255.0);
            }
        }
    }
    format_pgm(&img, Some(&format!("scale {scale}")))
}

/// Nine significant digits, shortest form.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn format_disparity_csv(map: &DisparityMap) -> String {
    let mut out = String::new();
    for row in map.rows() {
        let cells: Vec<String> = row
            .iter()
            .map(|v| v.map_or_else(|| "NaN".to_string(), format_value))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_disparity_csv(text: &str) -> Result<DisparityMap> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let width = rows.first().map_or(0, |r| r.split(',').count());
    let mut map = DisparityMap::new(width, rows.len());
    for (y, line) in rows.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Parse {
                line: y + 1,
                message: format!("row {y} has {} columns, expected {width}", cells.len()),
            });
        }
        for (x, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: y + 1,
                message: format!("row {y}, column {x}: not a number {cell:?}"),
            })?;
            if v.is_nan() {
                continue;
            }
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: y + 1,
                    message: format!("row {y}, column {x}: {cell:?}"),
                });
            }
            map.set(x, y, v);
        }
    }
    Ok(map)
}

pub fn format_ply(cloud: &crate::scene::PointCloud) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            p.x as f32, p.y as f32, p.z as f32, p.intensity as f32
        );
    }
    out
}

/// One `key = value` pair with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Flat key=value text; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: n + 1,
                message: "empty key".into(),
            });
        }
        entries.push(Entry {
            line: n + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

impl Entry {
    pub fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| Error::Parse {
            line: self.line,
            message: format!("invalid value {:?} for {}", self.value, self.key),
        })
    }

    pub fn parse_bool(&self) -> Result<bool> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Ok(true),
            "false" | "off" | "no" | "0" => Ok(false),
            _ => Err(Error::Parse {
                line: self.line,
                message: format!("{} expects a boolean, got {:?}", self.key, self.value),
            }),
        }
    }

    fn fields<T: std::str::FromStr>(&self, words: &[&str]) -> Result<Vec<T>> {
        words
            .iter()
            .map(|w| {
                w.parse().map_err(|_| Error::Parse {
                    line: self.line,
                    message: format!("bad number {w:?} in {}", self.key),
                })
            })
            .collect()
    }
}

/// Scene text:
///
/// ```text
/// width = 120
/// height = 100
/// baseline = 10
/// focal = 1000
/// beta = 2
/// # kind, bounds, depth, intensity (left-view pixels)
/// object = rect 10 29 0 99 555.56 0.8
/// object = ellipse 60 50 8 20 1000 0.4
/// ```
pub fn parse_scene(text: &str) -> Result<(CartoonScene, CameraRig)> {
    let mut width = None;
    let mut height = None;
    let mut rig = CameraRig::default();
    let mut objects = Vec::new();
    let mut lines = Vec::new();
    for e in parse_key_values(text)? {
        match e.key.as_str() {
            "width" => width = Some(e.parse::<usize>()?),
            "height" => height = Some(e.parse::<usize>()?),
            "baseline" => rig.baseline = e.parse()?,
            "focal" => rig.focal = e.parse()?,
            "beta" => rig.beta = e.parse()?,
            "object" => {
                let words: Vec<&str> = e.value.split_whitespace().collect();
                let bad = || {
                    Error::Parse {
                    line: e.line,
                    message: format!("object needs rect x0 x1 y0 y1 depth intensity or ellipse cx cy rx ry depth intensity, got {:?}", e.value),
                }
                };
                if words.len() != 7 {
                    return Err(bad());
                }
                let tail: Vec<f64> = e.fields(&words[5..])?;
                let shape = match words[0] {
                    "rect" => {
                        let b: Vec<usize> = e.fields(&words[1..5])?;
                        if b[0] > b[1] || b[2] > b[3] {
                            return Err(Error::Parse {
                                line: e.line,
                                message: "rect bounds must be increasing".into(),
                            });
                        }
                        Shape::Rect {
                            x0: b[0],
                            x1: b[1],
                            y0: b[2],
                            y1: b[3],
                        }
                    }
                    "ellipse" => {
                        let b: Vec<f64> = e.fields(&words[1..5])?;
                        if !(b[2] > 0.0 && b[3] > 0.0) {
                            return Err(Error::Parse {
                                line: e.line,
                                message: "ellipse radii must be positive".into(),
                            });
                        }
                        Shape::Ellipse {
                            cx: b[0],
                            cy: b[1],
                            rx: b[2],
                            ry: b[3],
                        }
                    }
                    _ => return Err(bad()),
                };
                objects.push(SceneObject {
                    shape,
                    depth: tail[0],
                    intensity: tail[1],
                });
                lines.push(e.line);
            }
            other => {
                return Err(Error::Parse {
                    line: e.line,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    let width = width.ok_or(Error::Parse {
        line: 0,
        message: "missing width".into(),
    })?;
    let height = height.ok_or(Error::Parse {
        line: 0,
        message: "missing height".into(),
    })?;
    rig.validate()?;
    let scene = CartoonScene {
        width,
        height,
        objects,
    };
    if let Err(e) = scene.validate() {
        // Point at the offending object line.
        let k = scene
            .objects
            .iter()
            .position(|o| !(o.depth > 0.0 && o.intensity > 0.0 && o.intensity <= 1.0));
        let line = k.map_or(0, |k| lines[k]);
        return Err(Error::Parse {
            line,
            message: e.to_string(),
        });
    }
    Ok((scene, rig))
}
