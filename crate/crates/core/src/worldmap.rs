//! Static 2D environments: bounded arenas with wall segments and circular
//! obstacles, analytic range-sensor raycasting, collision queries, and
//! randomized spawn sampling.
//!
//! Maps are immutable after load and safe to share across threads; raycast
//! and collision queries are pure functions of their inputs.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RAY_EPS: f64 = 1e-12;

/// A wall as a line segment, endpoints in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// A circular obstacle, center and radius in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// On-disk map document. Boundary walls may be omitted; they are
/// synthesized from `width`/`height` on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapDocument {
    pub format: u32,
    pub name: String,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub obstacles: Vec<Circle>,
    #[serde(default)]
    pub walls: Vec<Segment>,
}

/// A validated arena. The four boundary walls are always present.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Segment>,
    pub obstacles: Vec<Circle>,
}

/// One range scan: beam angles are relative to the vehicle heading, in
/// fixed ascending order; ranges are clipped to the sensor's max range.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub beam_angles: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl RangeScan {
    pub fn min_range(&self) -> f64 {
        self.ranges.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Uniform full-circle beam pattern: `count` angles ascending from -pi.
pub fn uniform_beams(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| -PI + (k as f64) * (2.0 * PI / count as f64))
        .collect()
}

impl WorldMap {
    /// Validates a parsed document and synthesizes missing boundary walls.
    pub fn from_document(doc: MapDocument) -> Result<Self> {
        if doc.format != 1 {
            return Err(Error::Parse(format!(
                "unsupported map format {} (expected 1)",
                doc.format
            )));
        }
        if !(doc.width > 0.0) {
            return Err(Error::Parse("width must be positive".into()));
        }
        if !(doc.height > 0.0) {
            return Err(Error::Parse("height must be positive".into()));
        }
        for (i, c) in doc.obstacles.iter().enumerate() {
            if !(c.r > 0.0) {
                return Err(Error::Parse(format!(
                    "obstacles[{i}].r must be positive (got {})",
                    c.r
                )));
            }
            if !(0.0..=doc.width).contains(&c.cx) {
                return Err(Error::Parse(format!(
                    "obstacles[{i}].cx = {} outside [0, {}]",
                    c.cx, doc.width
                )));
            }
            if !(0.0..=doc.height).contains(&c.cy) {
                return Err(Error::Parse(format!(
                    "obstacles[{i}].cy = {} outside [0, {}]",
                    c.cy, doc.height
                )));
            }
        }
        for (i, w) in doc.walls.iter().enumerate() {
            for (field, v) in [("x1", w.x1), ("y1", w.y1), ("x2", w.x2), ("y2", w.y2)] {
                if !v.is_finite() {
                    return Err(Error::Parse(format!("walls[{i}].{field} is not finite")));
                }
            }
        }

        let mut walls = Vec::new();
        let (w, h) = (doc.width, doc.height);
        let boundary = [
            Segment { x1: 0.0, y1: 0.0, x2: w, y2: 0.0 },
            Segment { x1: w, y1: 0.0, x2: w, y2: h },
            Segment { x1: w, y1: h, x2: 0.0, y2: h },
            Segment { x1: 0.0, y1: h, x2: 0.0, y2: 0.0 },
        ];
        for b in boundary {
            if !doc.walls.iter().any(|s| same_segment(s, &b)) {
                walls.push(b);
            }
        }
        walls.extend(doc.walls);

        Ok(WorldMap {
            name: doc.name,
            width: doc.width,
            height: doc.height,
            walls,
            obstacles: doc.obstacles,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MapDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("map file: {e}")))?;
        Self::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Parse(format!("cannot read map {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            format: 1,
            name: self.name.clone(),
            width: self.width,
            height: self.height,
            obstacles: self.obstacles.clone(),
            walls: self.walls.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Casts one ray per beam angle from `(x, y)` at world angle
    /// `psi + beam`, returning the distance to the nearest wall or obstacle
    /// intersection, clipped to `max_range`. Beams that hit nothing report
    /// `max_range`, which keeps the scan fixed-size.
    pub fn raycast(&self, pose: (f64, f64, f64), beam_angles: &[f64], max_range: f64) -> RangeScan {
        let (x, y, psi) = pose;
        let ranges = beam_angles
            .iter()
            .map(|beam| {
                let theta = psi + beam;
                let (dx, dy) = (theta.cos(), theta.sin());
                let mut best = max_range;
                for s in &self.walls {
                    if let Some(t) = ray_segment(x, y, dx, dy, s) {
                        if t < best {
                            best = t;
                        }
                    }
                }
                for c in &self.obstacles {
                    if let Some(t) = ray_circle(x, y, dx, dy, c) {
                        if t < best {
                            best = t;
                        }
                    }
                }
                best
            })
            .collect();
        RangeScan {
            beam_angles: beam_angles.to_vec(),
            ranges,
        }
    }

    /// True iff a disk footprint of the given radius at `(x, y)` intersects
    /// any wall or obstacle, or extends outside the arena rectangle.
    pub fn collision_check(&self, pose: (f64, f64, f64), footprint_radius: f64) -> bool {
        let (x, y, _) = pose;
        let r = footprint_radius;
        if x - r < 0.0 || x + r > self.width || y - r < 0.0 || y + r > self.height {
            return true;
        }
        for s in &self.walls {
            if point_segment_distance(x, y, s) <= r {
                return true;
            }
        }
        for c in &self.obstacles {
            let d = ((x - c.cx).powi(2) + (y - c.cy).powi(2)).sqrt();
            if d <= r + c.r {
                return true;
            }
        }
        false
    }

    /// Rejection-samples a collision-free pose: position uniform over the
    /// arena, heading uniform in [-pi, pi). Fails after 10,000 rejections.
    pub fn sample_spawn(&self, rng: &mut ChaCha8Rng, clearance: f64) -> Result<(f64, f64, f64)> {
        const MAX_ATTEMPTS: usize = 10_000;
        for _ in 0..MAX_ATTEMPTS {
            let x = rng.random_range(0.0..self.width);
            let y = rng.random_range(0.0..self.height);
            if !self.collision_check((x, y, 0.0), clearance) {
                let psi = rng.random_range(-PI..PI);
                return Ok((x, y, psi));
            }
        }
        Err(Error::Spawn(format!(
            "map too crowded for clearance {clearance}"
        )))
    }
}

fn same_segment(a: &Segment, b: &Segment) -> bool {
    let fwd = a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
    let rev = a.x1 == b.x2 && a.y1 == b.y2 && a.x2 == b.x1 && a.y2 == b.y1;
    fwd || rev
}

/// Ray-segment intersection parameter t along the (unit) ray direction,
/// or None. Parallel rays are treated as misses.
fn ray_segment(ox: f64, oy: f64, dx: f64, dy: f64, s: &Segment) -> Option<f64> {
    let ex = s.x2 - s.x1;
    let ey = s.y2 - s.y1;
    let det = ex * dy - ey * dx;
    if det.abs() < 1e-15 {
        return None;
    }
    let qx = s.x1 - ox;
    let qy = s.y1 - oy;
    let t = (ex * qy - ey * qx) / det;
    let u = (dx * qy - dy * qx) / det;
    if t > RAY_EPS && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Ray-circle intersection: nearest positive root of the quadratic.
fn ray_circle(ox: f64, oy: f64, dx: f64, dy: f64, c: &Circle) -> Option<f64> {
    let mx = c.cx - ox;
    let my = c.cy - oy;
    let b = dx * mx + dy * my;
    let disc = b * b - (mx * mx + my * my - c.r * c.r);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let near = b - sq;
    if near > RAY_EPS {
        return Some(near);
    }
    let far = b + sq;
    if far > RAY_EPS {
        return Some(far);
    }
    None
}

fn point_segment_distance(px: f64, py: f64, s: &Segment) -> f64 {
    let ex = s.x2 - s.x1;
    let ey = s.y2 - s.y1;
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((px - s.x1) * ex + (py - s.y1) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cx = s.x1 + t * ex;
    let cy = s.y1 + t * ey;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}
