//! Deterministic synthetic clips: integer-velocity objects with hard edges
//! over a background that may pan by an integer offset per frame.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Manifest, ManifestEntry};
use crate::video::{save_y8, Clip, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Background {
    Uniform { level: f64 },
    /// Squares of side `period` alternating between `low` and `high`.
    Checkerboard { period: usize, low: f64, high: f64 },
    /// Integer noise in `128 +- amplitude`, defined on the whole plane.
    Noise { seed: u64, amplitude: f64 },
}

impl Background {
    /// Value at integer plane coordinates.
    pub fn value(&self, x: i64, y: i64) -> f64 {
        match *self {
            Background::Uniform { level } => level,
            Background::Checkerboard { period, low, high } => {
                let p = period.max(1) as i64;
                if (x.div_euclid(p) + y.div_euclid(p)).rem_euclid(2) == 0 {
                    low
                } else {
                    high
                }
            }
            Background::Noise { seed, amplitude } => {
                let h = mix(seed ^ mix(x as u64 ^ mix(y as u64)));
                let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                (128.0 + amplitude * (2.0 * u - 1.0)).round()
            }
        }
    }
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Full-height vertical stripe `size.0` wide.
    Bar,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub size: (usize, usize),
    pub start: (i64, i64),
    pub velocity: (i64, i64),
    pub level: f64,
}

impl SceneObject {
    pub fn origin_at(&self, t: usize) -> (i64, i64) {
        (
            self.start.0 + self.velocity.0 * t as i64,
            self.start.1 + self.velocity.1 * t as i64,
        )
    }

    fn covers(&self, t: usize, x: i64, y: i64) -> bool {
        let (ox, oy) = self.origin_at(t);
        let in_x = x >= ox && x < ox + self.size.0 as i64;
        match self.shape {
            Shape::Bar => in_x,
            Shape::Rect => in_x && y >= oy && y < oy + self.size.1 as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: Background,
    pub objects: Vec<SceneObject>,
    /// Background displacement per frame.
    pub camera_pan: (i64, i64),
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, frames: usize, background: Background) -> Self {
        Self {
            width,
            height,
            frames,
            background,
            objects: Vec::new(),
            camera_pan: (0, 0),
        }
    }

    pub fn with_object(mut self, o: SceneObject) -> Self {
        self.objects.push(o);
        self
    }

    pub fn with_pan(mut self, dx: i64, dy: i64) -> Self {
        self.camera_pan = (dx, dy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 || self.width < 3 || self.height < 3 {
            return Err(Error::Scene(format!(
                "scene {}x{}x{} is too small",
                self.width, self.height, self.frames
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.size.0 == 0 || (o.shape == Shape::Rect && o.size.1 == 0) {
                return Err(Error::Scene(format!("object {i} has an empty size")));
            }
            for t in [0, self.frames - 1] {
                let (x, y) = o.origin_at(t);
                let x_ok = x >= 0 && x + o.size.0 as i64 <= self.width as i64;
                let y_ok = o.shape == Shape::Bar || (y >= 0 && y + o.size.1 as i64 <= self.height as i64);
                if !(x_ok && y_ok) {
                    return Err(Error::Scene(format!(
                        "object {i} leaves the frame at t = {t} (origin {x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Frame `t` shows the background shifted by `t * camera_pan` with every
/// object drawn on top at `start + t * velocity`; later objects win.
pub fn render_clip(spec: &SceneSpec) -> Result<Clip> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .map(|t| {
            let (sx, sy) = (spec.camera_pan.0 * t as i64, spec.camera_pan.1 * t as i64);
            Frame::from_fn(spec.width, spec.height, |x, y| {
                let (xi, yi) = (x as i64, y as i64);
                let obj = spec.objects.iter().rev().find(|o| o.covers(t, xi, yi));
                let v = match obj {
                    Some(o) => o.level,
                    None => spec.background.value(xi - sx, yi - sy),
                };
                v.clamp(0.0, 255.0)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Clip::new(frames, "synthetic")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionPattern {
    Right,
    Left,
    Up,
    Down,
}

impl MotionPattern {
    pub const ALL: [MotionPattern; 4] = [Self::Right, Self::Left, Self::Up, Self::Down];

    pub fn direction(self) -> (i64, i64) {
        match self {
            Self::Right => (1, 0),
            Self::Left => (-1, 0),
            Self::Up => (0, -1),
            Self::Down => (0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub classes: Vec<MotionPattern>,
    pub clips_per_class: usize,
    pub seed: u64,
}

impl DatasetSpec {
    /// Four direction classes of 64x48x30 clips.
    pub fn directions(clips_per_class: usize, seed: u64) -> Self {
        Self {
            width: 64,
            height: 48,
            frames: 30,
            classes: MotionPattern::ALL.to_vec(),
            clips_per_class,
            seed,
        }
    }
}

/// A rectangle moving in the class direction over static noise. Size,
/// speed, start, contrast and noise seed vary per clip.
fn clip_scene(ds: &DatasetSpec, pattern: MotionPattern, rng: &mut ChaCha8Rng) -> Result<SceneSpec> {
    let (dx, dy) = pattern.direction();
    let travel = ds.frames as i64 - 1;
    let max_side = (ds.width.min(ds.height) / 3).max(4);
    let w = rng.random_range(max_side / 2..=max_side);
    let h = rng.random_range(max_side / 2..=max_side);
    let room = |extent: usize, side: usize, d: i64| -> i64 { extent as i64 - side as i64 - d.abs() * travel };
    let fastest = (1..=2)
        .rev()
        .find(|&s| room(ds.width, w, dx * s) >= 0 && room(ds.height, h, dy * s) >= 0)
        .ok_or_else(|| {
            Error::Scene(format!(
                "{}x{}x{} is too small for a {w}x{h} object moving {pattern:?}",
                ds.width, ds.height, ds.frames
            ))
        })?;
    let speed = rng.random_range(1..=fastest);
    let (vx, vy) = (dx * speed, dy * speed);
    let pick = |rng: &mut ChaCha8Rng, extent: usize, side: usize, v: i64| -> i64 {
        let slack = extent as i64 - side as i64 - v.abs() * travel;
        let offset = rng.random_range(0..=slack);
        if v < 0 {
            offset - v * travel
        } else {
            offset
        }
    };
    let x = pick(rng, ds.width, w, vx);
    let y = pick(rng, ds.height, h, vy);
    let level = if rng.random_bool(0.5) {
        rng.random_range(200.0..=240.0f64).round()
    } else {
        rng.random_range(15.0..=55.0f64).round()
    };
    let background = Background::Noise {
        seed: rng.random(),
        amplitude: rng.random_range(10.0..=30.0f64).round(),
    };
    Ok(SceneSpec::new(ds.width, ds.height, ds.frames, background).with_object(SceneObject {
        shape: Shape::Rect,
        size: (w, h),
        start: (x, y),
        velocity: (vx, vy),
        level,
    }))
}

/// Writes `clips/cLL_NNN.y8` files and `manifest.jsonl` under `dir`.
/// Clip `j` of each class gets split `j % 3 + 1`.
pub fn gen_dataset(ds: &DatasetSpec, dir: &Path) -> Result<Manifest> {
    if ds.classes.len() < 2 {
        return Err(Error::Argument("a dataset needs at least two classes".into()));
    }
    if ds.clips_per_class == 0 {
        return Err(Error::Argument("clips_per_class must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ds.seed);
    let mut jobs = Vec::new();
    for (label, &pattern) in ds.classes.iter().enumerate() {
        for j in 0..ds.clips_per_class {
            let entry = ManifestEntry {
                path: format!("clips/c{label:02}_{j:03}.y8"),
                label,
                split: (j % 3) as u32 + 1,
                group: None,
            };
            jobs.push((entry, clip_scene(ds, pattern, &mut rng)?));
        }
    }
    std::fs::create_dir_all(dir.join("clips"))?;
    jobs.par_iter()
        .map(|(entry, scene)| save_y8(&render_clip(scene)?, &dir.join(&entry.path)))
        .collect::<Result<Vec<()>>>()?;
    let manifest = Manifest::new(dir, jobs.into_iter().map(|(e, _)| e).collect())?;
    manifest.save(&dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
