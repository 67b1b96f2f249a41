//! Clip decoding, colour reduction, resizing and pre-smoothing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::boundary::spatial_gradient;
use crate::error::{Error, Result};

/// Smallest frame side accepted anywhere in the pipeline (needed by the
/// 3-tap derivative mask).
pub const MIN_FRAME_SIDE: usize = 3;

const Y8_MAGIC: &[u8; 4] = b"Y8V1";

/// A single intensity plane, row-major, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Structure(format!(
                "frame data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(Error::Structure(format!(
                "frame {width}x{height} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// `f` is called in row-major order.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Three same-sized colour planes in R, G, B order.
#[derive(Debug, Clone)]
pub struct RgbFrame {
    pub channels: [Frame; 3],
}

impl RgbFrame {
    pub fn new(r: Frame, g: Frame, b: Frame) -> Result<Self> {
        if r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height
        {
            return Err(Error::Structure(
                "colour channels have different dimensions".into(),
            ));
        }
        Ok(Self {
            channels: [r, g, b],
        })
    }
}

/// An ordered sequence of equally-sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    frames: Vec<Frame>,
    source_id: String,
}

impl Clip {
    pub fn new(frames: Vec<Frame>, source_id: impl Into<String>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Structure(format!(
                "clip needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let (w, h) = (frames[0].width, frames[0].height);
        if let Some(i) = frames.iter().position(|f| f.width != w || f.height != h) {
            return Err(Error::Structure(format!(
                "frame {i} is {}x{}, clip is {w}x{h}",
                frames[i].width, frames[i].height
            )));
        }
        Ok(Self {
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn map_frames(&self, f: impl Fn(&Frame) -> Result<Frame>) -> Result<Clip> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        Clip::new(frames, self.source_id.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipFormat {
    /// Directory of binary P5 PGM files, lexicographic filename order.
    PgmDir,
    /// Single "Y8V1" packed file.
    Y8Packed,
}

impl ClipFormat {
    /// Directories are PGM sequences, everything else is treated as y8-packed.
    pub fn infer(path: &Path) -> Self {
        if path.is_dir() {
            ClipFormat::PgmDir
        } else {
            ClipFormat::Y8Packed
        }
    }
}

pub fn load_clip(path: &Path, format: ClipFormat) -> Result<Clip> {
    match format {
        ClipFormat::PgmDir => load_pgm_dir(path),
        ClipFormat::Y8Packed => {
            let bytes = fs::read(path).map_err(|e| Error::decode(path, e.to_string()))?;
            decode_y8(&bytes, path)
        }
    }
}

fn load_pgm_dir(dir: &Path) -> Result<Clip> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::decode(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::decode(dir, "no .pgm files"));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let bytes = fs::read(p).map_err(|e| Error::decode(p, e.to_string()))?;
        frames.push(decode_pgm(&bytes).map_err(|reason| Error::decode(p, reason))?);
    }
    let (w, h) = (frames[0].width, frames[0].height);
    if let Some(i) = frames.iter().position(|f| f.width != w || f.height != h) {
        return Err(Error::Structure(format!(
            "{} is {}x{}, first frame is {w}x{h}",
            paths[i].display(),
            frames[i].width,
            frames[i].height
        )));
    }
    Clip::new(frames, dir.display().to_string())
}

/// Decodes a binary (P5) PGM with maxval <= 255.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(format!("unsupported magic {magic:?}, expected P5"));
    }
    let mut num = |what: &str| -> std::result::Result<usize, String> {
        token()?
            .parse::<usize>()
            .map_err(|_| format!("bad {what} in header"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} is not 8-bit"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let need = width * height;
    if bytes.len() < start + need {
        return Err(format!(
            "raster has {} bytes, expected {need}",
            bytes.len().saturating_sub(start)
        ));
    }
    let scale = 255.0 / maxval as f64;
    let data = bytes[start..start + need]
        .iter()
        .map(|&b| (b as f64 * scale).min(255.0))
        .collect();
    Frame::new(width, height, data).map_err(|e| e.to_string())
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.data.iter().map(|&v| to_byte(v)));
    out
}

/// Writes one `frame_NNNNN.pgm` per frame into `dir`.
pub fn save_pgm_dir(clip: &Clip, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in clip.frames.iter().enumerate() {
        fs::write(dir.join(format!("frame_{i:05}.pgm")), encode_pgm(f))?;
    }
    Ok(())
}

pub fn decode_y8(bytes: &[u8], path: &Path) -> Result<Clip> {
    if bytes.len() < 16 || &bytes[..4] != Y8_MAGIC {
        return Err(Error::decode(path, "missing Y8V1 header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (w, h, t) = (word(0) as usize, word(1) as usize, word(2) as usize);
    let frame_len = w * h;
    let payload = &bytes[16..];
    if payload.len() < frame_len * t {
        let bad = payload.len().checked_div(frame_len).unwrap_or(0);
        return Err(Error::decode(
            path,
            format!(
                "payload has {} bytes, expected {} ({w}x{h}x{t}); frame {bad} is truncated",
                payload.len(),
                frame_len * t
            ),
        ));
    }
    let frames = payload[..frame_len * t]
        .chunks_exact(frame_len.max(1))
        .take(t)
        .map(|c| Frame::new(w, h, c.iter().map(|&b| b as f64).collect()))
        .collect::<Result<Vec<_>>>()?;
    Clip::new(frames, path.display().to_string())
}

pub fn encode_y8(clip: &Clip) -> Vec<u8> {
    let (w, h, t) = (clip.width(), clip.height(), clip.frame_count());
    let mut out = Vec::with_capacity(16 + w * h * t);
    out.extend_from_slice(Y8_MAGIC);
    for v in [w, h, t] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for f in &clip.frames {
        out.extend(f.data.iter().map(|&v| to_byte(v)));
    }
    out
}

pub fn save_y8(clip: &Clip, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_y8(clip))?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Per pixel, keeps the channel with the largest spatial gradient magnitude.
/// Ties go to the earliest channel (R, then G, then B).
pub fn select_max_gradient_channel(rgb: &RgbFrame) -> Frame {
    let grads = rgb.channels.each_ref().map(spatial_gradient);
    let first = &rgb.channels[0];
    let mut data = Vec::with_capacity(first.data.len());
    for i in 0..first.data.len() {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (c, g) in grads.iter().enumerate() {
            let mag = g.gx()[i].hypot(g.gy()[i]);
            if mag > best_mag {
                best = c;
                best_mag = mag;
            }
        }
        data.push(rgb.channels[best].data[i]);
    }
    Frame {
        width: first.width,
        height: first.height,
        data,
    }
}

/// Bilinear resize with half-pixel centre alignment.
pub fn resize(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
        return Err(Error::Argument(format!(
            "resize target {width}x{height} is below {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
        )));
    }
    if width == frame.width && height == frame.height {
        return Ok(frame.clone());
    }
    let sx = frame.width as f64 / width as f64;
    let sy = frame.height as f64 / height as f64;
    let taps = |dst: usize, scale: f64, len: usize| {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    let cols: Vec<_> = (0..width).map(|x| taps(x, sx, frame.width)).collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, sy, frame.height);
        for &(x0, x1, fx) in &cols {
            let top = frame.get(x0, y0) * (1.0 - fx) + frame.get(x1, y0) * fx;
            let bottom = frame.get(x0, y1) * (1.0 - fx) + frame.get(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Frame::new(width, height, data)
}

/// Output size of [`downscale`] for a `width x height` input.
pub fn downscaled_dims(width: usize, height: usize, factor: f64) -> (usize, usize) {
    (
        (width as f64 / factor).round() as usize,
        (height as f64 / factor).round() as usize,
    )
}

pub fn downscale(clip: &Clip, factor: f64) -> Result<Clip> {
    if !(factor >= 1.0) || !factor.is_finite() {
        return Err(Error::Argument(format!(
            "downscale factor must be >= 1, got {factor}"
        )));
    }
    if factor == 1.0 {
        return Ok(clip.clone());
    }
    let (w, h) = downscaled_dims(clip.width(), clip.height(), factor);
    clip.map_frames(|f| resize(f, w, h))
}

/// Normalised 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_smooth(frame: &Frame, sigma: f64) -> Result<Frame> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (frame.width as isize, frame.height as isize);
    let mut tmp = vec![0.0; frame.data.len()];
    for y in 0..h {
        let row = &frame.data[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in kernel.iter().enumerate() {
                let sx = (x + k as isize - r).clamp(0, w - 1);
                acc += wk * row[sx as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; frame.data.len()];
    for y in 0..h {
        for (k, wk) in kernel.iter().enumerate() {
            let sy = (y + k as isize - r).clamp(0, h - 1);
            let src = &tmp[(sy * w) as usize..((sy + 1) * w) as usize];
            let dst = &mut out[(y * w) as usize..((y + 1) * w) as usize];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    Ok(Frame {
        width: frame.width,
        height: frame.height,
        data: out,
    })
}
