//! Multi-channel 3-D prefix sums ("integral videos") and cuboid queries.

use crate::error::{Error, Result};

/// Axis-aligned box in voxel coordinates: origin `(x, y, t)`, extents `(w, h, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cuboid {
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub w: usize,
    pub h: usize,
    pub l: usize,
}

impl Cuboid {
    pub fn new(x: usize, y: usize, t: usize, w: usize, h: usize, l: usize) -> Result<Self> {
        if w == 0 || h == 0 || l == 0 {
            return Err(Error::Argument(format!(
                "cuboid extents must be >= 1, got {w}x{h}x{l}"
            )));
        }
        Ok(Self { x, y, t, w, h, l })
    }

    pub fn fits(&self, width: usize, height: usize, depth: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.l >= 1
            && self.x + self.w <= width
            && self.y + self.h <= height
            && self.t + self.l <= depth
    }

    pub fn volume(&self) -> usize {
        self.w * self.h * self.l
    }
}

/// Prefix sums `S(x, y, t)` over all source voxels with `x' < x, y' < y,
/// t' < t`, stored for every channel with a zero plane at index 0 on each
/// axis. Layout is `(t, y, x, channel)` with the channel innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralVideo {
    width: usize,
    height: usize,
    depth: usize,
    channels: usize,
    sums: Vec<f64>,
}

impl IntegralVideo {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of source slices.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Bytes held by the prefix volume.
    pub fn memory_bytes(&self) -> usize {
        self.sums.len() * std::mem::size_of::<f64>()
    }

    #[inline]
    fn index(&self, x: usize, y: usize, t: usize) -> usize {
        ((t * (self.height + 1) + y) * (self.width + 1) + x) * self.channels
    }

    /// Raw prefix value `S(x, y, t)` for one channel.
    pub fn prefix(&self, x: usize, y: usize, t: usize, channel: usize) -> f64 {
        self.sums[self.index(x, y, t) + channel]
    }

    pub fn cuboid_sum(&self, c: &Cuboid, channel: usize) -> Result<f64> {
        self.check(c)?;
        if channel >= self.channels {
            return Err(Error::Argument(format!(
                "channel {channel} out of range ({} channels)",
                self.channels
            )));
        }
        let mut out = vec![0.0; self.channels];
        self.box_sums(c.x, c.y, c.t, c.x + c.w, c.y + c.h, c.t + c.l, &mut out);
        Ok(out[channel])
    }

    /// All channel sums of `c` into `out`.
    pub fn cuboid_sums(&self, c: &Cuboid, out: &mut [f64]) -> Result<()> {
        self.check(c)?;
        if out.len() != self.channels {
            return Err(Error::Argument(format!(
                "output has {} slots for {} channels",
                out.len(),
                self.channels
            )));
        }
        self.box_sums(c.x, c.y, c.t, c.x + c.w, c.y + c.h, c.t + c.l, out);
        Ok(())
    }

    fn check(&self, c: &Cuboid) -> Result<()> {
        if !c.fits(self.width, self.height, self.depth) {
            return Err(Error::Argument(format!(
                "cuboid {c:?} outside {}x{}x{} volume",
                self.width, self.height, self.depth
            )));
        }
        Ok(())
    }

    /// Inclusion-exclusion over the 8 corners of the half-open box
    /// `[x0, x1) x [y0, y1) x [t0, t1)`. Empty boxes give 0. Callers keep
    /// the box inside the volume.
    #[inline]
    pub(crate) fn box_sums(
        &self,
        x0: usize,
        y0: usize,
        t0: usize,
        x1: usize,
        y1: usize,
        t1: usize,
        out: &mut [f64],
    ) {
        debug_assert!(x1 <= self.width && y1 <= self.height && t1 <= self.depth);
        if x0 >= x1 || y0 >= y1 || t0 >= t1 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let c = self.channels;
        let s = &self.sums;
        let a = self.index(x1, y1, t1);
        let b = self.index(x0, y1, t1);
        let d = self.index(x1, y0, t1);
        let e = self.index(x0, y0, t1);
        let f = self.index(x1, y1, t0);
        let g = self.index(x0, y1, t0);
        let h = self.index(x1, y0, t0);
        let i = self.index(x0, y0, t0);
        for k in 0..c {
            out[k] = (s[a + k] - s[b + k] - s[d + k] + s[e + k])
                - (s[f + k] - s[g + k] - s[h + k] + s[i + k]);
        }
    }
}

/// Builds an [`IntegralVideo`] one source slice at a time; each new prefix
/// slice is derived from the previous one.
#[derive(Debug)]
pub struct IntegralBuilder {
    video: IntegralVideo,
    row: Vec<f64>,
}

impl IntegralBuilder {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::with_capacity(width, height, channels, 0)
    }

    pub fn with_capacity(width: usize, height: usize, channels: usize, depth_hint: usize) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Structure(format!(
                "integral video needs nonzero dims, got {width}x{height} with {channels} channels"
            )));
        }
        let slice = (width + 1) * (height + 1) * channels;
        let mut sums = Vec::with_capacity(slice * (depth_hint + 1));
        sums.resize(slice, 0.0);
        Ok(Self {
            video: IntegralVideo {
                width,
                height,
                depth: 0,
                channels,
                sums,
            },
            row: vec![0.0; channels],
        })
    }

    /// Appends one slice; `planes[c]` is the row-major plane of channel `c`.
    pub fn push<P: AsRef<[f64]>>(&mut self, planes: &[P]) -> Result<()> {
        let v = &mut self.video;
        let (w, h, ch) = (v.width, v.height, v.channels);
        if planes.len() != ch {
            return Err(Error::Structure(format!(
                "slice has {} channels, expected {ch}",
                planes.len()
            )));
        }
        if let Some(p) = planes.iter().find(|p| p.as_ref().len() != w * h) {
            return Err(Error::Structure(format!(
                "plane has {} samples, expected {w}x{h}",
                p.as_ref().len()
            )));
        }
        let slice = (w + 1) * (h + 1) * ch;
        let prev = v.depth * slice;
        v.sums.resize(prev + 2 * slice, 0.0);
        let (old, new) = v.sums.split_at_mut(prev + slice);
        let old = &old[prev..];
        let stride = (w + 1) * ch;
        for y in 0..h {
            self.row.iter_mut().for_each(|r| *r = 0.0);
            for x in 0..w {
                let below = y * stride + (x + 1) * ch;
                let here = (y + 1) * stride + (x + 1) * ch;
                for c in 0..ch {
                    self.row[c] += planes[c].as_ref()[y * w + x];
                    // current-slice 2-D prefix of the row above, plus this row
                    new[here + c] = old[here + c] + (new[below + c] - old[below + c]) + self.row[c];
                }
            }
        }
        v.depth += 1;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.video.depth
    }

    pub fn finish(self) -> IntegralVideo {
        self.video
    }
}

/// Builds from `frames[t][channel]` planes of `width x height`.
pub fn build_integral<P: AsRef<[f64]>>(
    width: usize,
    height: usize,
    frames: &[Vec<P>],
) -> Result<IntegralVideo> {
    let channels = frames.first().map_or(1, |f| f.len());
    let mut b = IntegralBuilder::with_capacity(width, height, channels, frames.len())?;
    for f in frames {
        b.push(f)?;
    }
    Ok(b.finish())
}
