//! Spatial gradients, temporal gradient boundaries and orientation voting.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::video::Frame;

/// Raw `[-1, 0, 1]` responses. The outermost ring is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    /// Multiplies both planes by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            gx: self.gx.iter().map(|v| v * a).collect(),
            gy: self.gy.iter().map(|v| v * a).collect(),
        }
    }
}

/// Temporal derivative of the spatial gradient, with polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    width: usize,
    height: usize,
    itx: Vec<f64>,
    ity: Vec<f64>,
    r: Vec<f64>,
    theta: Vec<f64>,
}

impl BoundaryField {
    pub fn from_components(width: usize, height: usize, itx: Vec<f64>, ity: Vec<f64>) -> Result<Self> {
        if itx.len() != width * height || ity.len() != width * height {
            return Err(Error::Structure("boundary planes do not match dims".into()));
        }
        let (r, theta) = itx
            .iter()
            .zip(&ity)
            .map(|(&x, &y)| polar(x, y))
            .unzip();
        Ok(Self {
            width,
            height,
            itx,
            ity,
            r,
            theta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn itx(&self) -> &[f64] {
        &self.itx
    }

    pub fn ity(&self) -> &[f64] {
        &self.ity
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// `B` orientation planes; per pixel the bins sum to the boundary magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteFrame {
    width: usize,
    height: usize,
    bins: Vec<Vec<f64>>,
}

impl VoteFrame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[Vec<f64>] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<Vec<f64>> {
        self.bins
    }
}

/// How a pixel's magnitude is split across orientation bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// Linear interpolation between the two nearest bin centres.
    #[default]
    Soft,
    /// Whole magnitude to the bin containing the angle.
    Hard,
}

/// Magnitude and angle in `[0, 2pi)`; the angle is 0 when the magnitude is.
#[inline]
pub fn polar(x: f64, y: f64) -> (f64, f64) {
    let r = x.hypot(y);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let mut t = y.atan2(x);
    if t < 0.0 {
        t += TAU;
    }
    if t >= TAU {
        t = 0.0;
    }
    (r, t)
}

pub fn spatial_gradient(frame: &Frame) -> GradientField {
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 1..h - 1 {
        let row = y * w;
        for x in 1..w - 1 {
            let i = row + x;
            gx[i] = src[i + 1] - src[i - 1];
            gy[i] = src[i + w] - src[i - w];
        }
    }
    GradientField {
        width: w,
        height: h,
        gx,
        gy,
    }
}

/// `[-1, 1]` temporal filter over two consecutive gradient fields.
pub fn temporal_boundary(grad_t: &GradientField, grad_t1: &GradientField) -> Result<BoundaryField> {
    if grad_t.width != grad_t1.width || grad_t.height != grad_t1.height {
        return Err(Error::Structure(format!(
            "gradient fields differ in size: {}x{} vs {}x{}",
            grad_t.width, grad_t.height, grad_t1.width, grad_t1.height
        )));
    }
    let itx = grad_t1.gx.iter().zip(&grad_t.gx).map(|(b, a)| b - a).collect();
    let ity = grad_t1.gy.iter().zip(&grad_t.gy).map(|(b, a)| b - a).collect();
    BoundaryField::from_components(grad_t.width, grad_t.height, itx, ity)
}

/// Adds the vote for one `(r, theta)` sample to `out` (length = bin count).
#[inline]
pub fn vote_into(out: &mut [f64], r: f64, theta: f64, binning: Binning) {
    if r == 0.0 {
        return;
    }
    let b = out.len();
    let width = TAU / b as f64;
    match binning {
        Binning::Soft => {
            let pos = theta / width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let k0 = (lo as isize).rem_euclid(b as isize) as usize;
            let k1 = (k0 + 1) % b;
            out[k0] += r * (1.0 - frac);
            out[k1] += r * frac;
        }
        Binning::Hard => {
            let k = ((theta / width).floor() as usize).min(b - 1);
            out[k] += r;
        }
    }
}

pub fn vote_orientations(bf: &BoundaryField, num_bins: usize, binning: Binning) -> Result<VoteFrame> {
    if num_bins < 2 {
        return Err(Error::Argument(format!("need at least 2 bins, got {num_bins}")));
    }
    let n = bf.width * bf.height;
    let mut bins = vec![vec![0.0; n]; num_bins];
    let mut local = vec![0.0; num_bins];
    for i in 0..n {
        if bf.r[i] == 0.0 {
            continue;
        }
        local.iter_mut().for_each(|v| *v = 0.0);
        vote_into(&mut local, bf.r[i], bf.theta[i], binning);
        for (plane, v) in bins.iter_mut().zip(&local) {
            plane[i] = *v;
        }
    }
    Ok(VoteFrame {
        width: bf.width,
        height: bf.height,
        bins,
    })
}

/// Splits a signed boundary column profile into same-sign lobes, pairs
/// each lobe with an adjacent lobe of opposite sign (old edge position and
/// new edge position) and returns the displacement of each pair.
///
/// A `[-1, 0, 1]` edge response covers two columns, so an edge displaced by
/// `v` columns spans `v + 2` columns from the first column of the old
/// response to the last column of the new one. Overlapping responses may
/// cancel in between, which does not move the outer columns.
pub fn double_edge_separations(profile: &[f64]) -> Vec<usize> {
    // (sign, first column, last column)
    let mut lobes: Vec<(bool, usize, usize)> = Vec::new();
    for (i, &v) in profile.iter().enumerate() {
        if v.abs() <= 1e-9 {
            continue;
        }
        let positive = v > 0.0;
        match lobes.last_mut() {
            Some(l) if l.0 == positive && l.2 + 1 == i => l.2 = i,
            _ => lobes.push((positive, i, i)),
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < lobes.len() {
        let (a, b) = (lobes[i], lobes[i + 1]);
        if a.0 != b.0 {
            out.push((b.2 - a.1).saturating_sub(1));
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

/// Signed sum of `itx` down each column.
pub fn column_itx(bf: &BoundaryField) -> Vec<f64> {
    let mut out = vec![0.0; bf.width];
    for row in bf.itx.chunks_exact(bf.width) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}
