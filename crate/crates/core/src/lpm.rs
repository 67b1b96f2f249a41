//! Local part model sampling and descriptor assembly.
//!
//! A feature is one root patch sampled from the half-resolution "root
//! video" plus eight overlapping part patches covering the same region in
//! the full-resolution "part video". Root and parts are described from
//! their own integral videos and kept as two channels.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{polar, spatial_gradient, temporal_boundary, vote_into, vote_orientations, Binning};
use crate::error::{Error, Result};
use crate::integral::{Cuboid, IntegralBuilder, IntegralVideo};
use crate::video::{downscale, gaussian_smooth, resize, Clip, Frame, MIN_FRAME_SIDE};

/// Descriptor blocks below this L2 norm are zeroed instead of normalised.
pub const NORM_EPS: f64 = 1e-6;

/// Number of part patches per root (2 x 2 x 2).
pub const PARTS_PER_ROOT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    /// Gradient boundary histograms.
    #[default]
    Gbh,
    /// Spatial-gradient HOG baseline with mean-gradient sub-blocks.
    Hog,
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbh" => Ok(Self::Gbh),
            "hog" => Ok(Self::Hog),
            other => Err(Error::Config(format!("unknown descriptor {other:?}"))),
        }
    }
}

/// Everything that controls feature extraction for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub descriptor: DescriptorKind,
    /// Processed video = original downscaled by this factor.
    pub resolution_factor: f64,
    pub smooth: bool,
    pub sigma: f64,
    pub num_bins: usize,
    pub binning: Binning,
    /// Smallest spatial patch side in root-video pixels; derived from the
    /// descriptor and resolution when unset.
    pub min_spatial: Option<usize>,
    pub min_temporal: usize,
    pub step_factor: f64,
    pub spatial_scales: usize,
    pub temporal_scales: usize,
    pub features_per_clip: usize,
    pub segment_len: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            descriptor: DescriptorKind::Gbh,
            resolution_factor: 1.0,
            smooth: true,
            sigma: 1.0,
            num_bins: 8,
            binning: Binning::Soft,
            min_spatial: None,
            min_temporal: 14,
            step_factor: 0.2,
            spatial_scales: 8,
            temporal_scales: 2,
            features_per_clip: 10_000,
            segment_len: 160,
        }
    }
}

impl ExtractConfig {
    /// Length of one root or one part descriptor.
    pub fn descriptor_dim(&self) -> usize {
        8 * self.num_bins
    }

    pub fn effective_min_spatial(&self) -> usize {
        self.min_spatial
            .unwrap_or_else(|| default_min_spatial(self.descriptor, self.resolution_factor))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_factor >= 1.0) {
            return Err(Error::Config("resolution_factor must be >= 1".into()));
        }
        if self.smooth && !(self.sigma > 0.0) {
            return Err(Error::Config("sigma must be > 0".into()));
        }
        if self.num_bins < 2 {
            return Err(Error::Config("num_bins must be >= 2".into()));
        }
        if self.effective_min_spatial() < 4 || self.min_temporal < 2 {
            return Err(Error::Config(
                "min_spatial must be >= 4 and min_temporal >= 2".into(),
            ));
        }
        if self.spatial_scales == 0 || self.temporal_scales == 0 || self.segment_len == 0 {
            return Err(Error::Config(
                "scale counts and segment_len must be positive".into(),
            ));
        }
        if !(self.step_factor > 0.0) {
            return Err(Error::Config("step_factor must be > 0".into()));
        }
        Ok(())
    }
}

/// Smallest root patch side by processed resolution: 28 (GBH) or 24 (HOG)
/// at full size, 20 at half, 10 at a quarter.
pub fn default_min_spatial(kind: DescriptorKind, resolution_factor: f64) -> usize {
    if resolution_factor < 2.0_f64.sqrt() {
        match kind {
            DescriptorKind::Gbh => 28,
            DescriptorKind::Hog => 24,
        }
    } else if resolution_factor < 8.0_f64.sqrt() {
        20
    } else {
        10
    }
}

/// One (spatial size, temporal size) pair with its origins.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    pub size: usize,
    pub length: usize,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
    pub ts: Vec<usize>,
}

impl Scale {
    fn cell(&self, xi: usize, yi: usize, t: usize) -> Cuboid {
        Cuboid {
            x: self.xs[xi],
            y: self.ys[yi],
            t,
            w: self.size,
            h: self.size,
            l: self.length,
        }
    }
}

/// Dense multi-scale sampling grid over the root video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    pub dims: (usize, usize, usize),
    pub spatial_sizes: Vec<usize>,
    pub temporal_sizes: Vec<usize>,
    pub scales: Vec<Scale>,
}

impl ScaleGrid {
    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.scales
            .iter()
            .map(|s| s.xs.len() * s.ys.len() * s.ts.len())
            .sum()
    }

    /// Every cuboid of the grid, scale by scale.
    pub fn cells(&self) -> impl Iterator<Item = Cuboid> + '_ {
        self.scales.iter().flat_map(|s| {
            s.ts.iter().flat_map(move |&t| {
                (0..s.ys.len()).flat_map(move |yi| (0..s.xs.len()).map(move |xi| s.cell(xi, yi, t)))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub min_spatial: usize,
    pub min_temporal: usize,
    pub step_factor: f64,
    pub spatial_scales: usize,
    pub temporal_scales: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            min_spatial: 28,
            min_temporal: 14,
            step_factor: 0.2,
            spatial_scales: 8,
            temporal_scales: 2,
        }
    }
}

/// `round(min * sqrt(2)^k)` for `k < count`, clamped to `limit`, deduplicated.
pub fn scale_ladder(min: usize, count: usize, limit: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for k in 0..count {
        let s = ((min as f64 * 2f64.sqrt().powi(k as i32)).round() as usize).min(limit);
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

/// Origins `0, stride, 2 stride, ...` plus the last valid origin.
pub fn grid_positions(len: usize, size: usize, step_factor: f64) -> Vec<usize> {
    if size > len {
        return Vec::new();
    }
    let stride = ((step_factor * size as f64).round() as usize).max(1);
    let last = len - size;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

pub fn build_scale_grid(dims: (usize, usize, usize), params: &GridParams) -> Result<ScaleGrid> {
    let (w, h, t) = dims;
    if params.min_spatial < 4 || params.min_temporal < 2 {
        return Err(Error::Argument(format!(
            "min_spatial {} / min_temporal {} below 4 / 2",
            params.min_spatial, params.min_temporal
        )));
    }
    if !(params.step_factor > 0.0) {
        return Err(Error::Argument("step_factor must be positive".into()));
    }
    let side = w.min(h);
    if params.min_spatial > side || params.min_temporal > t {
        return Ok(ScaleGrid {
            dims,
            spatial_sizes: Vec::new(),
            temporal_sizes: Vec::new(),
            scales: Vec::new(),
        });
    }
    let spatial_sizes = scale_ladder(params.min_spatial, params.spatial_scales, side);
    let temporal_sizes = scale_ladder(params.min_temporal, params.temporal_scales, t);
    let mut scales = Vec::new();
    for &l in &temporal_sizes {
        for &s in &spatial_sizes {
            scales.push(Scale {
                size: s,
                length: l,
                xs: grid_positions(w, s, params.step_factor),
                ys: grid_positions(h, s, params.step_factor),
                ts: grid_positions(t, l, params.step_factor),
            });
        }
    }
    Ok(ScaleGrid {
        dims,
        spatial_sizes,
        temporal_sizes,
        scales,
    })
}

/// Scale index with the temporal origins usable inside one segment.
type ScaleOrigins = (usize, Vec<usize>);

/// Random root patches. Clips longer than `segment_len` are cut into equal
/// temporal segments, each sampled in proportion to its length from the
/// grid cells lying wholly inside it. Within a segment cells are drawn
/// without replacement unless more are requested than exist.
pub fn sample_roots(grid: &ScaleGrid, n: usize, seed: u64, segment_len: usize) -> Result<Vec<Cuboid>> {
    if grid.is_empty() {
        return Err(Error::Sampling("empty sampling grid".into()));
    }
    if segment_len == 0 {
        return Err(Error::Argument("segment_len must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = grid.dims.2;
    let nseg = depth.div_ceil(segment_len).max(1);
    let bounds: Vec<usize> = (0..=nseg).map(|i| i * depth / nseg).collect();

    // per segment: scales restricted to origins inside the segment
    let mut segments: Vec<(usize, Vec<ScaleOrigins>)> = Vec::with_capacity(nseg);
    for s in 0..nseg {
        let (lo, hi) = (bounds[s], bounds[s + 1]);
        let views: Vec<ScaleOrigins> = grid
            .scales
            .iter()
            .enumerate()
            .map(|(i, sc)| {
                let ts = sc
                    .ts
                    .iter()
                    .copied()
                    .filter(|&t| t >= lo && t + sc.length <= hi)
                    .collect();
                (i, ts)
            })
            .filter(|(_, ts): &ScaleOrigins| !ts.is_empty())
            .collect();
        segments.push((hi - lo, views));
    }
    let usable: usize = segments
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(len, _)| *len)
        .sum();
    if usable == 0 {
        return Err(Error::Sampling(
            "no grid cell fits inside a temporal segment".into(),
        ));
    }

    // quota proportional to segment length, remainder to the earliest segments
    let mut quotas: Vec<usize> = segments
        .iter()
        .map(|(len, v)| if v.is_empty() { 0 } else { n * len / usable })
        .collect();
    let mut rest = n - quotas.iter().sum::<usize>();
    for (q, (_, v)) in quotas.iter_mut().zip(&segments) {
        if rest == 0 {
            break;
        }
        if !v.is_empty() {
            *q += 1;
            rest -= 1;
        }
    }

    let mut out = Vec::with_capacity(n);
    for ((_, views), quota) in segments.iter().zip(quotas) {
        if quota == 0 {
            continue;
        }
        let counts: Vec<usize> = views
            .iter()
            .map(|(i, ts)| grid.scales[*i].xs.len() * grid.scales[*i].ys.len() * ts.len())
            .collect();
        let total: usize = counts.iter().sum();
        let pick = |mut idx: usize| {
            for ((si, ts), &c) in views.iter().zip(&counts) {
                if idx < c {
                    let sc = &grid.scales[*si];
                    let (nx, ny) = (sc.xs.len(), sc.ys.len());
                    let xi = idx % nx;
                    let yi = (idx / nx) % ny;
                    let ti = idx / (nx * ny);
                    return sc.cell(xi, yi, ts[ti]);
                }
                idx -= c;
            }
            unreachable!("index within total cell count")
        };
        if quota <= total {
            out.extend(index::sample(&mut rng, total, quota).into_iter().map(pick));
        } else {
            for _ in 0..quota {
                let i = rng.random_range(0..total);
                out.push(pick(i));
            }
        }
    }
    Ok(out)
}

/// Two overlapping windows covering an axis of extent `r`: window extent
/// `round(2r / 3)`, at least `r / 2 + 1` so the windows overlap, at
/// offsets `0` and `r - extent`.
pub fn split_axis(r: usize) -> (usize, [usize; 2]) {
    let p = (((2 * r) as f64 / 3.0).round() as usize).max(r / 2 + 1).min(r.max(1));
    (p, [0, r - p])
}

/// The 8 part cuboids (part-video coordinates) of a root patch, ordered
/// x fastest, then y, then t.
pub fn part_layout(root: &Cuboid, part_dims: (usize, usize, usize)) -> Result<[Cuboid; PARTS_PER_ROOT]> {
    let region = Cuboid {
        x: 2 * root.x,
        y: 2 * root.y,
        t: root.t,
        w: 2 * root.w,
        h: 2 * root.h,
        l: root.l,
    };
    if !region.fits(part_dims.0, part_dims.1, part_dims.2) {
        return Err(Error::Layout(format!(
            "part region {region:?} exceeds part video {part_dims:?}"
        )));
    }
    let (pw, ox) = split_axis(region.w);
    let (ph, oy) = split_axis(region.h);
    let (pl, ot) = split_axis(region.l);
    let mut out = [region; PARTS_PER_ROOT];
    let mut i = 0;
    for dt in ot {
        for dy in oy {
            for dx in ox {
                out[i] = Cuboid {
                    x: region.x + dx,
                    y: region.y + dy,
                    t: region.t + dt,
                    w: pw,
                    h: ph,
                    l: pl,
                };
                i += 1;
            }
        }
    }
    Ok(out)
}

/// Splits `[start, start + extent)` at `start + floor(extent / 2)`.
#[inline]
pub(crate) fn halves(start: usize, extent: usize) -> [(usize, usize); 2] {
    let mid = start + extent / 2;
    [(start, mid), (mid, start + extent)]
}

/// L2-normalises in place; blocks with norm <= `NORM_EPS` become zero.
pub fn normalize_block(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= NORM_EPS {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// 2x2x2 cells of per-bin vote sums, cells ordered x, y, t and bins
/// innermost, L2-normalised.
pub fn gbh_descriptor(iv: &IntegralVideo, patch: &Cuboid) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 8 * iv.channels()];
    gbh_descriptor_into(iv, patch, &mut out)?;
    Ok(out)
}

pub fn gbh_descriptor_into(iv: &IntegralVideo, patch: &Cuboid, out: &mut [f64]) -> Result<()> {
    let b = iv.channels();
    if !patch.fits(iv.width(), iv.height(), iv.depth()) {
        return Err(Error::Argument(format!("patch {patch:?} outside integral video")));
    }
    if out.len() != 8 * b {
        return Err(Error::Argument("descriptor buffer has wrong length".into()));
    }
    let mut cell = 0;
    for (t0, t1) in halves(patch.t, patch.l) {
        for (y0, y1) in halves(patch.y, patch.h) {
            for (x0, x1) in halves(patch.x, patch.w) {
                iv.box_sums(x0, y0, t0, x1, y1, t1, &mut out[cell * b..(cell + 1) * b]);
                cell += 1;
            }
        }
    }
    normalize_block(out);
    Ok(())
}

/// HOG baseline over a 2-channel (gx, gy) integral: each of the 2x2x2
/// cells is cut into 2x2x2 sub-blocks whose mean gradient votes into the
/// cell histogram by orientation, weighted by magnitude.
pub fn hog_descriptor(iv_raw: &IntegralVideo, patch: &Cuboid, num_bins: usize, binning: Binning) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 8 * num_bins];
    hog_descriptor_into(iv_raw, patch, binning, &mut out)?;
    Ok(out)
}

pub fn hog_descriptor_into(iv_raw: &IntegralVideo, patch: &Cuboid, binning: Binning, out: &mut [f64]) -> Result<()> {
    if iv_raw.channels() != 2 {
        return Err(Error::Argument(format!(
            "HOG needs a 2-channel gradient integral, got {}",
            iv_raw.channels()
        )));
    }
    if !patch.fits(iv_raw.width(), iv_raw.height(), iv_raw.depth()) {
        return Err(Error::Argument(format!("patch {patch:?} outside integral video")));
    }
    if !out.len().is_multiple_of(8) || out.len() < 16 {
        return Err(Error::Argument("descriptor buffer has wrong length".into()));
    }
    let b = out.len() / 8;
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut g = [0.0; 2];
    let mut cell = 0;
    for (t0, t1) in halves(patch.t, patch.l) {
        for (y0, y1) in halves(patch.y, patch.h) {
            for (x0, x1) in halves(patch.x, patch.w) {
                let hist = &mut out[cell * b..(cell + 1) * b];
                for (s0, s1) in halves(t0, t1 - t0) {
                    for (r0, r1) in halves(y0, y1 - y0) {
                        for (q0, q1) in halves(x0, x1 - x0) {
                            let vol = (s1 - s0) * (r1 - r0) * (q1 - q0);
                            if vol == 0 {
                                continue;
                            }
                            iv_raw.box_sums(q0, r0, s0, q1, r1, s1, &mut g);
                            let (r, theta) = polar(g[0] / vol as f64, g[1] / vol as f64);
                            vote_into(hist, r, theta, binning);
                        }
                    }
                }
                cell += 1;
            }
        }
    }
    normalize_block(out);
    Ok(())
}

/// One sampled LPM feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LpmFeature {
    pub root: Vec<f64>,
    /// The 8 part descriptors concatenated in [`part_layout`] order.
    pub parts: Vec<f64>,
    pub root_patch: Cuboid,
}

/// Root (half resolution) and part (processed resolution) integral videos
/// of one clip.
#[derive(Debug, Clone)]
pub struct ClipIntegrals {
    pub kind: DescriptorKind,
    pub root: IntegralVideo,
    pub part: IntegralVideo,
    /// Decoded frames that went into the integrals.
    pub frames: usize,
}

impl ClipIntegrals {
    pub fn memory_bytes(&self) -> usize {
        self.root.memory_bytes() + self.part.memory_bytes()
    }
}

/// Processed frames: downscaled and optionally smoothed.
pub fn processed_frames(clip: &Clip, cfg: &ExtractConfig) -> Result<Vec<Frame>> {
    let clip = downscale(clip, cfg.resolution_factor)?;
    if cfg.smooth {
        clip.frames()
            .iter()
            .map(|f| gaussian_smooth(f, cfg.sigma))
            .collect()
    } else {
        Ok(clip.frames().to_vec())
    }
}

fn integral_of<'a>(
    frames: impl ExactSizeIterator<Item = Result<std::borrow::Cow<'a, Frame>>>,
    width: usize,
    height: usize,
    cfg: &ExtractConfig,
) -> Result<IntegralVideo> {
    let n = frames.len();
    match cfg.descriptor {
        DescriptorKind::Gbh => {
            let mut b = IntegralBuilder::with_capacity(width, height, cfg.num_bins, n.saturating_sub(1))?;
            let mut prev = None;
            for f in frames {
                let g = spatial_gradient(&*f?);
                if let Some(p) = prev.replace(g) {
                    let bf = temporal_boundary(&p, prev.as_ref().unwrap())?;
                    b.push(vote_orientations(&bf, cfg.num_bins, cfg.binning)?.bins())?;
                }
            }
            Ok(b.finish())
        }
        DescriptorKind::Hog => {
            let mut b = IntegralBuilder::with_capacity(width, height, 2, n)?;
            for f in frames {
                let g = spatial_gradient(&*f?);
                b.push(&[g.gx(), g.gy()])?;
            }
            Ok(b.finish())
        }
    }
}

/// Builds the root and part integral videos. The root video is the
/// processed video at `floor(W/2) x floor(H/2)` so that doubled root
/// coordinates always land inside the part video.
pub fn prepare_integrals(clip: &Clip, cfg: &ExtractConfig) -> Result<ClipIntegrals> {
    cfg.validate()?;
    let processed = processed_frames(clip, cfg)?;
    let (pw, ph) = (processed[0].width(), processed[0].height());
    let (rw, rh) = (pw / 2, ph / 2);
    if rw < MIN_FRAME_SIDE || rh < MIN_FRAME_SIDE {
        return Err(Error::Argument(format!(
            "processed video {pw}x{ph} is too small for a half-resolution root video"
        )));
    }
    let part = integral_of(
        processed.iter().map(|f| Ok(std::borrow::Cow::Borrowed(f))),
        pw,
        ph,
        cfg,
    )?;
    let root = integral_of(
        processed.iter().map(|f| resize(f, rw, rh).map(std::borrow::Cow::Owned)),
        rw,
        rh,
        cfg,
    )?;
    Ok(ClipIntegrals {
        kind: cfg.descriptor,
        root,
        part,
        frames: clip.frame_count(),
    })
}

/// Samples roots and assembles LPM features. A clip too short or small for
/// the grid yields no features and a warning.
pub fn sample_features(ints: &ClipIntegrals, cfg: &ExtractConfig, seed: u64) -> Result<Vec<LpmFeature>> {
    let root = &ints.root;
    let params = GridParams {
        min_spatial: cfg.effective_min_spatial(),
        min_temporal: cfg.min_temporal,
        step_factor: cfg.step_factor,
        spatial_scales: cfg.spatial_scales,
        temporal_scales: cfg.temporal_scales,
    };
    let grid = build_scale_grid((root.width(), root.height(), root.depth()), &params)?;
    if grid.is_empty() {
        log::warn!(
            "root video {}x{}x{} is smaller than the minimal patch {}x{}x{}; clip skipped",
            root.width(),
            root.height(),
            root.depth(),
            params.min_spatial,
            params.min_spatial,
            params.min_temporal
        );
        return Ok(Vec::new());
    }
    let roots = sample_roots(&grid, cfg.features_per_clip, seed, cfg.segment_len)?;
    let dim = cfg.descriptor_dim();
    let part_dims = (ints.part.width(), ints.part.height(), ints.part.depth());
    let describe = |iv: &IntegralVideo, c: &Cuboid, out: &mut [f64]| match ints.kind {
        DescriptorKind::Gbh => gbh_descriptor_into(iv, c, out),
        DescriptorKind::Hog => hog_descriptor_into(iv, c, cfg.binning, out),
    };
    roots
        .into_iter()
        .map(|r| {
            let mut root_desc = vec![0.0; dim];
            describe(&ints.root, &r, &mut root_desc)?;
            let mut parts = vec![0.0; PARTS_PER_ROOT * dim];
            for (p, chunk) in part_layout(&r, part_dims)?.iter().zip(parts.chunks_exact_mut(dim)) {
                describe(&ints.part, p, chunk)?;
            }
            Ok(LpmFeature {
                root: root_desc,
                parts,
                root_patch: r,
            })
        })
        .collect()
}

pub fn extract_features(clip: &Clip, cfg: &ExtractConfig, seed: u64) -> Result<Vec<LpmFeature>> {
    let ints = prepare_integrals(clip, cfg)?;
    sample_features(&ints, cfg, seed)
}
