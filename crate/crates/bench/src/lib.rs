//! Fixtures shared by the stage benchmarks.

use gbh_core::synth::{render_clip, Background, SceneObject, SceneSpec, Shape};
use gbh_core::{Clip, PipelineConfig};

/// A bright rectangle drifting right over static noise.
pub fn moving_rect_clip(width: usize, height: usize, frames: usize, seed: u64) -> Clip {
    let side = (width.min(height) / 4).max(4);
    let spec = SceneSpec::new(width, height, frames, Background::Noise { seed, amplitude: 25.0 }).with_object(SceneObject {
        shape: Shape::Rect,
        size: (side, side),
        start: (0, ((height - side) / 2) as i64),
        velocity: (((width - side) / (frames - 1)) as i64, 0),
        level: 230.0,
    });
    render_clip(&spec).expect("benchmark scene fits its frame")
}

/// Desk settings used by the stage benchmarks.
pub fn bench_config(resolution_factor: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::desk();
    cfg.extract.resolution_factor = resolution_factor;
    cfg.extract.min_spatial = None;
    cfg.workers = 1;
    cfg
}
