//! Manifest-driven extraction, training, evaluation and the staged
//! throughput benchmark.

mod config;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::PipelineConfig;
pub use manifest::{Manifest, ManifestEntry, SPLITS};

use crate::error::{Error, Result};
use crate::formats::{quantize_encoding, write_features, Model};
use crate::fv::{apply_pca, encode_clip, fit_gmm, fit_pca, EncodingModels};
use crate::lpm::{extract_features, prepare_integrals, sample_features, LpmFeature};
use crate::svm::{train_ovr, SvmOptions};
use crate::video::{load_clip, Clip, ClipFormat};

/// Per-clip sampling seed: the run seed mixed with a hash of the manifest
/// path, so results do not depend on processing order.
pub fn clip_seed(seed: u64, path: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Thread pool with `workers` threads (0 = one per core).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

pub fn load_entry(manifest: &Manifest, entry: &ManifestEntry) -> Result<Clip> {
    let path = manifest.resolve(entry);
    load_clip(&path, ClipFormat::infer(&path))
}

struct Extracted {
    features: Vec<LpmFeature>,
    frames: usize,
    seconds: f64,
}

fn extract_entry(manifest: &Manifest, entry: &ManifestEntry, cfg: &PipelineConfig) -> Result<Extracted> {
    let start = Instant::now();
    let clip = load_entry(manifest, entry)?;
    let features = extract_features(&clip, &cfg.extract, clip_seed(cfg.seed, &entry.path))?;
    Ok(Extracted {
        features,
        frames: clip.frame_count(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Extracts the given entries in order on the pool.
fn extract_indices(manifest: &Manifest, idx: &[usize], cfg: &PipelineConfig, pool: &rayon::ThreadPool) -> Vec<Result<Extracted>> {
    pool.install(|| {
        idx.par_iter()
            .map(|&i| extract_entry(manifest, &manifest.entries()[i], cfg))
            .collect()
    })
}

fn extract_all_ok(manifest: &Manifest, idx: &[usize], cfg: &PipelineConfig, pool: &rayon::ThreadPool) -> Result<Vec<Vec<LpmFeature>>> {
    extract_indices(manifest, idx, cfg, pool)
        .into_iter()
        .zip(idx)
        .map(|(r, &i)| {
            r.map(|e| e.features).map_err(|e| match e {
                Error::Decode { .. } => e,
                other => Error::Data(format!("{}: {other}", manifest.entries()[i].path)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ClipRecord {
    pub path: String,
    pub features: usize,
    pub frames: usize,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractReport {
    pub output_dir: PathBuf,
    pub clips: Vec<ClipRecord>,
    pub failures: usize,
}

impl fmt::Display for ExtractReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clips {
            match &c.error {
                None => writeln!(f, "{:<40} {:>6} features {:>5} frames {:>8.3} s", c.path, c.features, c.frames, c.seconds)?,
                Some(e) => writeln!(f, "{:<40} FAILED: {e}", c.path)?,
            }
        }
        writeln!(
            f,
            "{} clips, {} failed, dumps in {}",
            self.clips.len(),
            self.failures,
            self.output_dir.display()
        )
    }
}

fn dump_name(path: &str) -> String {
    let stem = Path::new(path).with_extension("");
    let flat: String = stem
        .to_string_lossy()
        .chars()
        .map(|c| if c == '/' || c == '\\' || c == ':' { '_' } else { c })
        .collect();
    format!("{}.gbhf", flat.trim_start_matches('_'))
}

/// Writes one `GBHF` dump per clip. Unreadable clips are recorded and
/// skipped.
pub fn cmd_extract(manifest: &Manifest, cfg: &PipelineConfig, out_dir: &Path) -> Result<ExtractReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let pool = worker_pool(cfg.workers)?;
    let idx: Vec<usize> = (0..manifest.len()).collect();
    let results = extract_indices(manifest, &idx, cfg, &pool);
    let mut clips = Vec::with_capacity(results.len());
    for (entry, res) in manifest.entries().iter().zip(results) {
        let rec = match res.and_then(|ex| {
            write_features(&out_dir.join(dump_name(&entry.path)), &ex.features, cfg.root_dim(), cfg.part_dim())?;
            Ok(ex)
        }) {
            Ok(ex) => ClipRecord {
                path: entry.path.clone(),
                features: ex.features.len(),
                frames: ex.frames,
                seconds: ex.seconds,
                error: None,
            },
            Err(e) => {
                log::error!("{}: {e}", entry.path);
                ClipRecord {
                    path: entry.path.clone(),
                    features: 0,
                    frames: 0,
                    seconds: 0.0,
                    error: Some(e.to_string()),
                }
            }
        };
        clips.push(rec);
    }
    let failures = clips.iter().filter(|c| c.error.is_some()).count();
    Ok(ExtractReport {
        output_dir: out_dir.to_path_buf(),
        clips,
        failures,
    })
}

/// Fits PCA on a seeded uniform draw of at most `gmm_samples` features,
/// then a GMM per channel on the projected draw.
pub fn fit_encoding(per_clip: &[Vec<LpmFeature>], cfg: &PipelineConfig, seed: u64) -> Result<EncodingModels> {
    let all: Vec<&LpmFeature> = per_clip.iter().flatten().collect();
    let need = cfg.codewords.max(cfg.root_out_dim() + 1).max(cfg.part_out_dim() + 1);
    if all.len() < need {
        return Err(Error::Training(format!(
            "encoder training needs at least {need} features, got {}",
            all.len()
        )));
    }
    if all.len() < 10 * cfg.codewords {
        log::warn!(
            "{} features for {} codewords; at least {} recommended",
            all.len(),
            cfg.codewords,
            10 * cfg.codewords
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = rand::seq::index::sample(&mut rng, all.len(), cfg.gmm_samples.min(all.len())).into_vec();
    pick.sort_unstable();
    let channel = |get: &dyn Fn(&LpmFeature) -> &[f64], out_dim: usize, gmm_seed: u64| -> Result<_> {
        let pool: Vec<&[f64]> = pick.iter().map(|&i| get(all[i])).collect();
        let pca = fit_pca(&pool, out_dim, cfg.whiten)?;
        let projected = pool
            .par_iter()
            .map(|x| apply_pca(&pca, x))
            .collect::<Result<Vec<_>>>()?;
        let gmm = fit_gmm(&projected, cfg.codewords, gmm_seed)?.model;
        Ok((pca, gmm))
    };
    let (pca_root, gmm_root) = channel(&|f| &f.root, cfg.root_out_dim(), seed.wrapping_add(1))?;
    let (pca_part, gmm_part) = channel(&|f| &f.parts, cfg.part_out_dim(), seed.wrapping_add(2))?;
    quantize_encoding(&EncodingModels {
        pca_root,
        pca_part,
        gmm_root,
        gmm_part,
    })
}

fn encode_all(per_clip: &[Vec<LpmFeature>], enc: &EncodingModels, pool: &rayon::ThreadPool) -> Result<Vec<Vec<f64>>> {
    pool.install(|| {
        per_clip
            .par_iter()
            .map(|f| {
                let e = encode_clip(f, enc)?;
                if e.empty {
                    log::warn!("clip without features encodes to the zero vector");
                }
                Ok(e.vector)
            })
            .collect()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub split: Option<u32>,
    pub seed: u64,
    pub train_clips: usize,
    pub features: usize,
    pub encoder_samples: usize,
    pub num_classes: usize,
    pub vector_len: usize,
    pub training_accuracy: f64,
    pub seconds: f64,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let split = self.split.map_or("all".to_string(), |s| s.to_string());
        writeln!(
            f,
            "split {split}, seed {}: {} clips, {} features ({} for the encoder)",
            self.seed, self.train_clips, self.features, self.encoder_samples
        )?;
        writeln!(
            f,
            "{} classes, {}-dim clip vectors, training accuracy {:.1}%, {:.2} s",
            self.num_classes,
            self.vector_len,
            100.0 * self.training_accuracy,
            self.seconds
        )
    }
}

/// Extraction, encoder fitting, clip encoding and SVM training on the
/// training side of `split`.
pub fn cmd_train(manifest: &Manifest, split: Option<u32>, cfg: &PipelineConfig) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = worker_pool(cfg.workers)?;
    let (train, _) = manifest.partition(split)?;
    let per_clip = extract_all_ok(manifest, &train, cfg, &pool)?;
    let features: usize = per_clip.iter().map(Vec::len).sum();
    let encoding = pool.install(|| fit_encoding(&per_clip, cfg, cfg.seed))?;
    let vectors = encode_all(&per_clip, &encoding, &pool)?;
    let labels: Vec<usize> = train.iter().map(|&i| manifest.entries()[i].label).collect();
    let opts = SvmOptions {
        c: cfg.svm_c,
        ..SvmOptions::default()
    };
    let svm = pool.install(|| train_ovr(&vectors, &labels, &opts, cfg.seed))?;
    let correct = vectors
        .iter()
        .zip(&labels)
        .filter(|(v, &l)| svm.predict(v).map(|p| p == l).unwrap_or(false))
        .count();
    let report = TrainReport {
        split,
        seed: cfg.seed,
        train_clips: train.len(),
        features,
        encoder_samples: cfg.gmm_samples.min(features),
        num_classes: svm.num_classes(),
        vector_len: encoding.clip_vector_len(),
        training_accuracy: correct as f64 / train.len() as f64,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((Model { encoding, svm }, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassAccuracy {
    pub label: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub split: Option<u32>,
    pub seed: u64,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    pub predictions: Vec<usize>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let split = self.split.map_or("all".to_string(), |s| s.to_string());
        writeln!(
            f,
            "split {split}, seed {}: accuracy {:.1}% ({}/{})",
            self.seed,
            100.0 * self.accuracy,
            self.correct,
            self.total
        )?;
        writeln!(f, "  class  correct  total  accuracy")?;
        for c in &self.per_class {
            writeln!(f, "  {:>5}  {:>7}  {:>5}  {:>7.1}%", c.label, c.correct, c.total, 100.0 * c.accuracy)?;
        }
        Ok(())
    }
}

fn check_model(model: &Model, cfg: &PipelineConfig, num_classes: usize) -> Result<()> {
    let e = &model.encoding;
    if e.pca_root.in_dim() != cfg.root_dim() || e.pca_part.in_dim() != cfg.part_dim() {
        return Err(Error::Config(format!(
            "model expects descriptors of ({}, {}), config produces ({}, {})",
            e.pca_root.in_dim(),
            e.pca_part.in_dim(),
            cfg.root_dim(),
            cfg.part_dim()
        )));
    }
    if num_classes > model.svm.num_classes() {
        return Err(Error::Config(format!(
            "manifest has {num_classes} classes, model was trained on {}",
            model.svm.num_classes()
        )));
    }
    Ok(())
}

/// Classifies the test side of `split` with a trained model.
pub fn cmd_eval(manifest: &Manifest, split: Option<u32>, model: &Model, cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    check_model(model, cfg, manifest.num_classes())?;
    let pool = worker_pool(cfg.workers)?;
    let (_, test) = manifest.partition(split)?;
    let per_clip = extract_all_ok(manifest, &test, cfg, &pool)?;
    let vectors = encode_all(&per_clip, &model.encoding, &pool)?;
    let predictions = vectors
        .iter()
        .map(|v| model.svm.predict(v))
        .collect::<Result<Vec<_>>>()?;
    let n_classes = model.svm.num_classes();
    let mut per_class: Vec<ClassAccuracy> = (0..n_classes)
        .map(|label| ClassAccuracy {
            label,
            correct: 0,
            total: 0,
            accuracy: 0.0,
        })
        .collect();
    for (&i, &p) in test.iter().zip(&predictions) {
        let c = &mut per_class[manifest.entries()[i].label];
        c.total += 1;
        c.correct += usize::from(p == c.label);
    }
    per_class.retain(|c| c.total > 0);
    for c in &mut per_class {
        c.accuracy = c.correct as f64 / c.total as f64;
    }
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    Ok(EvalReport {
        split,
        seed: cfg.seed,
        correct,
        total: test.len(),
        accuracy: correct as f64 / test.len() as f64,
        per_class,
        predictions,
    })
}

/// `"44.7%±0.3"` from fractions.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.1}%±{:.1}", 100.0 * mean, 100.0 * std)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub runs: Vec<EvalReport>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub summary: String,
}

impl fmt::Display for ProtocolReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.runs {
            writeln!(f, "run seed {}: {:.1}% ({}/{})", r.seed, 100.0 * r.accuracy, r.correct, r.total)?;
        }
        writeln!(f, "mean over {} runs: {}", self.runs.len(), self.summary)
    }
}

/// Trains and evaluates once per seed `1..=runs`.
pub fn run_protocol(manifest: &Manifest, split: Option<u32>, cfg: &PipelineConfig, runs: usize) -> Result<ProtocolReport> {
    if runs == 0 {
        return Err(Error::Usage("runs must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(runs);
    for seed in 1..=runs as u64 {
        let cfg = PipelineConfig { seed, ..cfg.clone() };
        let (model, _) = cmd_train(manifest, split, &cfg)?;
        reports.push(cmd_eval(manifest, split, &model, &cfg)?);
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(ProtocolReport {
        runs: reports,
        mean_accuracy: mean,
        std_accuracy: std,
        summary: format_mean_std(mean, std),
    })
}

/// Stage throughput in decoded frames per second of stage time.
#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub resolution_factor: f64,
    pub clips: usize,
    pub frames_processed: usize,
    pub integral_seconds: f64,
    pub sampling_seconds: f64,
    pub encoding_seconds: f64,
    pub wall_seconds: f64,
    pub integral_fps: f64,
    pub sampling_fps: f64,
    pub encoding_fps: f64,
    pub total_fps: f64,
}

impl fmt::Display for StageTiming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} clips, {} frames, resolution factor {}",
            self.clips, self.frames_processed, self.resolution_factor
        )?;
        writeln!(f, "  stage                 seconds       fps")?;
        writeln!(f, "  integral video     {:>10.3} {:>9.1}", self.integral_seconds, self.integral_fps)?;
        writeln!(f, "  sampling+desc      {:>10.3} {:>9.1}", self.sampling_seconds, self.sampling_fps)?;
        writeln!(f, "  FV encoding        {:>10.3} {:>9.1}", self.encoding_seconds, self.encoding_fps)?;
        let total = self.integral_seconds + self.sampling_seconds + self.encoding_seconds;
        writeln!(f, "  total              {:>10.3} {:>9.1}", total, self.total_fps)
    }
}

/// Times the integral-video, sampling+descriptor and encoding stages clip
/// by clip on the calling thread. Decoding and classification are not
/// timed. Without `model`, encoders are fitted (untimed) on the sampled
/// features first.
pub fn cmd_bench(manifest: &Manifest, cfg: &PipelineConfig, model: Option<&Model>) -> Result<StageTiming> {
    cfg.validate()?;
    if let Some(m) = model {
        check_model(m, cfg, 0)?;
    }
    let wall = Instant::now();
    let (mut t_int, mut t_samp, mut t_enc) = (0.0, 0.0, 0.0);
    let mut frames = 0;
    let mut per_clip = Vec::with_capacity(manifest.len());
    for entry in manifest.entries() {
        let clip = load_entry(manifest, entry)?;
        frames += clip.frame_count();
        let t0 = Instant::now();
        let ints = prepare_integrals(&clip, &cfg.extract)?;
        let t1 = Instant::now();
        let feats = sample_features(&ints, &cfg.extract, clip_seed(cfg.seed, &entry.path))?;
        let t2 = Instant::now();
        t_int += (t1 - t0).as_secs_f64();
        t_samp += (t2 - t1).as_secs_f64();
        per_clip.push(feats);
    }
    let fitted;
    let enc = match model {
        Some(m) => &m.encoding,
        None => {
            let pool = worker_pool(cfg.workers)?;
            fitted = pool.install(|| fit_encoding(&per_clip, cfg, cfg.seed))?;
            &fitted
        }
    };
    for feats in &per_clip {
        let t = Instant::now();
        std::hint::black_box(encode_clip(feats, enc)?);
        t_enc += t.elapsed().as_secs_f64();
    }
    let fps = |s: f64| frames as f64 / s.max(1e-12);
    Ok(StageTiming {
        resolution_factor: cfg.extract.resolution_factor,
        clips: manifest.len(),
        frames_processed: frames,
        integral_seconds: t_int,
        sampling_seconds: t_samp,
        encoding_seconds: t_enc,
        wall_seconds: wall.elapsed().as_secs_f64(),
        integral_fps: fps(t_int),
        sampling_fps: fps(t_samp),
        encoding_fps: fps(t_enc),
        total_fps: fps(t_int + t_samp + t_enc),
    })
}
