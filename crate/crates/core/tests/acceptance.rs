//! Acceptance suite: every criterion runs in sequence, prints one
//! PASS/FAIL line, and the test fails if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use gbh_core::boundary::{column_itx, double_edge_separations, spatial_gradient, temporal_boundary, vote_orientations};
use gbh_core::fv::{encode_clip, fisher_encode, fit_gmm, improve, GmmModel};
use gbh_core::integral::build_integral;
use gbh_core::lpm::{extract_features, gbh_descriptor, hog_descriptor};
use gbh_core::pipeline::{cmd_bench, cmd_eval, cmd_train, fit_encoding, Manifest};
use gbh_core::svm::{train_ovr, SvmModel, SvmOptions};
use gbh_core::synth::{gen_dataset, render_clip, Background, SceneObject, Shape};
use gbh_core::{Binning, Cuboid, DatasetSpec, ExtractConfig, Frame, PipelineConfig, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let e = start.elapsed();
    ensure(e < limit, || format!("took {e:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------------------
// 1. integral exactness

fn c1_integral_exactness() -> Outcome {
    let start = Instant::now();
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let vol: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n * n).map(|_| rng.random_range(-50..=50) as f64).collect())
            .collect();
        let frames: Vec<Vec<&[f64]>> = vol.iter().map(|f| vec![f.as_slice()]).collect();
        let iv = build_integral(n, n, &frames).map_err(|e| e.to_string())?;

        // prefix oracle: independent cumulative passes along t, y, x
        let m = n + 1;
        let mut p = vec![0.0; m * m * m];
        let at = |x: usize, y: usize, t: usize| (t * m + y) * m + x;
        for t in 0..n {
            for y in 0..n {
                for x in 0..n {
                    p[at(x + 1, y + 1, t + 1)] = vol[t][y * n + x];
                }
            }
        }
        for t in 1..m {
            for y in 1..m {
                for x in 1..m {
                    p[at(x, y, t)] += p[at(x - 1, y, t)];
                }
            }
        }
        for t in 1..m {
            for y in 1..m {
                for x in 1..m {
                    p[at(x, y, t)] += p[at(x, y - 1, t)];
                }
            }
        }
        for t in 1..m {
            for y in 1..m {
                for x in 1..m {
                    p[at(x, y, t)] += p[at(x, y, t - 1)];
                }
            }
        }
        for t in 0..m {
            for y in 0..m {
                for x in 0..m {
                    let got = iv.prefix(x, y, t, 0);
                    ensure(got == p[at(x, y, t)], || format!("prefix ({x},{y},{t}) = {got}, oracle {}", p[at(x, y, t)]))?;
                }
            }
        }

        for _ in 0..200 {
            let (w, h, l) = (rng.random_range(1..=n), rng.random_range(1..=n), rng.random_range(1..=n));
            let (x0, y0, t0) = (rng.random_range(0..=n - w), rng.random_range(0..=n - h), rng.random_range(0..=n - l));
            let c = Cuboid::new(x0, y0, t0, w, h, l).unwrap();
            let mut direct = 0.0;
            for t in t0..t0 + l {
                for y in y0..y0 + h {
                    for x in x0..x0 + w {
                        direct += vol[t][y * n + x];
                    }
                }
            }
            let got = iv.cuboid_sum(&c, 0).map_err(|e| e.to_string())?;
            ensure(got == direct, || format!("cuboid {c:?}: {got} vs {direct}"))?;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("50 volumes, all prefixes + 10000 cuboids exact in {:.2?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 2. descriptor oracle equivalence

/// Soft vote weight of bin `k`: linear in the circular distance from the
/// bin centre, zero beyond one bin width.
fn oracle_vote(hist: &mut [f64], gx: f64, gy: f64) {
    let r = (gx * gx + gy * gy).sqrt();
    if r == 0.0 {
        return;
    }
    let theta = gy.atan2(gx).rem_euclid(TAU);
    let b = hist.len();
    let width = TAU / b as f64;
    for (k, h) in hist.iter_mut().enumerate() {
        let centre = (k as f64 + 0.5) * width;
        let mut d = (theta - centre).abs();
        d = d.min(TAU - d);
        *h += r * (1.0 - d / width).max(0.0);
    }
}

fn oracle_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-6 {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn split2(start: usize, len: usize) -> [(usize, usize); 2] {
    [(start, start + len / 2), (start + len / 2, start + len)]
}

/// Direct [-1, 0, 1] gradients, zero on the border ring.
fn oracle_gradients(f: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            gx[y * w + x] = f[y * w + x + 1] - f[y * w + x - 1];
            gy[y * w + x] = f[(y + 1) * w + x] - f[(y - 1) * w + x];
        }
    }
    (gx, gy)
}

fn rel_close(a: &[f64], b: &[f64], rel: f64) -> Result<(), String> {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let tol = rel * x.abs().max(y.abs()) + 1e-12;
        ensure((x - y).abs() <= tol, || format!("entry {i}: {x} vs oracle {y}"))?;
    }
    Ok(())
}

fn c2_descriptor_oracles() -> Outcome {
    let start = Instant::now();
    let (w, h, t) = (48, 48, 20);
    let bins = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0;
    for _ in 0..10 {
        let frames: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..w * h).map(|_| rng.random_range(0..=255) as f64).collect())
            .collect();
        let grads: Vec<(Vec<f64>, Vec<f64>)> = frames.iter().map(|f| oracle_gradients(f, w, h)).collect();

        // integrals built by the library from its own stages
        let lib_frames: Vec<Frame> = frames.iter().map(|f| Frame::new(w, h, f.clone()).unwrap()).collect();
        let lib_grads: Vec<_> = lib_frames.iter().map(spatial_gradient).collect();
        let votes: Vec<Vec<Vec<f64>>> = lib_grads
            .windows(2)
            .map(|p| {
                let bf = temporal_boundary(&p[0], &p[1]).unwrap();
                vote_orientations(&bf, bins, Binning::Soft).unwrap().into_bins()
            })
            .collect();
        let iv_gbh = build_integral(w, h, &votes).map_err(|e| e.to_string())?;
        let raw: Vec<Vec<&[f64]>> = lib_grads.iter().map(|g| vec![g.gx(), g.gy()]).collect();
        let iv_hog = build_integral(w, h, &raw).map_err(|e| e.to_string())?;

        for _ in 0..50 {
            let (pw, ph) = (rng.random_range(2..=w), rng.random_range(2..=h));
            let pl = rng.random_range(2..=t - 1);
            let (px, py) = (rng.random_range(0..=w - pw), rng.random_range(0..=h - ph));
            let pt = rng.random_range(0..=t - 1 - pl);
            let patch = Cuboid::new(px, py, pt, pw, ph, pl).unwrap();

            // GBH: per-pixel boundary votes summed over each cell
            let mut expect = vec![0.0; 8 * bins];
            let mut cell = 0;
            for (t0, t1) in split2(pt, pl) {
                for (y0, y1) in split2(py, ph) {
                    for (x0, x1) in split2(px, pw) {
                        let hist = &mut expect[cell * bins..(cell + 1) * bins];
                        for s in t0..t1 {
                            for y in y0..y1 {
                                for x in x0..x1 {
                                    let i = y * w + x;
                                    let itx = grads[s + 1].0[i] - grads[s].0[i];
                                    let ity = grads[s + 1].1[i] - grads[s].1[i];
                                    oracle_vote(hist, itx, ity);
                                }
                            }
                        }
                        cell += 1;
                    }
                }
            }
            oracle_normalize(&mut expect);
            let got = gbh_descriptor(&iv_gbh, &patch).map_err(|e| e.to_string())?;
            rel_close(&got, &expect, 1e-5).map_err(|e| format!("GBH {patch:?}: {e}"))?;

            // HOG: mean gradient of every sub-block of every cell
            let hog_patch = Cuboid::new(px, py, pt, pw, ph, pl + 1).unwrap();
            let mut expect = vec![0.0; 8 * bins];
            let mut cell = 0;
            for (t0, t1) in split2(pt, pl + 1) {
                for (y0, y1) in split2(py, ph) {
                    for (x0, x1) in split2(px, pw) {
                        let hist = &mut expect[cell * bins..(cell + 1) * bins];
                        for (s0, s1) in split2(t0, t1 - t0) {
                            for (r0, r1) in split2(y0, y1 - y0) {
                                for (q0, q1) in split2(x0, x1 - x0) {
                                    let n = (s1 - s0) * (r1 - r0) * (q1 - q0);
                                    if n == 0 {
                                        continue;
                                    }
                                    let (mut sx, mut sy) = (0.0, 0.0);
                                    for s in s0..s1 {
                                        for y in r0..r1 {
                                            for x in q0..q1 {
                                                sx += grads[s].0[y * w + x];
                                                sy += grads[s].1[y * w + x];
                                            }
                                        }
                                    }
                                    oracle_vote(hist, sx / n as f64, sy / n as f64);
                                }
                            }
                        }
                        cell += 1;
                    }
                }
            }
            oracle_normalize(&mut expect);
            let got = hog_descriptor(&iv_hog, &hog_patch, bins, Binning::Soft).map_err(|e| e.to_string())?;
            rel_close(&got, &expect, 1e-5).map_err(|e| format!("HOG {hog_patch:?}: {e}"))?;
            checked += 1;
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("{checked} GBH + {checked} HOG patches within 1e-5 relative in {:.2?}", start.elapsed()))
}

// ---------------------------------------------------------------------------
// 3. double edges

fn c3_double_edges() -> Outcome {
    let mut seen = Vec::new();
    for v in [1i64, 2, 4] {
        let spec = SceneSpec::new(64, 12, 6, Background::Uniform { level: 20.0 }).with_object(SceneObject {
            shape: Shape::Bar,
            size: (v as usize + 6, 0),
            start: (4, 0),
            velocity: (v, 0),
            level: 220.0,
        });
        let clip = render_clip(&spec).map_err(|e| e.to_string())?;
        for t in 0..clip.frame_count() - 1 {
            let g0 = spatial_gradient(&clip.frames()[t]);
            let g1 = spatial_gradient(&clip.frames()[t + 1]);
            let bf = temporal_boundary(&g0, &g1).map_err(|e| e.to_string())?;
            let seps = double_edge_separations(&column_itx(&bf));
            ensure(seps == vec![v as usize; 2], || format!("speed {v}, t = {t}: separations {seps:?}"))?;
        }
        seen.push(format!("v={v}->{v}"));
    }
    Ok(format!("separations {} on both edges of every frame pair", seen.join(", ")))
}

// ---------------------------------------------------------------------------
// 4. camera pan

fn c4_camera_pan() -> Outcome {
    let (w, h, frames) = (40, 32, 5);
    let mut pixels = 0;
    for (i, &(dx, dy)) in [(1i64, 0i64), (0, 1), (-2, 1), (3, -2), (1, 1)].iter().enumerate() {
        let bg = Background::Noise { seed: 400 + i as u64, amplitude: 60.0 };
        let clip = render_clip(&SceneSpec::new(w, h, frames, bg).with_pan(dx, dy)).map_err(|e| e.to_string())?;
        // the rendered frame t is the plane shifted by t * pan
        let plane = |x: i64, y: i64, t: i64| bg.value(x - t * dx, y - t * dy);
        for t in 0..frames - 1 {
            let bf = temporal_boundary(&spatial_gradient(&clip.frames()[t]), &spatial_gradient(&clip.frames()[t + 1]))
                .map_err(|e| e.to_string())?;
            let tt = t as i64;
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let (xi, yi) = (x as i64, y as i64);
                    let gx = |s: i64| plane(xi + 1, yi, s) - plane(xi - 1, yi, s);
                    let gy = |s: i64| plane(xi, yi + 1, s) - plane(xi, yi - 1, s);
                    let (ex, ey) = (gx(tt + 1) - gx(tt), gy(tt + 1) - gy(tt));
                    let k = y * w + x;
                    ensure(bf.itx()[k] == ex && bf.ity()[k] == ey, || {
                        format!("pan ({dx},{dy}) t={t} ({x},{y}): ({}, {}) vs ({ex}, {ey})", bf.itx()[k], bf.ity()[k])
                    })?;
                    ensure(bf.r()[k] == ex.hypot(ey), || format!("r mismatch at ({x},{y})"))?;
                    pixels += 1;
                }
            }
        }
    }
    Ok(format!("{pixels} interior pixels equal the shift-subtract oracle exactly"))
}

// ---------------------------------------------------------------------------
// 5. dimensions

fn c5_dimensions() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut ex = ExtractConfig { features_per_clip: 400, ..ExtractConfig::default() };
    ex.smooth = true;
    let mut per_clip = Vec::new();
    for seed in 0..4u64 {
        let clip = render_clip(
            &SceneSpec::new(128, 96, 24, Background::Noise { seed, amplitude: 30.0 }).with_object(SceneObject {
                shape: Shape::Rect,
                size: (24, 20),
                start: (10, 30),
                velocity: (3, 0),
                level: 230.0,
            }),
        )
        .map_err(|e| e.to_string())?;
        let feats = extract_features(&clip, &ex, seed).map_err(|e| e.to_string())?;
        ensure(!feats.is_empty(), || "no features extracted".into())?;
        for f in &feats {
            ensure(f.root.len() == 64 && f.parts.len() == 512, || {
                format!("feature dims ({}, {})", f.root.len(), f.parts.len())
            })?;
        }
        per_clip.push(feats);
    }
    let models = fit_encoding(&per_clip, &cfg, 5).map_err(|e| e.to_string())?;
    ensure(models.pca_root.out_dim() == 32 && models.pca_part.out_dim() == 64, || "PCA dims".into())?;
    ensure(models.root_fv_len() == 8192, || format!("root FV {}", models.root_fv_len()))?;
    ensure(models.part_fv_len() == 16384, || format!("part FV {}", models.part_fv_len()))?;
    let enc = encode_clip(&per_clip[0], &models).map_err(|e| e.to_string())?;
    ensure(enc.vector.len() == 24576 && cfg.clip_vector_len() == 24576, || format!("clip vector {}", enc.vector.len()))?;
    Ok("LPM (64, 512), root FV 8192, part FV 16384, clip vector 24576".into())
}

// ---------------------------------------------------------------------------
// 6. Fisher vector invariants

fn c6_fv_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let truth = GmmModel::new(
        4,
        3,
        vec![0.1, 0.2, 0.3, 0.4],
        (0..12).map(|_| rng.random_range(-6.0..6.0)).collect(),
        (0..12).map(|_| rng.random_range(0.2..2.0)).collect(),
    )
    .unwrap();
    let samples = truth.sample(4000, 7);
    let fit = fit_gmm(&samples, 4, 9).map_err(|e| e.to_string())?;
    let mut worst_sum: f64 = 0.0;
    for x in samples.iter().take(1000) {
        let g = fit.model.responsibilities(x).map_err(|e| e.to_string())?;
        ensure(g.iter().all(|&v| v >= 0.0), || "negative responsibility".into())?;
        worst_sum = worst_sum.max((g.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= 1e-6, || format!("responsibility sum off by {worst_sum}"))?;

    let mut worst_norm: f64 = 0.0;
    for n in [1usize, 5, 50, 500] {
        let mut fv = fisher_encode(&fit.model, &samples[..n]).map_err(|e| e.to_string())?;
        improve(&mut fv);
        worst_norm = worst_norm.max((fv.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs());
    }
    for _ in 0..100 {
        let mut v: Vec<f64> = (0..50).map(|_| rng.random_range(-1e3..1e3)).collect();
        improve(&mut v);
        worst_norm = worst_norm.max((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs());
    }
    ensure(worst_norm <= 1e-9, || format!("improved norm off by {worst_norm}"))?;

    let ll = &fit.log_likelihoods;
    let worst_drop = ll.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    ensure(worst_drop >= -1e-8, || format!("EM log-likelihood dropped by {worst_drop}"))?;
    Ok(format!(
        "resp sum err {worst_sum:.1e}, norm err {worst_norm:.1e}, EM {} iterations, min step {worst_drop:.1e}",
        ll.len()
    ))
}

// ---------------------------------------------------------------------------
// 7, 8, 10. synthetic classification

struct Run {
    accuracy: f64,
    model_bytes: Vec<u8>,
    elapsed: Duration,
}

fn train_eval(m: &Manifest, cfg: &PipelineConfig) -> Result<Run, String> {
    let start = Instant::now();
    let (model, _) = cmd_train(m, Some(1), cfg).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.gbhm");
    model.save(&path).map_err(|e| e.to_string())?;
    let loaded = gbh_core::Model::load(&path).map_err(|e| e.to_string())?;
    let report = cmd_eval(m, Some(1), &loaded, cfg).map_err(|e| e.to_string())?;
    Ok(Run {
        accuracy: report.accuracy,
        model_bytes: std::fs::read(&path).map_err(|e| e.to_string())?,
        elapsed: start.elapsed(),
    })
}

fn desk(resolution_factor: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::desk();
    cfg.workers = 1;
    cfg.seed = 1;
    cfg.extract.resolution_factor = resolution_factor;
    if resolution_factor > 1.0 {
        cfg.extract.min_spatial = Some(6);
    }
    cfg
}

// ---------------------------------------------------------------------------
// 9. throughput ordering

fn c9_throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = DatasetSpec {
        width: 320,
        height: 240,
        frames: 40,
        ..DatasetSpec::directions(1, 909)
    };
    let m = gen_dataset(&ds, dir.path()).map_err(|e| e.to_string())?;
    let bench = |factor: f64| {
        let mut cfg = PipelineConfig::desk();
        cfg.workers = 1;
        cfg.extract.min_spatial = None;
        cfg.extract.resolution_factor = factor;
        cmd_bench(&m, &cfg, None).map_err(|e| e.to_string())
    };
    let full = bench(1.0)?;
    let quarter = bench(4.0)?;
    for s in [&full, &quarter] {
        for fps in [s.integral_fps, s.sampling_fps, s.encoding_fps, s.total_fps] {
            ensure(fps.is_finite() && fps > 0.0, || format!("bad fps {fps}"))?;
        }
        ensure(
            s.total_fps <= s.integral_fps && s.total_fps <= s.sampling_fps && s.total_fps <= s.encoding_fps,
            || "total fps exceeds a stage fps".into(),
        )?;
        let staged = s.integral_seconds + s.sampling_seconds + s.encoding_seconds;
        ensure(staged <= s.wall_seconds, || "stage times exceed wall time".into())?;
    }
    let ratio = quarter.total_fps / full.total_fps;
    ensure(ratio >= 1.3, || format!("quarter/full total fps = {ratio:.2} (< 1.3)"))?;
    Ok(format!(
        "full {:.1} fps, quarter {:.1} fps, ratio {ratio:.2}",
        full.total_fps, quarter.total_fps
    ))
}

// ---------------------------------------------------------------------------
// 11. SVM sanity

fn c11_svm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..200 {
        let c = i % 2;
        let s = if c == 0 { 5.0 } else { -5.0 };
        x.push(vec![s + rng.random_range(-2.0..2.0), s + rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)]);
        y.push(c);
    }
    let opts = SvmOptions::default();
    let m = train_ovr(&x, &y, &opts, 3).map_err(|e| e.to_string())?;
    let correct = x.iter().zip(&y).filter(|(xi, &yi)| m.predict(xi).unwrap() == yi).count();
    ensure(correct == x.len(), || format!("training accuracy {correct}/{}", x.len()))?;

    let tie = SvmModel::new(3, 2, 1.0, vec![1.0, 0.0, 1.0, 0.0, -1.0, 0.0], vec![0.0; 3]).unwrap();
    ensure(tie.predict(&[2.0, 1.0]).unwrap() == 0, || "tie not broken to lowest index".into())?;
    let tie = SvmModel::new(3, 2, 1.0, vec![-1.0, 0.0, 1.0, 0.0, 1.0, 0.0], vec![0.0; 3]).unwrap();
    ensure(tie.predict(&[2.0, 1.0]).unwrap() == 1, || "tie between 1 and 2 not broken to 1".into())?;

    // three overlapping classes, relabelled by a permutation
    let mut x3 = Vec::new();
    let mut y3 = Vec::new();
    let centres = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)];
    for i in 0..150 {
        let c = i % 3;
        x3.push(vec![centres[c].0 + rng.random_range(-2.0..2.0), centres[c].1 + rng.random_range(-2.0..2.0)]);
        y3.push(c);
    }
    let perm = [2usize, 0, 1];
    let y3p: Vec<usize> = y3.iter().map(|&c| perm[c]).collect();
    let a = train_ovr(&x3, &y3, &opts, 8).map_err(|e| e.to_string())?;
    let b = train_ovr(&x3, &y3p, &opts, 8).map_err(|e| e.to_string())?;
    for _ in 0..500 {
        let q = vec![rng.random_range(-4.0..7.0), rng.random_range(-4.0..7.0)];
        let (pa, pb) = (a.predict(&q).unwrap(), b.predict(&q).unwrap());
        ensure(perm[pa] == pb, || format!("query {q:?}: {pa} maps to {}, permuted model says {pb}", perm[pa]))?;
    }
    Ok("separable 200/200, tie rule, label permutation on 500 queries".into())
}

// ---------------------------------------------------------------------------

/// Straight to the stderr handle so the lines show even when output is captured.
fn say(line: String) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn report(results: &mut Vec<(usize, &'static str, Outcome)>, id: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
    let outcome = f();
    match &outcome {
        Ok(detail) => say(format!("criterion {id:>2} PASS  {name}: {detail}")),
        Err(why) => say(format!("criterion {id:>2} FAIL  {name}: {why}")),
    }
    results.push((id, name, outcome));
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    report(&mut results, 1, "integral exactness", c1_integral_exactness);
    report(&mut results, 2, "descriptor oracle equivalence", c2_descriptor_oracles);
    report(&mut results, 3, "double-edge separation", c3_double_edges);
    report(&mut results, 4, "camera-pan shift-subtract", c4_camera_pan);
    report(&mut results, 5, "dimensions", c5_dimensions);
    report(&mut results, 6, "Fisher vector invariants", c6_fv_invariants);

    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_dataset(&DatasetSpec::directions(24, 7), dir.path());
    let manifest = manifest.map_err(|e| e.to_string());
    let full = manifest.as_ref().map_err(Clone::clone).and_then(|m| train_eval(m, &desk(1.0)));
    report(&mut results, 7, "synthetic classification", || {
        let r = full.as_ref().map_err(Clone::clone)?;
        ensure(r.accuracy >= 0.95, || format!("test accuracy {:.1}% < 95%", 100.0 * r.accuracy))?;
        ensure(r.elapsed < Duration::from_secs(300), || format!("took {:.1?}", r.elapsed))?;
        Ok(format!("test accuracy {:.1}% in {:.1?} (1 worker)", 100.0 * r.accuracy, r.elapsed))
    });
    report(&mut results, 8, "resolution robustness", || {
        let r = full.as_ref().map_err(Clone::clone)?;
        let m = manifest.as_ref().map_err(Clone::clone)?;
        let half = train_eval(m, &desk(2.0))?;
        let delta = 100.0 * (half.accuracy - r.accuracy).abs();
        ensure(delta <= 5.0, || format!("accuracy changed by {delta:.1} points"))?;
        Ok(format!(
            "full {:.1}%, half {:.1}%, change {delta:.1} points",
            100.0 * r.accuracy,
            100.0 * half.accuracy
        ))
    });
    report(&mut results, 9, "throughput ordering", c9_throughput);
    report(&mut results, 10, "determinism", || {
        let r = full.as_ref().map_err(Clone::clone)?;
        let m = manifest.as_ref().map_err(Clone::clone)?;
        let again = train_eval(m, &desk(1.0))?;
        ensure(again.model_bytes == r.model_bytes, || "model files differ".into())?;
        ensure(again.accuracy == r.accuracy, || "accuracies differ".into())?;
        Ok(format!("identical {}-byte model files and accuracy", r.model_bytes.len()))
    });
    report(&mut results, 11, "SVM sanity", c11_svm);

    let failed: Vec<_> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    say(format!("{} of {} criteria passed", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
