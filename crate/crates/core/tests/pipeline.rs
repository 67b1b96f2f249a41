use gbh_core::formats::read_features;
use gbh_core::pipeline::{cmd_eval, cmd_extract, cmd_train};
use gbh_core::synth::gen_dataset;
use gbh_core::{DatasetSpec, Error, Manifest, PipelineConfig};
use tempfile::TempDir;

fn u32_at(b: &[u8], at: usize) -> usize {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap()) as usize
}

/// (tag, d0, d1) per section, walking payload sizes from the dims.
fn sections(bytes: &[u8]) -> Vec<(usize, usize, usize)> {
    assert_eq!(&bytes[..4], b"GBHM");
    let mut at = 8;
    let mut out = Vec::new();
    while at < bytes.len() {
        let (tag, d0, d1) = (u32_at(bytes, at), u32_at(bytes, at + 4), u32_at(bytes, at + 8));
        let reals = match tag {
            1 | 2 => d1 + d0 * d1,
            3 | 4 => d0 + 2 * d0 * d1,
            5 => 1 + d0 + d0 * d1,
            t => panic!("tag {t}"),
        };
        at += 12 + 4 * reals;
        out.push((tag, d0, d1));
    }
    assert_eq!(at, bytes.len());
    out
}

#[test]
fn extract_writes_a_dump_per_clip() {
    let dir = TempDir::new().unwrap();
    let m = gen_dataset(&DatasetSpec::directions(24, 3), &dir.path().join("ds")).unwrap();
    assert_eq!(m.len(), 96);
    let cfg = PipelineConfig::desk();
    let out = dir.path().join("f");
    let r = cmd_extract(&m, &cfg, &out).unwrap();
    assert_eq!(r.failures, 0);
    let dumps: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dumps.len(), 96);
    let recs = read_features(&dumps[0]).unwrap();
    assert_eq!(recs.len(), cfg.extract.features_per_clip);
    assert_eq!((recs[0].root.len(), recs[0].parts.len()), (cfg.root_dim(), cfg.part_dim()));
}

#[test]
fn desk_model_has_five_sections_with_halved_root_pca() {
    let dir = TempDir::new().unwrap();
    let ds = DatasetSpec {
        frames: 20,
        ..DatasetSpec::directions(4, 5)
    };
    let m = gen_dataset(&ds, dir.path()).unwrap();
    let cfg = PipelineConfig {
        workers: 1,
        ..PipelineConfig::desk()
    };
    let (model, report) = cmd_train(&m, Some(1), &cfg).unwrap();
    let secs = sections(&model.to_bytes().unwrap());
    let (k, r, p) = (cfg.codewords, cfg.root_out_dim(), cfg.part_out_dim());
    assert_eq!(
        secs,
        vec![(1, 32, 64), (2, p, 512), (3, k, r), (4, k, p), (5, 4, 2 * k * (r + p))]
    );
    assert_eq!(report.vector_len, cfg.clip_vector_len());
}

#[test]
fn training_on_the_test_set_memorises_it() {
    let dir = TempDir::new().unwrap();
    let ds = DatasetSpec {
        frames: 20,
        ..DatasetSpec::directions(3, 8)
    };
    let m = gen_dataset(&ds, dir.path()).unwrap();
    let cfg = PipelineConfig::desk();
    let (model, _) = cmd_train(&m, None, &cfg).unwrap();
    let r = cmd_eval(&m, None, &model, &cfg).unwrap();
    assert_eq!(r.accuracy, 1.0);
}

#[test]
fn too_few_features_names_the_required_count() {
    let dir = TempDir::new().unwrap();
    let ds = DatasetSpec {
        frames: 20,
        ..DatasetSpec::directions(1, 2)
    };
    let m = gen_dataset(&ds, dir.path()).unwrap();
    let mut cfg = PipelineConfig::desk();
    cfg.extract.features_per_clip = 3;
    match cmd_train(&m, None, &cfg) {
        Err(Error::Training(msg)) => assert!(msg.contains("65"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_rejects_a_model_with_other_classes() {
    let dir = TempDir::new().unwrap();
    let ds = DatasetSpec {
        frames: 20,
        ..DatasetSpec::directions(2, 4)
    };
    let three = DatasetSpec {
        classes: ds.classes[..3].to_vec(),
        ..ds.clone()
    };
    let m3 = gen_dataset(&three, &dir.path().join("a")).unwrap();
    let cfg = PipelineConfig::desk();
    let (model, _) = cmd_train(&m3, None, &cfg).unwrap();
    let m4: Manifest = gen_dataset(&ds, &dir.path().join("b")).unwrap();
    assert!(matches!(cmd_eval(&m4, None, &model, &cfg), Err(Error::Config(_))));
}
