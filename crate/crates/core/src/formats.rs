//! Binary feature dumps (`GBHF`) and model files (`GBHM`). All integers
//! are u32 LE, all reals f32 LE.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fv::{EncodingModels, GmmModel, PcaModel};
use crate::lpm::LpmFeature;
use crate::svm::SvmModel;

pub const FEATURE_MAGIC: &[u8; 4] = b"GBHF";
pub const MODEL_MAGIC: &[u8; 4] = b"GBHM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum SectionTag {
    PcaRoot = 1,
    PcaPart = 2,
    GmmRoot = 3,
    GmmPart = 4,
    Svm = 5,
}

impl SectionTag {
    fn from_u32(v: u32) -> Option<Self> {
        Some(match v {
            1 => Self::PcaRoot,
            2 => Self::PcaPart,
            3 => Self::GmmRoot,
            4 => Self::GmmPart,
            5 => Self::Svm,
            _ => return None,
        })
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_reals(buf: &mut Vec<u8>, vals: &[f64]) {
    for &v in vals {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "unexpected end of data at byte {} (need {n} more)",
                self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("section too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// One record of a feature dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub root: Vec<f64>,
    pub parts: Vec<f64>,
}

pub fn encode_features(features: &[LpmFeature], root_dim: usize, part_dim: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(16 + features.len() * (root_dim + part_dim) * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    put_u32(&mut buf, to_u32(features.len(), "feature count")?);
    put_u32(&mut buf, to_u32(root_dim, "root dim")?);
    put_u32(&mut buf, to_u32(part_dim, "part dim")?);
    for f in features {
        if f.root.len() != root_dim || f.parts.len() != part_dim {
            return Err(Error::Argument(format!(
                "feature dims ({}, {}) differ from dump dims ({root_dim}, {part_dim})",
                f.root.len(),
                f.parts.len()
            )));
        }
        put_reals(&mut buf, &f.root);
        put_reals(&mut buf, &f.parts);
    }
    Ok(buf)
}

pub fn decode_features(bytes: &[u8]) -> Result<Vec<FeatureRecord>> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != FEATURE_MAGIC {
        return Err(Error::Format("missing GBHF magic".into()));
    }
    let count = r.u32()? as usize;
    let root_dim = r.u32()? as usize;
    let part_dim = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let root = r.reals(root_dim)?;
        let parts = r.reals(part_dim)?;
        out.push(FeatureRecord { root, parts });
    }
    if !r.done() {
        return Err(Error::Format("trailing bytes after feature records".into()));
    }
    Ok(out)
}

pub fn write_features(path: &Path, features: &[LpmFeature], root_dim: usize, part_dim: usize) -> Result<()> {
    let bytes = encode_features(features, root_dim, part_dim)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRecord>> {
    decode_features(&std::fs::read(path)?)
}

/// Everything a trained pipeline needs at test time.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoding: EncodingModels,
    pub svm: SvmModel,
}

fn put_section(buf: &mut Vec<u8>, tag: SectionTag, d0: usize, d1: usize, payload: &[&[f64]]) -> Result<()> {
    put_u32(buf, tag as u32);
    put_u32(buf, to_u32(d0, "section dim")?);
    put_u32(buf, to_u32(d1, "section dim")?);
    for p in payload {
        put_reals(buf, p);
    }
    Ok(())
}

fn put_pca(buf: &mut Vec<u8>, tag: SectionTag, m: &PcaModel) -> Result<()> {
    put_section(buf, tag, m.out_dim(), m.in_dim(), &[m.mean(), m.basis()])
}

fn put_gmm(buf: &mut Vec<u8>, tag: SectionTag, m: &GmmModel) -> Result<()> {
    put_section(buf, tag, m.k(), m.dim(), &[m.weights(), m.means(), m.variances()])
}

fn read_pca(r: &mut Reader, out_dim: usize, in_dim: usize) -> Result<PcaModel> {
    let mean = r.reals(in_dim)?;
    let basis = r.reals(in_dim * out_dim)?;
    PcaModel::new(in_dim, out_dim, mean, basis).map_err(|e| Error::Format(format!("bad PCA section: {e}")))
}

fn read_gmm(r: &mut Reader, k: usize, dim: usize) -> Result<GmmModel> {
    let mut weights = r.reals(k)?;
    let means = r.reals(k * dim)?;
    let variances = r.reals(k * dim)?;
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    GmmModel::new(k, dim, weights, means, variances).map_err(|e| Error::Format(format!("bad GMM section: {e}")))
}

impl Model {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let e = &self.encoding;
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        put_u32(&mut buf, MODEL_VERSION);
        put_pca(&mut buf, SectionTag::PcaRoot, &e.pca_root)?;
        put_pca(&mut buf, SectionTag::PcaPart, &e.pca_part)?;
        put_gmm(&mut buf, SectionTag::GmmRoot, &e.gmm_root)?;
        put_gmm(&mut buf, SectionTag::GmmPart, &e.gmm_part)?;
        let s = &self.svm;
        put_section(
            &mut buf,
            SectionTag::Svm,
            s.num_classes(),
            s.dim(),
            &[&[s.c()], s.biases(), s.weights()],
        )?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Format("missing GBHM magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let (mut pca_root, mut pca_part, mut gmm_root, mut gmm_part, mut svm) = (None, None, None, None, None);
        while !r.done() {
            let raw = r.u32()?;
            let tag = SectionTag::from_u32(raw).ok_or_else(|| Error::Format(format!("unknown section tag {raw}")))?;
            let d0 = r.u32()? as usize;
            let d1 = r.u32()? as usize;
            match tag {
                SectionTag::PcaRoot => pca_root = Some(read_pca(&mut r, d0, d1)?),
                SectionTag::PcaPart => pca_part = Some(read_pca(&mut r, d0, d1)?),
                SectionTag::GmmRoot => gmm_root = Some(read_gmm(&mut r, d0, d1)?),
                SectionTag::GmmPart => gmm_part = Some(read_gmm(&mut r, d0, d1)?),
                SectionTag::Svm => {
                    let c = r.reals(1)?[0];
                    let biases = r.reals(d0)?;
                    let weights = r.reals(d0 * d1)?;
                    svm = Some(
                        SvmModel::new(d0, d1, c, weights, biases)
                            .map_err(|e| Error::Format(format!("bad SVM section: {e}")))?,
                    );
                }
            }
        }
        let missing = |name: &str| Error::Format(format!("model file has no {name} section"));
        let encoding = EncodingModels {
            pca_root: pca_root.ok_or_else(|| missing("PCA_ROOT"))?,
            pca_part: pca_part.ok_or_else(|| missing("PCA_PART"))?,
            gmm_root: gmm_root.ok_or_else(|| missing("GMM_ROOT"))?,
            gmm_part: gmm_part.ok_or_else(|| missing("GMM_PART"))?,
        };
        encoding.validate()?;
        let svm = svm.ok_or_else(|| missing("SVM"))?;
        if svm.dim() != encoding.clip_vector_len() {
            return Err(Error::Format(format!(
                "SVM dim {} does not match encoding length {}",
                svm.dim(),
                encoding.clip_vector_len()
            )));
        }
        Ok(Self { encoding, svm })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Encoding models exactly as they come back from a model file, so that
/// training-time encodings match test-time encodings bit for bit.
pub fn quantize_encoding(e: &EncodingModels) -> Result<EncodingModels> {
    let mut buf = Vec::new();
    put_pca(&mut buf, SectionTag::PcaRoot, &e.pca_root)?;
    put_pca(&mut buf, SectionTag::PcaPart, &e.pca_part)?;
    put_gmm(&mut buf, SectionTag::GmmRoot, &e.gmm_root)?;
    put_gmm(&mut buf, SectionTag::GmmPart, &e.gmm_part)?;
    let mut r = Reader::new(&buf);
    let next = |r: &mut Reader| -> Result<(usize, usize)> {
        r.u32()?;
        Ok((r.u32()? as usize, r.u32()? as usize))
    };
    let (a, b) = next(&mut r)?;
    let pca_root = read_pca(&mut r, a, b)?;
    let (a, b) = next(&mut r)?;
    let pca_part = read_pca(&mut r, a, b)?;
    let (a, b) = next(&mut r)?;
    let gmm_root = read_gmm(&mut r, a, b)?;
    let (a, b) = next(&mut r)?;
    let gmm_part = read_gmm(&mut r, a, b)?;
    Ok(EncodingModels {
        pca_root,
        pca_part,
        gmm_root,
        gmm_part,
    })
}
