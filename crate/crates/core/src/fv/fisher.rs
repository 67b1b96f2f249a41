use super::gmm::GmmModel;
use super::pca::PcaModel;
use crate::error::{Error, Result};
use crate::lpm::LpmFeature;

/// Fisher vector of `features` w.r.t. the GMM means and variances,
/// laid out per component as `[d mu_k (dim), d sigma_k (dim)]`.
///
/// An empty feature set encodes to the zero vector.
pub fn fisher_encode<S: AsRef<[f64]>>(gmm: &GmmModel, features: &[S]) -> Result<Vec<f64>> {
    let (k, d) = (gmm.k(), gmm.dim());
    let mut out = vec![0.0; 2 * d * k];
    if features.is_empty() {
        log::warn!("Fisher encoding of an empty feature set");
        return Ok(out);
    }
    let sigmas: Vec<f64> = gmm.variances().iter().map(|v| v.sqrt()).collect();
    let norms = gmm.log_norms();
    let mut resp = vec![0.0; k];
    for f in features {
        let x = f.as_ref();
        gmm.check_dim(x)?;
        gmm.posterior_with(&norms, x, &mut resp);
        for (c, &g) in resp.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let mu = gmm.mean(c);
            let sd = &sigmas[c * d..(c + 1) * d];
            let (dm, ds) = out[2 * d * c..2 * d * (c + 1)].split_at_mut(d);
            for j in 0..d {
                let u = (x[j] - mu[j]) / sd[j];
                dm[j] += g * u;
                ds[j] += g * (u * u - 1.0);
            }
        }
    }
    let n = features.len() as f64;
    for c in 0..k {
        let w = gmm.weights()[c];
        let (dm, ds) = out[2 * d * c..2 * d * (c + 1)].split_at_mut(d);
        let a = 1.0 / (n * w.sqrt());
        let b = 1.0 / (n * (2.0 * w).sqrt());
        dm.iter_mut().for_each(|v| *v *= a);
        ds.iter_mut().for_each(|v| *v *= b);
    }
    Ok(out)
}

/// Signed square root followed by L2 normalisation (norms below 1e-12
/// are left unnormalised).
pub fn improve(fv: &mut [f64]) {
    for v in fv.iter_mut() {
        *v = v.signum() * v.abs().sqrt();
    }
    let norm = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= 1e-12 {
        fv.iter_mut().for_each(|v| *v /= norm);
    }
}

/// PCA and GMM models for the root and part channels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingModels {
    pub pca_root: PcaModel,
    pub pca_part: PcaModel,
    pub gmm_root: GmmModel,
    pub gmm_part: GmmModel,
}

impl EncodingModels {
    pub fn validate(&self) -> Result<()> {
        if self.pca_root.out_dim() != self.gmm_root.dim() || self.pca_part.out_dim() != self.gmm_part.dim() {
            return Err(Error::Config(format!(
                "PCA outputs ({}, {}) do not match GMM dims ({}, {})",
                self.pca_root.out_dim(),
                self.pca_part.out_dim(),
                self.gmm_root.dim(),
                self.gmm_part.dim()
            )));
        }
        Ok(())
    }

    pub fn root_fv_len(&self) -> usize {
        2 * self.gmm_root.dim() * self.gmm_root.k()
    }

    pub fn part_fv_len(&self) -> usize {
        2 * self.gmm_part.dim() * self.gmm_part.k()
    }

    pub fn clip_vector_len(&self) -> usize {
        self.root_fv_len() + self.part_fv_len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEncoding {
    pub vector: Vec<f64>,
    /// Set when the clip had no features and the vector is all zero.
    pub empty: bool,
}

/// Root and part channels are each projected, Fisher-encoded and improved,
/// then concatenated root first.
pub fn encode_clip(features: &[LpmFeature], models: &EncodingModels) -> Result<ClipEncoding> {
    models.validate()?;
    if features.is_empty() {
        return Ok(ClipEncoding {
            vector: vec![0.0; models.clip_vector_len()],
            empty: true,
        });
    }
    let channel = |pca: &PcaModel, gmm: &GmmModel, pick: &dyn Fn(&LpmFeature) -> &[f64]| -> Result<Vec<f64>> {
        let projected = features
            .iter()
            .map(|f| {
                pca.apply(pick(f)).map_err(|_| {
                    Error::Config(format!(
                        "feature dim {} does not match PCA input dim {}",
                        pick(f).len(),
                        pca.in_dim()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut fv = fisher_encode(gmm, &projected)?;
        improve(&mut fv);
        Ok(fv)
    };
    let mut vector = channel(&models.pca_root, &models.gmm_root, &|f| &f.root)?;
    vector.extend(channel(&models.pca_part, &models.gmm_part, &|f| &f.parts)?);
    Ok(ClipEncoding {
        vector,
        empty: false,
    })
}
