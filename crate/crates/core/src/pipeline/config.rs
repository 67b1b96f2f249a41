use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpm::ExtractConfig;
use crate::svm::DEFAULT_C;

/// Pipeline settings. In TOML, extraction keys live in an `[extract]`
/// table and everything else at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub extract: ExtractConfig,
    /// GMM components per channel.
    pub codewords: usize,
    /// Root PCA output dim; half the descriptor dim when unset.
    pub root_pca_dim: Option<usize>,
    /// Part PCA output dim; an eighth of the part dim when unset.
    pub part_pca_dim: Option<usize>,
    pub whiten: bool,
    /// Features drawn from the training clips for PCA and GMM fitting.
    pub gmm_samples: usize,
    pub svm_c: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extract: ExtractConfig::default(),
            codewords: 128,
            root_pca_dim: None,
            part_pca_dim: None,
            whiten: false,
            gmm_samples: 150_000,
            svm_c: DEFAULT_C,
            seed: 1,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    /// Small settings for the bundled synthetic datasets: 500 features per
    /// clip, 16 codewords and 8-pixel minimal root patches.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.extract.features_per_clip = 500;
        c.extract.min_spatial = Some(8);
        c.codewords = 16;
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn root_dim(&self) -> usize {
        self.extract.descriptor_dim()
    }

    pub fn part_dim(&self) -> usize {
        crate::lpm::PARTS_PER_ROOT * self.extract.descriptor_dim()
    }

    pub fn root_out_dim(&self) -> usize {
        self.root_pca_dim.unwrap_or(self.root_dim() / 2)
    }

    pub fn part_out_dim(&self) -> usize {
        self.part_pca_dim.unwrap_or(self.part_dim() / 8)
    }

    /// Length of the encoded clip vector.
    pub fn clip_vector_len(&self) -> usize {
        2 * self.codewords * (self.root_out_dim() + self.part_out_dim())
    }

    pub fn validate(&self) -> Result<()> {
        self.extract.validate()?;
        if self.codewords == 0 {
            return Err(Error::Config("codewords must be positive".into()));
        }
        let (r, p) = (self.root_out_dim(), self.part_out_dim());
        if r == 0 || r > self.root_dim() || p == 0 || p > self.part_dim() {
            return Err(Error::Config(format!(
                "PCA dims ({r}, {p}) must lie in 1..={} and 1..={}",
                self.root_dim(),
                self.part_dim()
            )));
        }
        if !(self.svm_c > 0.0) {
            return Err(Error::Config("svm_c must be positive".into()));
        }
        if self.gmm_samples == 0 {
            return Err(Error::Config("gmm_samples must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpm::DescriptorKind;

    #[test]
    fn default_dimensions() {
        let c = PipelineConfig::default();
        assert_eq!((c.root_dim(), c.part_dim()), (64, 512));
        assert_eq!((c.root_out_dim(), c.part_out_dim()), (32, 64));
        assert_eq!(c.clip_vector_len(), 24576);
    }

    #[test]
    fn toml_round_trip_and_partial() {
        let c = PipelineConfig::desk();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let p = PipelineConfig::from_toml("codewords = 4\n[extract]\ndescriptor = \"hog\"\nsmooth = false\n").unwrap();
        assert_eq!(p.codewords, 4);
        assert_eq!(p.extract.descriptor, DescriptorKind::Hog);
        assert!(!p.extract.smooth);
        assert_eq!(p.extract.num_bins, 8);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(PipelineConfig::from_toml("codeword = 4").is_err());
        assert!(PipelineConfig::from_toml("[extract]\nbins = 4").is_err());
        assert!(PipelineConfig::from_toml("codewords = 0").is_err());
        assert!(PipelineConfig::from_toml("[extract]\nresolution_factor = 0.5").is_err());
    }
}
