//! PCA, GMM and improved Fisher-vector encoding of LPM features.

mod fisher;
mod gmm;
mod pca;

pub use fisher::{encode_clip, fisher_encode, improve, ClipEncoding, EncodingModels};
pub use gmm::{fit_gmm, fit_gmm_with, kmeans, GmmFit, GmmModel, GmmOptions};
pub use pca::{apply_pca, fit_pca, PcaModel};
