//! Gradient boundary histogram (GBH) action recognition: boundary fields,
//! integral-video histograms, local part model sampling, Fisher vector
//! encoding and one-vs-rest linear classification.

// `!(x > 0.0)` checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod boundary;
pub mod error;
pub mod formats;
pub mod fv;
pub mod integral;
pub mod lpm;
pub mod pipeline;
pub mod svm;
pub mod synth;
pub mod video;

pub use boundary::{Binning, BoundaryField, GradientField, VoteFrame};
pub use error::{Error, Result};
pub use formats::Model;
pub use fv::{ClipEncoding, EncodingModels, GmmModel, PcaModel};
pub use integral::{Cuboid, IntegralVideo};
pub use lpm::{DescriptorKind, ExtractConfig, LpmFeature};
pub use pipeline::{Manifest, ManifestEntry, PipelineConfig, StageTiming};
pub use svm::SvmModel;
pub use synth::{Background, DatasetSpec, MotionPattern, SceneSpec};
pub use video::{Clip, ClipFormat, Frame, RgbFrame};
