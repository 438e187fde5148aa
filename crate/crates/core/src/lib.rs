//! Imbalanced landslide classification from multi-band rasters.
//!
//! The crate covers the whole desk-scale pipeline: SSIM-guided SMOTE
//! oversampling, online CutMix/Mixup/color/geometric augmentation, a compact
//! CNN embedding backbone trained with a soft-label KL loss, an RBF-SVM head
//! trained by SMO, and stratified cross-validation with band occlusion.

pub mod augment;
pub mod config;
pub mod error;
pub mod eval;
pub mod image;
mod linalg;
pub mod manifest;
pub mod mbt;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod resize;
pub mod rng;
pub mod ssim;
pub mod svm;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use image::{MultiBandImage, SoftLabel};
pub use manifest::{DatasetManifest, ManifestRow};
pub use normalize::{apply_normalization, fit_normalization, NormalizationMode, NormalizationStats};
pub use pipeline::{fit_pipeline, HeadKind, LabeledImage, TrainedModel};
pub use resize::resize_bilinear;
pub use rng::RngState;
pub use ssim::ssim;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/oversampling.md")]
    mod oversampling {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/svm.md")]
    mod svm {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
