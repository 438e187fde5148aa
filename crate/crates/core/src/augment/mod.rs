//! Offline oversampling and online batch augmentation.

pub mod mix;
pub mod policy;
pub mod smote;

pub use mix::{cutmix, cutmix_with_rect, mixup, mixup_with_lambda, Mixed, Rect};
pub use policy::{apply_policy, AugmentPolicy};
pub use smote::{balancing_n_syn, smote_ssim, SmoteConfig, SyntheticSample};
