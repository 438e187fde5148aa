//! RBF soft-margin SVM trained by SMO, and the embedding head built on it.

pub mod head;
pub mod kernel;
pub mod smo;

pub use head::{fit_head, logistic, signed_labels, SvmHead};
pub use kernel::{kernel_matrix, rbf_kernel};
pub use smo::{fit_smo, fit_smo_report, Gamma, SmoReport, SvmConfig, SvmModel};
