//! Metrics, fold planning, cross-validation, occlusion and embedding export.

pub mod crossval;
pub mod export;
pub mod folds;
pub mod metrics;
pub mod occlusion;

pub use crossval::{cross_validate, sorted_mean, CrossvalOutcome, FoldReport};
pub use export::{embeddings_csv, export_embeddings};
pub use folds::{make_folds, FoldPlan};
pub use metrics::{f1, ConfusionCounts};
pub use occlusion::{occlusion_importance, BandImportance, OcclusionReport};
