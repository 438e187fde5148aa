//! Backbone schedule, compact trainable CNN, loss, optimizer and schedules.

pub mod adam;
pub mod backbone;
pub mod checkpoint;
pub mod cnn;
pub mod gradcheck;
pub mod loss;
pub mod schedule;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backbone::{stage_shapes, BackboneConfig, Operator, StageShape, StageSpec};
pub use cnn::{CnnConfig, CompactCnn, ForwardOutput, Inference, Param};
pub use gradcheck::gradient_check;
pub use loss::{kl_soft_loss, log_softmax, softmax};
pub use schedule::{lr_at, LrSchedule};
pub use train::{evaluate_f1, predict_class, train, EpochMetrics, TrainOptions, TrainOutcome};
