//! Stage schedule of the EfficientNetV2-Large backbone, kept as a shape
//! calculator rather than a trainable network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Conv,
    FusedMbconv,
    MbconvSe,
    /// 1×1 conv, average pool and fully connected classifier.
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub operator: Operator,
    pub kernel: usize,
    pub expand: Option<usize>,
    /// Stride of the first layer; the remaining layers use stride 1.
    pub stride: usize,
    pub out_channels: usize,
    pub num_layers: usize,
}

impl StageSpec {
    pub fn new(
        operator: Operator,
        kernel: usize,
        expand: Option<usize>,
        stride: usize,
        out_channels: usize,
        num_layers: usize,
    ) -> Self {
        Self {
            operator,
            kernel,
            expand,
            stride,
            out_channels,
            num_layers,
        }
    }

    /// Per-layer strides inside the stage.
    pub fn layer_strides(&self) -> Vec<usize> {
        (0..self.num_layers).map(|i| if i == 0 { self.stride } else { 1 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub stages: Vec<StageSpec>,
    pub input_channels: usize,
    pub input_size: usize,
}

impl BackboneConfig {
    /// The nine-stage EfficientNetV2-Large schedule.
    pub fn efficientnet_v2_large(input_channels: usize, input_size: usize) -> Self {
        use Operator::*;
        let stages = vec![
            StageSpec::new(Conv, 3, None, 2, 32, 1),
            StageSpec::new(FusedMbconv, 3, Some(1), 1, 32, 4),
            StageSpec::new(FusedMbconv, 3, Some(4), 2, 64, 7),
            StageSpec::new(FusedMbconv, 3, Some(4), 2, 96, 7),
            StageSpec::new(MbconvSe, 3, Some(4), 2, 192, 10),
            StageSpec::new(MbconvSe, 3, Some(6), 1, 224, 19),
            StageSpec::new(MbconvSe, 3, Some(6), 2, 384, 25),
            StageSpec::new(MbconvSe, 3, Some(6), 1, 640, 7),
            // The head has no stride of its own; it keeps the spatial size.
            StageSpec::new(Head, 1, None, 1, 1280, 1),
        ];
        Self {
            stages,
            input_channels,
            input_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.input_size == 0 {
            return Err(Error::Argument("backbone input must be non-empty".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !matches!(s.stride, 1 | 2) {
                return Err(Error::Argument(format!("stage {i}: stride {} not in {{1, 2}}", s.stride)));
            }
            if s.out_channels == 0 || s.num_layers == 0 || s.kernel == 0 {
                return Err(Error::Argument(format!("stage {i}: sizes must be positive")));
            }
        }
        Ok(())
    }

    pub fn total_layers(&self) -> usize {
        self.stages.iter().map(|s| s.num_layers).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageShape {
    pub stage: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Product of all strides up to and including this stage.
    pub downsample: usize,
}

/// Output shape after every stage, using "same" padding (`ceil(n / stride)`).
pub fn stage_shapes(cfg: &BackboneConfig) -> Result<Vec<StageShape>> {
    cfg.validate()?;
    let mut size = cfg.input_size;
    let mut downsample = 1;
    Ok(cfg
        .stages
        .iter()
        .enumerate()
        .map(|(stage, s)| {
            size = size.div_ceil(s.stride);
            downsample *= s.stride;
            StageShape {
                stage,
                height: size,
                width: size,
                channels: s.out_channels,
                downsample,
            }
        })
        .collect())
}
