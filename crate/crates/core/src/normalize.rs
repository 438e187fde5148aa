//! Per-band standardization fitted on a training set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::MultiBandImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    /// Mean and population standard deviation.
    Standard,
    /// Median and interquartile range.
    Robust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mode: NormalizationMode,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormalizationStats {
    pub fn bands(&self) -> usize {
        self.center.len()
    }

    /// Identity transform for `bands` bands.
    pub fn identity(bands: usize) -> Self {
        Self {
            mode: NormalizationMode::Standard,
            center: vec![0.0; bands],
            scale: vec![1.0; bands],
        }
    }

    fn check_bands(&self, bands: usize) -> Result<()> {
        if bands != self.bands() {
            return Err(Error::Dimension(format!(
                "normalization fitted on {} bands, input has {bands}",
                self.bands()
            )));
        }
        Ok(())
    }

    /// Normalizes a flat feature row in place (one "band" per feature).
    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        self.check_bands(row.len())?;
        for ((v, c), s) in row.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - c) / s;
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn stats_for(values: &mut [f64], mode: NormalizationMode) -> (f64, f64) {
    let (center, scale) = match mode {
        NormalizationMode::Standard => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        NormalizationMode::Robust => {
            values.sort_by(f64::total_cmp);
            let median = quantile_sorted(values, 0.5);
            let iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
            (median, iqr)
        }
    };
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    (center, scale)
}

/// Fits per-band statistics over every pixel of every image.
pub fn fit_normalization(images: &[MultiBandImage], mode: NormalizationMode) -> Result<NormalizationStats> {
    let first = images
        .first()
        .ok_or_else(|| Error::EmptyDataset("cannot fit normalization on zero images".into()))?;
    for img in images {
        first.check_same_shape(img)?;
    }
    let bands = first.channels();
    let mut center = Vec::with_capacity(bands);
    let mut scale = Vec::with_capacity(bands);
    let mut buf = Vec::with_capacity(images.len() * first.height() * first.width());
    for b in 0..bands {
        buf.clear();
        for img in images {
            buf.extend(img.band(b));
        }
        let (c, s) = stats_for(&mut buf, mode);
        center.push(c);
        scale.push(s);
    }
    Ok(NormalizationStats { mode, center, scale })
}

/// Fits statistics treating each column of `rows` as a band.
pub fn fit_feature_normalization(rows: &[Vec<f64>], mode: NormalizationMode) -> Result<NormalizationStats> {
    let dim = rows
        .first()
        .ok_or_else(|| Error::EmptyDataset("cannot fit normalization on zero rows".into()))?
        .len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("feature rows have unequal length".into()));
    }
    let mut center = Vec::with_capacity(dim);
    let mut scale = Vec::with_capacity(dim);
    let mut buf = Vec::with_capacity(rows.len());
    for d in 0..dim {
        buf.clear();
        buf.extend(rows.iter().map(|r| r[d]));
        let (c, s) = stats_for(&mut buf, mode);
        center.push(c);
        scale.push(s);
    }
    Ok(NormalizationStats { mode, center, scale })
}

/// `out[b] = (in[b] - center[b]) / scale[b]` for every pixel.
pub fn apply_normalization(img: &MultiBandImage, stats: &NormalizationStats) -> Result<MultiBandImage> {
    stats.check_bands(img.channels())?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(stats.bands()) {
        for ((v, c), s) in px.iter_mut().zip(&stats.center).zip(&stats.scale) {
            *v = (*v - c) / s;
        }
    }
    Ok(out)
}

/// Inverse of [`apply_normalization`].
pub fn invert_normalization(img: &MultiBandImage, stats: &NormalizationStats) -> Result<MultiBandImage> {
    stats.check_bands(img.channels())?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(stats.bands()) {
        for ((v, c), s) in px.iter_mut().zip(&stats.center).zip(&stats.scale) {
            *v = *v * s + c;
        }
    }
    Ok(out)
}
