use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::crossval::sorted_mean;
use crate::error::{Error, Result};
use crate::image::MultiBandImage;
use crate::normalize::apply_normalization;
use crate::pipeline::{HeadKind, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandImportance {
    pub band: usize,
    pub name: Option<String>,
    /// `Σ (p_orig − p_occluded)` over the images.
    pub cumulative_drop: f64,
    pub mean_drop: f64,
    /// `Σ (1 − p_occluded)`, taking every original probability as 1.
    pub cumulative_drop_assume_one: f64,
    pub mean_drop_assume_one: f64,
    /// 1 for the largest mean drop.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionReport {
    pub head: HeadKind,
    /// Slope `a` of `σ(a·f)` when the SVM head is scored.
    pub logistic_scale: Option<f64>,
    pub n_images: usize,
    pub mean_p_orig: f64,
    /// Mean probability with every band zeroed.
    pub mean_p_all_zeroed: f64,
    /// Probability the model assigns to an all-zero raw image.
    pub zero_input_prior: f64,
    /// Sorted by rank.
    pub bands: Vec<BandImportance>,
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn probabilities(model: &TrainedModel, images: &[MultiBandImage], head: HeadKind) -> Result<Vec<f64>> {
    let x = images
        .iter()
        .map(|i| apply_normalization(i, &model.preprocess.normalization))
        .collect::<Result<Vec<_>>>()?;
    model.probabilities_normalized(&x, head)
}

/// Zeroes each input band in turn (after band selection and resize, before
/// normalization) and accumulates the drop in landslide probability.
pub fn occlusion_importance(
    model: &TrainedModel,
    images: &[MultiBandImage],
    head: HeadKind,
    band_names: Option<&[String]>,
) -> Result<OcclusionReport> {
    if images.is_empty() {
        return Err(Error::Argument("occlusion needs at least one image".into()));
    }
    let base = images.iter().map(|i| model.preprocess.geometry(i)).collect::<Result<Vec<_>>>()?;
    let channels = base[0].channels();
    if let Some(names) = band_names {
        if names.len() != channels {
            return Err(Error::Dimension(format!("{} band names for {channels} bands", names.len())));
        }
    }
    let n = images.len() as f64;
    let p_orig = probabilities(model, &base, head)?;

    let mut bands = Vec::with_capacity(channels);
    for b in 0..channels {
        let occluded: Vec<MultiBandImage> = base
            .iter()
            .map(|img| {
                let mut img = img.clone();
                img.zero_band(b);
                img
            })
            .collect();
        let p = probabilities(model, &occluded, head)?;
        let cumulative = sorted_sum(p_orig.iter().zip(&p).map(|(o, q)| o - q).collect());
        let assume_one = sorted_sum(p.iter().map(|q| 1.0 - q).collect());
        bands.push(BandImportance {
            band: b,
            name: band_names.map(|n| n[b].clone()),
            cumulative_drop: cumulative,
            mean_drop: cumulative / n,
            cumulative_drop_assume_one: assume_one,
            mean_drop_assume_one: assume_one / n,
            rank: 0,
        });
    }
    bands.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop).then(a.band.cmp(&b.band)));
    for (i, e) in bands.iter_mut().enumerate() {
        e.rank = i + 1;
    }

    let zeroed: Vec<MultiBandImage> =
        base.iter().map(|i| MultiBandImage::zeros(i.height(), i.width(), i.channels())).collect();
    let p_zero = probabilities(model, &zeroed, head)?;
    let raw_zero = MultiBandImage::zeros(images[0].height(), images[0].width(), images[0].channels());
    let prior = model.probabilities(&[raw_zero], head)?[0];
    Ok(OcclusionReport {
        head,
        logistic_scale: match head {
            HeadKind::Svm => model.svm.as_ref().map(|h| h.logistic_scale),
            HeadKind::Fc => None,
        },
        n_images: images.len(),
        mean_p_orig: sorted_mean(&p_orig),
        mean_p_all_zeroed: sorted_mean(&p_zero),
        zero_input_prior: prior,
        bands,
    })
}

impl OcclusionReport {
    /// Band indices from most to least important.
    pub fn ranking(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.band).collect()
    }

    pub fn band(&self, band: usize) -> Option<&BandImportance> {
        self.bands.iter().find(|b| b.band == band)
    }

    /// CSV with `#` metadata lines, one row per band, then an `all` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let head = match self.head {
            HeadKind::Fc => "fc",
            HeadKind::Svm => "svm",
        };
        writeln!(s, "# head={head}").unwrap();
        if let Some(a) = self.logistic_scale {
            writeln!(s, "# probability=logistic(a*f) a={a}").unwrap();
        }
        writeln!(s, "# n_images={} mean_p_orig={} zero_input_prior={}", self.n_images, self.mean_p_orig, self.zero_input_prior).unwrap();
        writeln!(s, "band,name,cumulative_drop,mean_drop,cumulative_drop_assume_one,mean_drop_assume_one,rank").unwrap();
        for b in &self.bands {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                b.band,
                b.name.as_deref().unwrap_or(""),
                b.cumulative_drop,
                b.mean_drop,
                b.cumulative_drop_assume_one,
                b.mean_drop_assume_one,
                b.rank
            )
            .unwrap();
        }
        let all = self.mean_p_orig - self.mean_p_all_zeroed;
        let n = self.n_images as f64;
        writeln!(s, "all,,{},{},{},{},", all * n, all, (1.0 - self.mean_p_all_zeroed) * n, 1.0 - self.mean_p_all_zeroed).unwrap();
        s
    }

    /// Horizontal bar chart of mean drop per band, in rank order.
    pub fn to_svg(&self) -> String {
        let bar_h = 18.0;
        let (left, width) = (90.0, 360.0);
        let height = 40.0 + bar_h * self.bands.len() as f64;
        let max = self.bands.iter().map(|b| b.mean_drop.abs()).fold(0.0, f64::max).max(1e-12);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#, left + width + 70.0).unwrap();
        writeln!(s, r#"<text x="{left}" y="14">mean drop in landslide probability</text>"#).unwrap();
        for (i, b) in self.bands.iter().enumerate() {
            let y = 24.0 + bar_h * i as f64;
            let w = (b.mean_drop.max(0.0) / max * width).max(0.0);
            let label = b.name.clone().unwrap_or_else(|| format!("band {}", b.band));
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, left - 6.0, y + 12.0).unwrap();
            writeln!(s, r##"<rect x="{left}" y="{y}" width="{w:.3}" height="{}" fill="#4a78a8"/>"##, bar_h - 4.0).unwrap();
            writeln!(s, r#"<text x="{}" y="{}">{:.4}</text>"#, left + w + 4.0, y + 12.0, b.mean_drop).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, csv_path: impl AsRef<Path>, svg_path: impl AsRef<Path>) -> Result<()> {
        let (c, v) = (csv_path.as_ref(), svg_path.as_ref());
        std::fs::write(c, self.to_csv()).map_err(|e| Error::io(c, e))?;
        std::fs::write(v, self.to_svg()).map_err(|e| Error::io(v, e))
    }
}
