//! Synthetic multi-band benchmark with a known class rule.
//!
//! Every image has Gaussian pixel noise and a per-band offset in each band,
//! plus one distractor blob in a random band outside the signal set.
//! Landslide images add a blob at one shared location in every signal band.
//! The optional dead band is identically zero.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::MultiBandImage;
use crate::manifest::{DatasetManifest, ManifestRow};
use crate::mbt;
use crate::pipeline::LabeledImage;
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Non-landslide images per landslide image.
    pub imbalance: usize,
    pub bands: usize,
    pub size: usize,
    pub signal_bands: Vec<usize>,
    pub dead_band: Option<usize>,
    pub noise_sigma: f64,
    /// Standard deviation of the per-image, per-band constant offset.
    pub offset_sigma: f64,
    pub blob_amplitude: f64,
    /// Blob radius range as fractions of the image side.
    pub blob_radius: [f64; 2],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_samples: 400,
            imbalance: 8,
            bands: 12,
            size: 64,
            signal_bands: vec![2, 5, 9],
            dead_band: Some(11),
            noise_sigma: 0.5,
            offset_sigma: 0.1,
            blob_amplitude: 1.5,
            blob_radius: [0.08, 0.16],
        }
    }
}

impl SynthConfig {
    pub fn n_positive(&self) -> usize {
        (self.n_samples as f64 / (self.imbalance as f64 + 1.0)).round() as usize
    }

    fn distractor_bands(&self) -> Vec<usize> {
        (0..self.bands).filter(|b| !self.signal_bands.contains(b) && Some(*b) != self.dead_band).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.bands == 0 || self.size < 8 {
            return Err(Error::Argument("need at least 2 samples, 1 band and 8×8 pixels".into()));
        }
        let pos = self.n_positive();
        if pos == 0 || pos >= self.n_samples {
            return Err(Error::Argument("imbalance leaves one class empty".into()));
        }
        if self.signal_bands.is_empty() || self.signal_bands.iter().any(|&b| b >= self.bands) {
            return Err(Error::Argument("signal bands must be non-empty and in range".into()));
        }
        if let Some(d) = self.dead_band {
            if d >= self.bands || self.signal_bands.contains(&d) {
                return Err(Error::Argument("dead band must be in range and carry no signal".into()));
            }
        }
        if self.distractor_bands().is_empty() {
            return Err(Error::Argument("no band left for distractors".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.offset_sigma >= 0.0 && self.blob_amplitude.is_finite()) {
            return Err(Error::Argument("noise and amplitude must be finite".into()));
        }
        let [r0, r1] = self.blob_radius;
        if !(r0 > 0.0 && r0 < r1) {
            return Err(Error::Argument("blob radius range must satisfy 0 < lo < hi".into()));
        }
        Ok(())
    }
}

fn add_blob(img: &mut MultiBandImage, band: usize, cy: f64, cx: f64, radius: f64, amp: f64) {
    let (h, w, c) = img.shape();
    let data = img.data_mut();
    for r in 0..h {
        for col in 0..w {
            let d2 = (r as f64 - cy).powi(2) + (col as f64 - cx).powi(2);
            data[(r * w + col) * c + band] += amp * (-d2 / (2.0 * radius * radius)).exp();
        }
    }
}

pub fn make_synth(cfg: &SynthConfig) -> Result<Vec<LabeledImage>> {
    cfg.validate()?;
    let mut rng = RngState::new(cfg.seed);
    let n_pos = cfg.n_positive();
    let mut labels: Vec<u8> = (0..cfg.n_samples).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let offset = Normal::new(0.0, cfg.offset_sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let distractors = cfg.distractor_bands();
    let s = cfg.size as f64;
    let (lo, hi) = (0.2 * s, 0.8 * s);

    let mut out = Vec::with_capacity(cfg.n_samples);
    for (i, &label) in labels.iter().enumerate() {
        let mut img = MultiBandImage::zeros(cfg.size, cfg.size, cfg.bands);
        let offsets: Vec<f64> = (0..cfg.bands).map(|_| offset.sample(&mut rng)).collect();
        for px in img.data_mut().chunks_exact_mut(cfg.bands) {
            for (b, v) in px.iter_mut().enumerate() {
                if Some(b) != cfg.dead_band {
                    *v = offsets[b] + noise.sample(&mut rng);
                }
            }
        }
        let band = distractors[rng.gen_range(0..distractors.len())];
        let (cy, cx) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        let radius = rng.gen_range(cfg.blob_radius[0]..cfg.blob_radius[1]) * s;
        add_blob(&mut img, band, cy, cx, radius, cfg.blob_amplitude);
        if label == 1 {
            let (cy, cx) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
            let radius = rng.gen_range(cfg.blob_radius[0]..cfg.blob_radius[1]) * s;
            for &b in &cfg.signal_bands {
                add_blob(&mut img, b, cy, cx, radius, cfg.blob_amplitude);
            }
        }
        out.push(LabeledImage { id: format!("synth-{i:04}"), image: img, label });
    }
    Ok(out)
}

/// Writes `images/<id>.mbt` files and `manifest.csv` under `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, samples: &[LabeledImage]) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let img_dir = dir.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut manifest = DatasetManifest::new(dir);
    for s in samples {
        let rel = format!("images/{}.mbt", s.id);
        mbt::write(dir.join(&rel), &s.image)?;
        manifest.rows.push(ManifestRow::new(s.id.clone(), rel, s.label));
    }
    manifest.write(dir.join("manifest.csv"))?;
    Ok(manifest)
}
