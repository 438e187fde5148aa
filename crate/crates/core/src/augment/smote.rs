//! Offline minority oversampling with SSIM neighbourhoods.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::MultiBandImage;
use crate::rng::RngState;
use crate::ssim::ssim;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub n_syn: usize,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub beta_alpha: f64,
    pub beta_beta: f64,
    /// Compare each anchor against at most this many random candidates
    /// instead of the whole minority set.
    pub max_candidates: Option<usize>,
    /// Use this interpolation weight (still clipped) instead of sampling.
    pub fixed_lambda: Option<f64>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            n_syn: 1,
            clip_lo: 0.1,
            clip_hi: 0.9,
            beta_alpha: 2.0,
            beta_beta: 2.0,
            max_candidates: None,
            fixed_lambda: None,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Argument("k_neighbors must be positive".into()));
        }
        if self.n_syn == 0 {
            return Err(Error::Argument("n_syn must be positive".into()));
        }
        if !(0.0 <= self.clip_lo && self.clip_lo < self.clip_hi && self.clip_hi <= 1.0) {
            return Err(Error::Argument(format!(
                "clip bounds must satisfy 0 <= lo < hi <= 1, got [{}, {}]",
                self.clip_lo, self.clip_hi
            )));
        }
        if !(self.beta_alpha > 0.0 && self.beta_beta > 0.0) {
            return Err(Error::Argument("beta parameters must be positive".into()));
        }
        if let Some(m) = self.max_candidates {
            if m < self.k_neighbors {
                return Err(Error::Argument("max_candidates must be at least k_neighbors".into()));
            }
        }
        Ok(())
    }
}

/// Number of synthetics per anchor that brings `minority` closest to `majority`.
pub fn balancing_n_syn(minority: usize, majority: usize) -> usize {
    if minority == 0 || majority <= minority {
        return 0;
    }
    let deficit = (majority - minority) as f64;
    ((deficit / minority as f64).round() as usize).max(1)
}

pub fn clip_lambda(lambda: f64, lo: f64, hi: f64) -> f64 {
    lambda.clamp(lo, hi)
}

/// A generated image and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub image: MultiBandImage,
    /// Index of the anchor in the minority input.
    pub anchor: usize,
    /// Index of the interpolation partner in the minority input.
    pub neighbor: usize,
    /// Weight on the anchor after clipping.
    pub lambda: f64,
}

/// Indices of the `k` most similar images to `anchor`, most similar first.
/// Ties go to the lower index.
pub fn ssim_neighbors(
    minority: &[MultiBandImage],
    anchor: usize,
    k: usize,
    candidates: Option<&[usize]>,
) -> Result<Vec<usize>> {
    let all: Vec<usize>;
    let pool = match candidates {
        Some(c) => c,
        None => {
            all = (0..minority.len()).collect();
            &all
        }
    };
    let mut scored = Vec::with_capacity(pool.len());
    for &j in pool.iter().filter(|&&j| j != anchor) {
        scored.push((ssim(&minority[anchor], &minority[j])?, j));
    }
    if scored.len() < k {
        return Err(Error::InsufficientData(format!(
            "need {k} neighbours, only {} candidates",
            scored.len()
        )));
    }
    // Highest similarity = smallest SSIM distance 1 - SSIM.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, j)| j).collect())
}

/// `lambda * anchor + (1 - lambda) * neighbor`, held inside the parents' range.
pub fn interpolate(anchor: &MultiBandImage, neighbor: &MultiBandImage, lambda: f64) -> Result<MultiBandImage> {
    anchor.check_same_shape(neighbor)?;
    let data = anchor
        .data()
        .iter()
        .zip(neighbor.data())
        .map(|(&a, &n)| {
            let v = lambda * a + (1.0 - lambda) * n;
            v.clamp(a.min(n), a.max(n))
        })
        .collect();
    let (h, w, c) = anchor.shape();
    MultiBandImage::new(h, w, c, data)
}

/// Generates `minority.len() * cfg.n_syn` synthetic minority images.
///
/// For each anchor the `k_neighbors` highest-SSIM images are found; each
/// synthetic picks one of them uniformly and blends with a Beta-distributed
/// weight clipped to `[clip_lo, clip_hi]`.
pub fn smote_ssim(
    minority: &[MultiBandImage],
    cfg: &SmoteConfig,
    rng: &mut RngState,
) -> Result<Vec<SyntheticSample>> {
    cfg.validate()?;
    if minority.len() <= cfg.k_neighbors {
        return Err(Error::InsufficientData(format!(
            "SMOTE needs more than k = {} minority images, got {}",
            cfg.k_neighbors,
            minority.len()
        )));
    }
    for img in &minority[1..] {
        minority[0].check_same_shape(img)?;
    }
    let beta = Beta::new(cfg.beta_alpha, cfg.beta_beta)
        .map_err(|e| Error::Argument(format!("beta distribution: {e}")))?;

    let mut out = Vec::with_capacity(minority.len() * cfg.n_syn);
    for anchor in 0..minority.len() {
        let candidates: Option<Vec<usize>> = match cfg.max_candidates {
            Some(m) if m < minority.len() - 1 => {
                let others = minority.len() - 1;
                let mut picked: Vec<usize> = index::sample(rng, others, m)
                    .into_iter()
                    .map(|j| if j >= anchor { j + 1 } else { j })
                    .collect();
                picked.sort_unstable();
                Some(picked)
            }
            _ => None,
        };
        let neighbors = ssim_neighbors(minority, anchor, cfg.k_neighbors, candidates.as_deref())?;
        for _ in 0..cfg.n_syn {
            let neighbor = neighbors[rng.gen_range(0..neighbors.len())];
            let raw = match cfg.fixed_lambda {
                Some(l) => l,
                None => beta.sample(rng),
            };
            let lambda = clip_lambda(raw, cfg.clip_lo, cfg.clip_hi);
            out.push(SyntheticSample {
                image: interpolate(&minority[anchor], &minority[neighbor], lambda)?,
                anchor,
                neighbor,
                lambda,
            });
        }
    }
    Ok(out)
}
