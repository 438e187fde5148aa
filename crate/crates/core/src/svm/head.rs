//! SVM head over backbone embeddings and its `.svm` container.
//!
//! Layout: ASCII `SVM1`, a `u32` little-endian header length, UTF-8 JSON
//! header, then the `M × D` support-vector matrix and the `M` dual
//! coefficients as little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::smo::{fit_smo, SvmConfig, SvmModel};
use crate::error::{Error, Result};
use crate::normalize::{fit_feature_normalization, NormalizationMode, NormalizationStats};
use crate::rng::RngState;

pub const MAGIC: &[u8; 4] = b"SVM1";

/// Standardization plus kernel machine, mapping an embedding to a landslide score.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmHead {
    pub normalization: NormalizationStats,
    pub model: SvmModel,
    /// Slope `a` of the score-to-probability map `σ(a·f)`.
    pub logistic_scale: f64,
}

impl SvmHead {
    pub fn standardize(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        let mut row = embedding.to_vec();
        self.normalization.apply_row(&mut row)?;
        Ok(row)
    }

    pub fn decision(&self, embedding: &[f64]) -> Result<f64> {
        self.model.decision(&self.standardize(embedding)?)
    }

    /// Dataset label: `1` for landslide when `f ≥ 0`.
    pub fn predict(&self, embedding: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(embedding)? >= 0.0))
    }

    pub fn probability(&self, embedding: &[f64]) -> Result<f64> {
        Ok(logistic(self.logistic_scale * self.decision(embedding)?))
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Maps dataset labels `{0, 1}` to SVM labels `{-1, +1}`.
pub fn signed_labels(labels: &[u8]) -> Result<Vec<i8>> {
    labels
        .iter()
        .map(|&l| match l {
            0 => Ok(-1),
            1 => Ok(1),
            other => Err(Error::Argument(format!("label {other} is not 0 or 1"))),
        })
        .collect()
}

/// Standardizes the embeddings, fits SMO, and stores the model at `f32`
/// precision so that a saved head reproduces its decisions exactly.
pub fn fit_head(embeddings: &[Vec<f64>], labels: &[u8], cfg: &SvmConfig, rng: &mut RngState) -> Result<SvmHead> {
    cfg.validate()?;
    if embeddings.len() != labels.len() {
        return Err(Error::Dimension(format!("{} embeddings but {} labels", embeddings.len(), labels.len())));
    }
    let y = signed_labels(labels)?;
    let normalization = fit_feature_normalization(embeddings, NormalizationMode::Standard)?;
    let x = embeddings
        .iter()
        .map(|e| {
            let mut row = e.clone();
            normalization.apply_row(&mut row).map(|_| row)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = quantize(fit_smo(&x, &y, cfg, rng)?);
    Ok(SvmHead { normalization, model, logistic_scale: 1.0 })
}

fn quantize(mut m: SvmModel) -> SvmModel {
    let cap = m.c as f32;
    let cap = if cap as f64 > m.c { cap.next_down() } else { cap };
    for sv in &mut m.support_vectors {
        for v in sv.iter_mut() {
            *v = *v as f32 as f64;
        }
    }
    for coef in &mut m.dual_coefs {
        *coef = (*coef as f32).clamp(-cap, cap) as f64;
    }
    m
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    gamma: f64,
    c: f64,
    bias: f64,
    n_support: usize,
    dim: usize,
    logistic_scale: f64,
    normalization: NormalizationStats,
}

pub fn encode(head: &SvmHead) -> Result<Vec<u8>> {
    let m = &head.model;
    let dim = head.normalization.bands();
    if m.support_vectors.iter().any(|sv| sv.len() != dim) {
        return Err(Error::Dimension("support vectors do not match the normalization width".into()));
    }
    let header = Header {
        gamma: m.gamma,
        c: m.c,
        bias: m.bias,
        n_support: m.num_support(),
        dim,
        logistic_scale: head.logistic_scale,
        normalization: head.normalization.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format("svm header", e.to_string()))?;
    let mut out = Vec::with_capacity(8 + json.len() + 4 * m.num_support() * (dim + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in m.support_vectors.iter().flatten().chain(&m.dual_coefs) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<SvmHead> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format("svm", "missing SVM1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(Error::format("svm", "truncated header"));
    }
    let h: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| Error::format("svm header", e.to_string()))?;
    if h.normalization.bands() != h.dim {
        return Err(Error::format("svm", "normalization width differs from dim"));
    }
    let payload = &body[hlen..];
    let want = 4 * h.n_support * (h.dim + 1);
    if payload.len() != want {
        return Err(Error::format("svm", format!("payload is {} bytes, expected {want}", payload.len())));
    }
    let vals: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let (svs, coefs) = vals.split_at(h.n_support * h.dim);
    let support_vectors = if h.dim == 0 { vec![Vec::new(); h.n_support] } else { svs.chunks(h.dim).map(<[f64]>::to_vec).collect() };
    Ok(SvmHead {
        normalization: h.normalization,
        model: SvmModel {
            support_vectors,
            dual_coefs: coefs.to_vec(),
            bias: h.bias,
            gamma: h.gamma,
            c: h.c,
        },
        logistic_scale: h.logistic_scale,
    })
}

pub fn save(path: impl AsRef<Path>, head: &SvmHead) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(head)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<SvmHead> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::Gamma;

    fn toy() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![100.0 + (t * 0.7).sin() * 3.0, (t * 1.3).cos(), if i % 4 == 0 { 5.0 } else { -5.0 }]
            })
            .collect();
        let y = (0..40).map(|i| u8::from(i % 4 == 0)).collect();
        (x, y)
    }

    #[test]
    fn separable_embeddings_fit_perfectly() {
        let (x, y) = toy();
        let head = fit_head(&x, &y, &SvmConfig::with_c(1.0), &mut RngState::new(4)).unwrap();
        for (e, &l) in x.iter().zip(&y) {
            assert_eq!(head.predict(e).unwrap(), l);
        }
        assert!(head.model.dual_coefs.iter().all(|c| c.abs() <= head.model.c));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let (x, y) = toy();
        let cfg = SvmConfig { c: 0.1, gamma: Gamma::Auto, ..SvmConfig::default() };
        let head = fit_head(&x, &y, &cfg, &mut RngState::new(5)).unwrap();
        let back = decode(&encode(&head).unwrap()).unwrap();
        assert_eq!(back, head);
        for e in &x {
            assert_eq!(back.decision(e).unwrap().to_bits(), head.decision(e).unwrap().to_bits());
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.svm");
        save(&p, &head).unwrap();
        assert_eq!(load(&p).unwrap(), head);
    }

    #[test]
    fn corrupt_files_rejected() {
        let (x, y) = toy();
        let head = fit_head(&x, &y, &SvmConfig::default(), &mut RngState::new(5)).unwrap();
        let bytes = encode(&head).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
        assert!((logistic(2.0) + logistic(-2.0) - 1.0).abs() < 1e-15);
    }
}
