//! End-to-end fit and scoring: band selection, resize, normalization,
//! optional SSIM-SMOTE balancing, CNN training and the SVM head.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{balancing_n_syn, smote_ssim};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::image::{MultiBandImage, SoftLabel};
use crate::model::{checkpoint, predict_class, softmax, train, CompactCnn, EpochMetrics, Inference, TrainOptions};
use crate::normalize::{apply_normalization, fit_normalization, NormalizationStats};
use crate::resize::resize_bilinear;
use crate::rng::RngState;
use crate::svm::{fit_head, SvmConfig, SvmHead};

/// Rows passed through the network at once during inference.
pub const INFER_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub image: MultiBandImage,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Fc,
    Svm,
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(HeadKind::Fc),
            "svm" => Ok(HeadKind::Svm),
            _ => Err(Error::Argument(format!("unknown head {s:?}, expected fc or svm"))),
        }
    }
}

/// Band selection and resize, applied before normalization.
pub fn geometry(img: &MultiBandImage, bands: Option<&[usize]>, size: usize) -> Result<MultiBandImage> {
    let img = match bands {
        Some(b) => img.select_bands(b)?,
        None => img.clone(),
    };
    if img.height() == size && img.width() == size {
        Ok(img)
    } else {
        resize_bilinear(&img, size, size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocess {
    pub bands: Option<Vec<usize>>,
    pub image_size: usize,
    pub normalization: NormalizationStats,
}

impl Preprocess {
    pub fn geometry(&self, img: &MultiBandImage) -> Result<MultiBandImage> {
        geometry(img, self.bands.as_deref(), self.image_size)
    }

    pub fn apply(&self, img: &MultiBandImage) -> Result<MultiBandImage> {
        apply_normalization(&self.geometry(img)?, &self.normalization)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub preprocess: Preprocess,
    pub net: CompactCnn,
    pub svm: Option<SvmHead>,
}

impl TrainedModel {
    /// Embeddings and FC logits of already normalized images.
    pub fn infer_normalized(&self, images: &[MultiBandImage]) -> Result<Inference> {
        self.net.infer(images, INFER_CHUNK)
    }

    pub fn embeddings(&self, raw: &[MultiBandImage]) -> Result<Vec<Vec<f64>>> {
        let x = raw.iter().map(|i| self.preprocess.apply(i)).collect::<Result<Vec<_>>>()?;
        Ok(self.infer_normalized(&x)?.0)
    }

    fn svm_head(&self) -> Result<&SvmHead> {
        self.svm.as_ref().ok_or_else(|| Error::Argument("model has no SVM head".into()))
    }

    /// Landslide probability of normalized images: FC softmax or `σ(a·f)`.
    pub fn probabilities_normalized(&self, images: &[MultiBandImage], head: HeadKind) -> Result<Vec<f64>> {
        let (emb, logits) = self.infer_normalized(images)?;
        match head {
            HeadKind::Fc => Ok(logits.into_iter().map(|l| softmax(l)[1]).collect()),
            HeadKind::Svm => {
                let h = self.svm_head()?;
                emb.iter().map(|e| h.probability(e)).collect()
            }
        }
    }

    pub fn predict_normalized(&self, images: &[MultiBandImage], head: HeadKind) -> Result<Vec<u8>> {
        let (emb, logits) = self.infer_normalized(images)?;
        match head {
            HeadKind::Fc => Ok(logits.into_iter().map(predict_class).collect()),
            HeadKind::Svm => {
                let h = self.svm_head()?;
                emb.iter().map(|e| h.predict(e)).collect()
            }
        }
    }

    pub fn probabilities(&self, raw: &[MultiBandImage], head: HeadKind) -> Result<Vec<f64>> {
        let x = raw.iter().map(|i| self.preprocess.apply(i)).collect::<Result<Vec<_>>>()?;
        self.probabilities_normalized(&x, head)
    }

    pub fn predict(&self, raw: &[MultiBandImage], head: HeadKind) -> Result<Vec<u8>> {
        let x = raw.iter().map(|i| self.preprocess.apply(i)).collect::<Result<Vec<_>>>()?;
        self.predict_normalized(&x, head)
    }

    /// Writes the network with its preprocessing in the checkpoint metadata.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>, epoch: Option<usize>) -> Result<()> {
        let meta = serde_json::json!({ "preprocess": self.preprocess, "epoch": epoch });
        checkpoint::save(path, &self.net, &meta)
    }

    /// Loads a network saved by [`TrainedModel::save_checkpoint`], without a head.
    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let (net, meta) = checkpoint::load(path)?;
        let preprocess = serde_json::from_value(meta["preprocess"].clone())
            .map_err(|e| Error::format("cnn metadata", format!("preprocess: {e}")))?;
        Ok(Self { preprocess, net, svm: None })
    }
}

/// Origin of a synthetic training image, as indices into the training slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub anchor: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub log: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    pub synthetic: Vec<Provenance>,
    /// Normalized training images (real then synthetic) with their labels.
    pub train_images: Vec<MultiBandImage>,
    pub train_labels: Vec<u8>,
}

/// The smaller class (landslide on a tie) and its size.
pub fn minority_class(labels: &[u8]) -> (u8, usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos <= neg {
        (1, pos, neg)
    } else {
        (0, neg, pos)
    }
}

/// Fits preprocessing and the CNN on `train`, then the SVM head on the
/// training embeddings when `with_svm` is set.
///
/// Random streams: `child(0)` SMOTE, `child(1)` weight init, `child(2)`
/// training, `child(3)` SMO.
pub fn fit_pipeline(
    train_set: &[LabeledImage],
    validation: Option<&[LabeledImage]>,
    cfg: &RunConfig,
    rng: &RngState,
    with_svm: bool,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    if let Some(s) = train_set.iter().find(|s| s.label > 1) {
        return Err(Error::Argument(format!("sample {} has label {}", s.id, s.label)));
    }
    let bands = cfg.bands.as_deref();
    let mut images = train_set
        .iter()
        .map(|s| geometry(&s.image, bands, cfg.image_size))
        .collect::<Result<Vec<_>>>()?;
    let mut labels: Vec<u8> = train_set.iter().map(|s| s.label).collect();
    let normalization = fit_normalization(&images, cfg.normalization)?;

    let mut synthetic = Vec::new();
    if cfg.smote_balance {
        let (class, min_n, maj_n) = minority_class(&labels);
        let n_syn = balancing_n_syn(min_n, maj_n);
        if n_syn > 0 {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let minority: Vec<MultiBandImage> = members.iter().map(|&i| images[i].clone()).collect();
            let smote_cfg = crate::augment::SmoteConfig { n_syn, ..cfg.smote.clone() };
            for s in smote_ssim(&minority, &smote_cfg, &mut rng.child(0))? {
                synthetic.push(Provenance { anchor: members[s.anchor], neighbor: members[s.neighbor], lambda: s.lambda });
                images.push(s.image);
                labels.push(class);
            }
        }
    }

    let images = images
        .iter()
        .map(|i| apply_normalization(i, &normalization))
        .collect::<Result<Vec<_>>>()?;
    let preprocess = Preprocess { bands: cfg.bands.clone(), image_size: cfg.image_size, normalization };
    let val = match validation {
        Some(v) => {
            let imgs = v.iter().map(|s| preprocess.apply(&s.image)).collect::<Result<Vec<_>>>()?;
            Some((imgs, v.iter().map(|s| s.label).collect::<Vec<u8>>()))
        }
        None => None,
    };

    let net = CompactCnn::new(cfg.cnn_config(images[0].channels()), &mut rng.child(1))?;
    let data: Vec<(MultiBandImage, SoftLabel)> =
        images.iter().zip(&labels).map(|(i, &l)| (i.clone(), SoftLabel::hard(l))).collect();
    let opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        schedule: cfg.lr_schedule(),
        policy: cfg.augment.clone(),
        adam: cfg.adam,
    };
    let outcome = train(
        net,
        &data,
        val.as_ref().map(|(i, l)| (i.as_slice(), l.as_slice())),
        &opts,
        &mut rng.child(2),
    )?;
    let mut model = TrainedModel { preprocess, net: outcome.net, svm: None };
    if with_svm {
        model.svm = Some(fit_svm_head(&model, &images, &labels, &cfg.svm, &rng.child(3))?);
    }
    Ok(FitOutcome {
        model,
        log: outcome.log,
        best_epoch: outcome.best_epoch,
        synthetic,
        train_images: images,
        train_labels: labels,
    })
}

/// SVM head on the embeddings of normalized images.
pub fn fit_svm_head(
    model: &TrainedModel,
    normalized: &[MultiBandImage],
    labels: &[u8],
    cfg: &SvmConfig,
    rng: &RngState,
) -> Result<SvmHead> {
    let (emb, _) = model.infer_normalized(normalized)?;
    fit_head(&emb, labels, cfg, &mut rng.clone())
}
