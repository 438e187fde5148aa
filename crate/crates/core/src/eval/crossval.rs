use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::metrics::ConfusionCounts;
use crate::augment::{balancing_n_syn, smote_ssim, SmoteConfig};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::EpochMetrics;
use crate::pipeline::{fit_pipeline, geometry, minority_class, HeadKind, LabeledImage, TrainedModel};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_synthetic: usize,
    pub best_epoch: Option<usize>,
    pub fc: ConfusionCounts,
    pub svm: ConfusionCounts,
    /// Synthetic images with a parent on the other side of the split.
    pub leaked_synthetics: usize,
    pub log: Vec<EpochMetrics>,
}

impl FoldReport {
    pub fn fc_f1(&self) -> f64 {
        self.fc.f1()
    }

    pub fn svm_f1(&self) -> f64 {
        self.svm.f1()
    }
}

#[derive(Debug, Clone)]
pub struct CrossvalOutcome {
    pub plan: FoldPlan,
    pub folds: Vec<FoldReport>,
    pub models: Vec<TrainedModel>,
}

/// Arithmetic mean, summed in ascending order.
pub fn sorted_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

impl CrossvalOutcome {
    pub fn mean_fc_f1(&self) -> f64 {
        sorted_mean(&self.folds.iter().map(FoldReport::fc_f1).collect::<Vec<_>>())
    }

    pub fn mean_svm_f1(&self) -> f64 {
        sorted_mean(&self.folds.iter().map(FoldReport::svm_f1).collect::<Vec<_>>())
    }

    /// `fold,n_train,...` one row per fold then a `mean` row.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "fold,n_train,n_val,n_synthetic,best_epoch,leaked_synthetics,fc_tp,fc_fp,fc_fn,fc_tn,fc_f1,svm_tp,svm_fp,svm_fn,svm_tn,svm_f1")?;
        for f in &self.folds {
            let best = f.best_epoch.map_or(String::new(), |e| e.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                f.fold, f.n_train, f.n_val, f.n_synthetic, best, f.leaked_synthetics,
                f.fc.tp, f.fc.fp, f.fc.fn_, f.fc.tn, f.fc_f1(),
                f.svm.tp, f.svm.fp, f.svm.fn_, f.svm.tn, f.svm_f1()
            )?;
        }
        writeln!(w, "mean,,,,,,,,,,{},,,,,{}", self.mean_fc_f1(), self.mean_svm_f1())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn counts(model: &TrainedModel, val: &[LabeledImage], head: HeadKind) -> Result<ConfusionCounts> {
    let x = val.iter().map(|s| model.preprocess.apply(&s.image)).collect::<Result<Vec<_>>>()?;
    let pred = model.predict_normalized(&x, head)?;
    let truth: Vec<u8> = val.iter().map(|s| s.label).collect();
    Ok(ConfusionCounts::from_predictions(&truth, &pred))
}

type Parents = Vec<Option<(usize, usize)>>;

/// Global SSIM-SMOTE over the whole dataset; synthetic rows carry the
/// dataset indices of their parents.
fn oversample_globally(
    data: &[LabeledImage],
    cfg: &RunConfig,
    rng: &mut RngState,
) -> Result<(Vec<LabeledImage>, Parents)> {
    let labels: Vec<u8> = data.iter().map(|s| s.label).collect();
    let (class, min_n, maj_n) = minority_class(&labels);
    let n_syn = balancing_n_syn(min_n, maj_n);
    let mut rows = data.to_vec();
    let mut parents = vec![None; data.len()];
    if n_syn == 0 {
        return Ok((rows, parents));
    }
    let members: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == class).collect();
    let minority = members
        .iter()
        .map(|&i| geometry(&data[i].image, cfg.bands.as_deref(), cfg.image_size))
        .collect::<Result<Vec<_>>>()?;
    let smote_cfg = SmoteConfig { n_syn, ..cfg.smote.clone() };
    for (t, s) in smote_ssim(&minority, &smote_cfg, rng)?.into_iter().enumerate() {
        let (a, b) = (members[s.anchor], members[s.neighbor]);
        rows.push(LabeledImage { id: format!("smote-{t}"), image: s.image, label: class });
        parents.push(Some((a, b)));
    }
    Ok((rows, parents))
}

/// Stratified k-fold evaluation of the full pipeline.
///
/// By default normalization and SMOTE are fitted inside each training fold.
/// With `cfg.global_smote` the whole dataset is oversampled first and the
/// synthetic images are split along with the real ones.
pub fn cross_validate(data: &[LabeledImage], cfg: &RunConfig) -> Result<CrossvalOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("cross-validation needs samples".into()));
    }
    let root = RngState::new(cfg.seed);
    let (rows, parents) = if cfg.global_smote {
        oversample_globally(data, cfg, &mut root.child(1_000))?
    } else {
        (data.to_vec(), vec![None; data.len()])
    };
    let labels: Vec<u8> = rows.iter().map(|s| s.label).collect();
    let plan = make_folds(&labels, cfg.k_folds, &mut root.child(1_001))?;
    let fold_cfg = RunConfig { smote_balance: cfg.smote_balance && !cfg.global_smote, ..cfg.clone() };

    let mut folds = Vec::with_capacity(cfg.k_folds);
    let mut models = Vec::with_capacity(cfg.k_folds);
    for fold in 0..cfg.k_folds {
        let run = || -> Result<(FoldReport, TrainedModel)> {
            let train_idx = plan.training(fold);
            let val_idx = plan.validation(fold);
            let train: Vec<LabeledImage> = train_idx.iter().map(|&i| rows[i].clone()).collect();
            let val: Vec<LabeledImage> = val_idx.iter().map(|&i| rows[i].clone()).collect();
            let out = fit_pipeline(&train, Some(&val), &fold_cfg, &root.child(fold as u64), true)?;

            // Parents of every synthetic, in dataset indices, checked against the split.
            let in_val = |i: usize| plan.assignment[i] == fold;
            let mut leaked = 0;
            for p in &out.synthetic {
                let (a, b) = (train_idx[p.anchor], train_idx[p.neighbor]);
                leaked += usize::from(in_val(a) || in_val(b));
            }
            for (i, p) in parents.iter().enumerate() {
                if let Some((a, b)) = *p {
                    leaked += usize::from(in_val(i) != in_val(a) || in_val(i) != in_val(b));
                }
            }
            let n_synthetic = out.synthetic.len() + train_idx.iter().filter(|&&i| parents[i].is_some()).count();
            let report = FoldReport {
                fold,
                n_train: train.len(),
                n_val: val.len(),
                n_synthetic,
                best_epoch: out.best_epoch,
                fc: counts(&out.model, &val, HeadKind::Fc)?,
                svm: counts(&out.model, &val, HeadKind::Svm)?,
                leaked_synthetics: leaked,
                log: out.log,
            };
            Ok((report, out.model))
        };
        let (report, model) = run().map_err(|e| Error::Fold { fold, source: Box::new(e) })?;
        folds.push(report);
        models.push(model);
    }
    Ok(CrossvalOutcome { plan, folds, models })
}
