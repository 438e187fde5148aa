use std::fmt;
use std::path::{Path, PathBuf};

use slidenet::augment::{balancing_n_syn, smote_ssim, SmoteConfig};
use slidenet::eval::{cross_validate, export_embeddings, occlusion_importance, ConfusionCounts};
use slidenet::manifest::{DatasetManifest, ManifestRow};
use slidenet::pipeline::{fit_svm_head, minority_class, LabeledImage};
use slidenet::svm::{head as svm_file, Gamma, SvmConfig};
use slidenet::synth::{make_synth as generate, write_dataset, SynthConfig};
use slidenet::{fit_pipeline, mbt, Error, HeadKind, RngState, RunConfig, TrainedModel};

use crate::{ModelArgs, RunArgs};

pub enum CliError {
    /// Bad flags or configuration files.
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn lib_exit_code(e: &Error) -> u8 {
    match e {
        Error::Fold { source, .. } => lib_exit_code(source),
        Error::Numeric(_) => 4,
        Error::Argument(_) => 2,
        _ => 3,
    }
}

impl CliError {
    /// 2 usage or configuration, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => lib_exit_code(e),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn log(event: &str, fields: &[(&str, String)]) {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    eprintln!("{line}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Lib(Error::Io { path: dir.to_path_buf(), source: e }))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(path, contents).map_err(|e| CliError::Lib(Error::Io { path: path.to_path_buf(), source: e }))
}

pub fn resolve_config(run: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match (&run.config, run.benchmark) {
        (Some(p), _) => read_json::<RunConfig>(p)?,
        (None, true) => RunConfig::benchmark(),
        (None, false) => RunConfig::default(),
    };
    if let Some(v) = run.seed {
        cfg.seed = v;
    }
    if let Some(v) = run.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = run.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = run.lr {
        cfg.base_lr = v;
    }
    if let Some(v) = run.image_size {
        cfg.image_size = v;
    }
    if let Some(v) = &run.bands {
        cfg.bands = Some(v.clone());
    }
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn load(manifest: &Path) -> CliResult<(DatasetManifest, Vec<LabeledImage>)> {
    let m = DatasetManifest::read(manifest)?;
    let images = m.load_images()?;
    Ok((m, images))
}

fn split(m: &DatasetManifest, images: Vec<LabeledImage>, val_fold: Option<usize>) -> (Vec<LabeledImage>, Vec<LabeledImage>) {
    match val_fold {
        None => (images, Vec::new()),
        Some(f) => images.into_iter().zip(&m.rows).fold((Vec::new(), Vec::new()), |(mut tr, mut va), (img, row)| {
            if row.fold == Some(f) {
                va.push(img);
            } else {
                tr.push(img);
            }
            (tr, va)
        }),
    }
}

pub fn make_synth(
    out: &Path,
    config: Option<PathBuf>,
    seed: Option<u64>,
    samples: Option<usize>,
    size: Option<usize>,
    imbalance: Option<usize>,
) -> CliResult {
    let mut cfg = match config {
        Some(p) => read_json::<SynthConfig>(&p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(v) = samples {
        cfg.n_samples = v;
    }
    if let Some(v) = size {
        cfg.size = v;
    }
    if let Some(v) = imbalance {
        cfg.imbalance = v;
    }
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid generator configuration: {e}")))?;
    let data = generate(&cfg)?;
    let m = write_dataset(out, &data)?;
    let cfg_json = serde_json::to_string_pretty(&cfg).expect("synth config serializes");
    write_file(&out.join("synth.json"), cfg_json)?;
    log(
        "make-synth",
        &[
            ("samples", m.len().to_string()),
            ("positives", data.iter().filter(|s| s.label == 1).count().to_string()),
            ("manifest", out.join("manifest.csv").display().to_string()),
        ],
    );
    Ok(())
}

pub fn oversample(manifest: &Path, out: &Path, n_syn: Option<usize>, k: Option<usize>, run: &RunArgs) -> CliResult {
    let cfg = resolve_config(run)?;
    let (m, images) = load(manifest)?;
    let labels = m.labels();
    let (class, min_n, maj_n) = minority_class(&labels);
    let n_syn = n_syn.unwrap_or_else(|| balancing_n_syn(min_n, maj_n));
    let smote = SmoteConfig { n_syn, k_neighbors: k.unwrap_or(cfg.smote.k_neighbors), ..cfg.smote.clone() };
    smote.validate()?;
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    let minority: Vec<_> = members.iter().map(|&i| images[i].image.clone()).collect();
    let synthetic = smote_ssim(&minority, &smote, &mut RngState::new(cfg.seed))?;

    let syn_dir = out.join("synthetic");
    create_dir(&syn_dir)?;
    let mut result = DatasetManifest::new(out);
    for row in &m.rows {
        let abs = std::path::absolute(m.resolve(row)).map_err(|e| Error::Io { path: m.resolve(row), source: e })?;
        result.rows.push(ManifestRow { path: abs.display().to_string(), ..row.clone() });
    }
    for (t, s) in synthetic.iter().enumerate() {
        let id = format!("syn-{t:05}");
        let rel = format!("synthetic/{id}.mbt");
        mbt::write(out.join(&rel), &s.image)?;
        let mut row = ManifestRow::new(id, rel, class);
        row.anchor = Some(m.rows[members[s.anchor]].id.clone());
        row.neighbor = Some(m.rows[members[s.neighbor]].id.clone());
        row.lambda = Some(s.lambda);
        result.rows.push(row);
    }
    result.write(out.join("manifest.csv"))?;
    let counts = |l: u8| result.rows.iter().filter(|r| r.label == l).count().to_string();
    log(
        "oversample",
        &[("n_syn", n_syn.to_string()), ("synthetic", synthetic.len().to_string()), ("class0", counts(0)), ("class1", counts(1))],
    );
    Ok(())
}

fn metrics_csv(log: &[slidenet::model::EpochMetrics]) -> String {
    let mut s = String::from("epoch,lr,train_loss,train_f1,val_f1\n");
    for m in log {
        let val = m.val_f1.map_or(String::new(), |v| v.to_string());
        s.push_str(&format!("{},{},{},{},{}\n", m.epoch, m.lr, m.train_loss, m.train_f1, val));
    }
    s
}

fn log_epochs(fold: Option<usize>, entries: &[slidenet::model::EpochMetrics]) {
    for m in entries {
        let mut fields = Vec::new();
        if let Some(f) = fold {
            fields.push(("fold", f.to_string()));
        }
        fields.extend([
            ("epoch", m.epoch.to_string()),
            ("lr", m.lr.to_string()),
            ("train_loss", m.train_loss.to_string()),
            ("train_f1", m.train_f1.to_string()),
            ("val_f1", m.val_f1.map_or("-".into(), |v| v.to_string())),
        ]);
        log("epoch", &fields);
    }
}

pub fn train(manifest: &Path, out: &Path, val_fold: Option<usize>, run: &RunArgs) -> CliResult {
    let cfg = resolve_config(run)?;
    let (m, images) = load(manifest)?;
    let (train_set, val) = split(&m, images, val_fold);
    create_dir(out)?;
    write_file(&out.join("config.json"), cfg.to_json())?;
    let validation = if val.is_empty() { None } else { Some(val.as_slice()) };
    let fit = fit_pipeline(&train_set, validation, &cfg, &RngState::new(cfg.seed), false)?;
    log_epochs(None, &fit.log);
    fit.model.save_checkpoint(out.join("model.cnn"), fit.best_epoch)?;
    write_file(&out.join("metrics.csv"), metrics_csv(&fit.log))?;
    log(
        "train",
        &[
            ("samples", train_set.len().to_string()),
            ("synthetic", fit.synthetic.len().to_string()),
            ("best_epoch", fit.best_epoch.map_or("-".into(), |e| e.to_string())),
        ],
    );
    Ok(())
}

fn parse_gamma(s: &str) -> CliResult<Gamma> {
    if s == "auto" {
        return Ok(Gamma::Auto);
    }
    s.parse::<f64>().map(Gamma::Value).map_err(|_| CliError::Usage(format!("gamma must be a number or auto, got {s:?}")))
}

fn sweep_path(out: &Path, c: f64) -> PathBuf {
    let stem = out.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_c{c}.svm"))
}

pub fn fit_svm(checkpoint: &Path, manifest: &Path, out: &Path, cs: &[f64], gamma: &str, seed: u64, val_fold: Option<usize>) -> CliResult {
    let gamma = parse_gamma(gamma)?;
    if cs.is_empty() {
        return Err(CliError::Usage("need at least one C value".into()));
    }
    let model = TrainedModel::load_checkpoint(checkpoint)?;
    let (m, images) = load(manifest)?;
    let (train_set, val) = split(&m, images, val_fold);
    let x = train_set.iter().map(|s| model.preprocess.apply(&s.image)).collect::<Result<Vec<_>, _>>()?;
    let y: Vec<u8> = train_set.iter().map(|s| s.label).collect();
    let (score_set, split_name) = if val.is_empty() { (&train_set, "train") } else { (&val, "val") };
    let score_x = score_set.iter().map(|s| model.preprocess.apply(&s.image)).collect::<Result<Vec<_>, _>>()?;
    let score_y: Vec<u8> = score_set.iter().map(|s| s.label).collect();
    for &c in cs {
        let cfg = SvmConfig { c, gamma, ..SvmConfig::default() };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let head = fit_svm_head(&model, &x, &y, &cfg, &RngState::new(seed))?;
        let scored = TrainedModel { svm: Some(head.clone()), ..model.clone() };
        let pred = scored.predict_normalized(&score_x, HeadKind::Svm)?;
        let f1 = ConfusionCounts::from_predictions(&score_y, &pred).f1();
        let path = if cs.len() == 1 { out.to_path_buf() } else { sweep_path(out, c) };
        svm_file::save(&path, &head)?;
        log(
            "fit-svm",
            &[
                ("c", c.to_string()),
                ("gamma", head.model.gamma.to_string()),
                ("n_support", head.model.num_support().to_string()),
                ("split", split_name.into()),
                ("f1", f1.to_string()),
                ("model", path.display().to_string()),
            ],
        );
    }
    Ok(())
}

fn load_model(args: &ModelArgs) -> CliResult<(TrainedModel, HeadKind)> {
    let mut model = TrainedModel::load_checkpoint(&args.checkpoint)?;
    if let Some(p) = &args.svm {
        model.svm = Some(svm_file::load(p)?);
    }
    let head = args.head.unwrap_or(if model.svm.is_some() { HeadKind::Svm } else { HeadKind::Fc });
    if head == HeadKind::Svm && model.svm.is_none() {
        return Err(CliError::Usage("--head svm needs --svm".into()));
    }
    Ok((model, head))
}

pub fn evaluate(args: &ModelArgs, manifest: &Path) -> CliResult {
    let (model, head) = load_model(args)?;
    let (_, images) = load(manifest)?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("manifest has no rows".into()).into());
    }
    let raw: Vec<_> = images.iter().map(|s| s.image.clone()).collect();
    let pred = model.predict(&raw, head)?;
    let truth: Vec<u8> = images.iter().map(|s| s.label).collect();
    let c = ConfusionCounts::from_predictions(&truth, &pred);
    println!("tp={} fp={} fn={} tn={} f1={}", c.tp, c.fp, c.fn_, c.tn, c.f1());
    Ok(())
}

pub fn crossval(manifest: &Path, out: &Path, k: Option<usize>, global_smote: bool, run: &RunArgs) -> CliResult {
    let mut cfg = resolve_config(run)?;
    if let Some(k) = k {
        cfg.k_folds = k;
    }
    cfg.global_smote |= global_smote;
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    let (_, images) = load(manifest)?;
    create_dir(out)?;
    write_file(&out.join("config.json"), cfg.to_json())?;
    let cv = cross_validate(&images, &cfg)?;
    for (f, model) in cv.folds.iter().zip(&cv.models) {
        log_epochs(Some(f.fold), &f.log);
        model.save_checkpoint(out.join(format!("fold{}.cnn", f.fold)), f.best_epoch)?;
        if let Some(h) = &model.svm {
            svm_file::save(out.join(format!("fold{}.svm", f.fold)), h)?;
        }
        log(
            "fold",
            &[
                ("fold", f.fold.to_string()),
                ("best_epoch", f.best_epoch.map_or("-".into(), |e| e.to_string())),
                ("n_synthetic", f.n_synthetic.to_string()),
                ("leaked_synthetics", f.leaked_synthetics.to_string()),
                ("fc_f1", f.fc_f1().to_string()),
                ("svm_f1", f.svm_f1().to_string()),
            ],
        );
    }
    cv.save_csv(out.join("crossval.csv"))?;
    log("crossval", &[("mean_fc_f1", cv.mean_fc_f1().to_string()), ("mean_svm_f1", cv.mean_svm_f1().to_string())]);
    println!("mean_fc_f1={} mean_svm_f1={}", cv.mean_fc_f1(), cv.mean_svm_f1());
    Ok(())
}

pub fn occlusion(args: &ModelArgs, manifest: &Path, out: &Path, band_names: Option<Vec<String>>) -> CliResult {
    let (model, head) = load_model(args)?;
    let (_, images) = load(manifest)?;
    let positives: Vec<_> = images.into_iter().filter(|s| s.label == 1).map(|s| s.image).collect();
    let report = occlusion_importance(&model, &positives, head, band_names.as_deref())?;
    create_dir(out)?;
    report.save(out.join("occlusion.csv"), out.join("occlusion.svg"))?;
    log("occlusion", &[("images", report.n_images.to_string()), ("ranking", format!("{:?}", report.ranking()).replace(' ', ""))]);
    Ok(())
}

pub fn predict(args: &ModelArgs, manifest: &Path, out: &Path) -> CliResult {
    let (model, head) = load_model(args)?;
    let (_, images) = load(manifest)?;
    let raw: Vec<_> = images.iter().map(|s| s.image.clone()).collect();
    let pred = model.predict(&raw, head)?;
    let mut csv = String::from("id,label\n");
    for (s, p) in images.iter().zip(pred) {
        csv.push_str(&format!("{},{p}\n", s.id));
    }
    write_file(out, csv)
}

pub fn embed(checkpoint: &Path, manifest: &Path, out: &Path) -> CliResult {
    let model = TrainedModel::load_checkpoint(checkpoint)?;
    let (_, images) = load(manifest)?;
    export_embeddings(&model, &images, out)?;
    Ok(())
}
