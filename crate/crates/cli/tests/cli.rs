use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn slidenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slidenet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = slidenet(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    slidenet(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 20 balanced 16×16 images.
fn toy(dir: &Path) -> PathBuf {
    let d = dir.join("data");
    ok(&["make-synth", "--out", s(&d), "--samples", "20", "--size", "16", "--imbalance", "1", "--seed", "3"]);
    d.join("manifest.csv")
}

#[test]
fn toy_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let manifest = toy(tmp.path());
    let run = tmp.path().join("run");
    ok(&[
        "train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "4", "--image-size", "16", "--batch-size", "4",
        "--seed", "1",
    ]);
    let ckpt = run.join("model.cnn");
    assert!(ckpt.is_file());
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    assert!(metrics.starts_with("epoch,lr,train_loss,train_f1,val_f1\n"));
    let echoed = slidenet::RunConfig::from_json(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!((echoed.epochs, echoed.image_size, echoed.seed), (4, 16, 1));

    let svm = run.join("head.svm");
    let out = ok(&["fit-svm", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&svm), "--c", "0.1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("c=0.1"));
    let head = slidenet::svm::head::load(&svm).unwrap();
    assert_eq!(head.model.c, 0.1);
    let bytes = std::fs::read(&svm).unwrap();
    assert!(String::from_utf8_lossy(&bytes).contains("\"c\":0.1"));

    let out = ok(&["evaluate", "--checkpoint", s(&ckpt), "--svm", s(&svm), "--manifest", s(&manifest)]);
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("tp="), "{line}");
    let counts: Vec<usize> = line.split_whitespace().take(4).map(|kv| kv.split('=').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.iter().sum::<usize>(), 20);

    let preds = tmp.path().join("preds.csv");
    ok(&["predict", "--checkpoint", s(&ckpt), "--svm", s(&svm), "--manifest", s(&manifest), "--out", s(&preds)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    assert!(text.starts_with("id,label\n"));
    assert_eq!(text.lines().count(), 21);

    let occ = tmp.path().join("occ");
    ok(&["occlusion", "--checkpoint", s(&ckpt), "--svm", s(&svm), "--manifest", s(&manifest), "--out", s(&occ)]);
    let csv = std::fs::read_to_string(occ.join("occlusion.csv")).unwrap();
    assert!(csv.contains("# head=svm") && csv.contains("a=1"));
    assert!(std::fs::read_to_string(occ.join("occlusion.svg")).unwrap().starts_with("<svg"));

    let emb = tmp.path().join("emb.csv");
    ok(&["embed", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&emb)]);
    let first = ok(&["embed", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&tmp.path().join("emb2.csv"))]);
    drop(first);
    let text = std::fs::read_to_string(&emb).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().next().unwrap().ends_with(",e_63"));
    assert_eq!(text, std::fs::read_to_string(tmp.path().join("emb2.csv")).unwrap());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn perfectly_fit_model_scores_one_on_its_training_set() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy(tmp.path());
    let run = tmp.path().join("run");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "2", "--image-size", "16", "--batch-size", "4"]);
    let svm = run.join("m.svm");
    ok(&["fit-svm", "--checkpoint", s(&run.join("model.cnn")), "--manifest", s(&manifest), "--out", s(&svm), "--c", "10"]);
    let preds = tmp.path().join("p.csv");
    ok(&["predict", "--checkpoint", s(&run.join("model.cnn")), "--svm", s(&svm), "--manifest", s(&manifest), "--out", s(&preds)]);
    let truth = slidenet::DatasetManifest::read(&manifest).unwrap();
    let text = std::fs::read_to_string(&preds).unwrap();
    let predicted: Vec<u8> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let c = slidenet::eval::ConfusionCounts::from_predictions(&truth.labels(), &predicted);
    assert_eq!(c.f1(), 1.0);
}

#[test]
fn zero_epochs_writes_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy(tmp.path());
    let run = tmp.path().join("run");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "0", "--image-size", "16"]);
    assert!(run.join("model.cnn").is_file());
    assert_eq!(std::fs::read_to_string(run.join("metrics.csv")).unwrap(), "epoch,lr,train_loss,train_f1,val_f1\n");
}

#[test]
fn svm_sweep_writes_one_model_per_c() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy(tmp.path());
    let run = tmp.path().join("run");
    ok(&["train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "1", "--image-size", "16", "--batch-size", "4"]);
    let out = ok(&[
        "fit-svm", "--checkpoint", s(&run.join("model.cnn")), "--manifest", s(&manifest), "--out", s(&run.join("m.svm")),
        "--c", "1.0,0.75,0.5,0.1",
    ]);
    let log = String::from_utf8(out.stderr).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("event=fit-svm") && l.contains(" f1=")).count(), 4);
    for c in ["1", "0.75", "0.5", "0.1"] {
        assert!(run.join(format!("m_c{c}.svm")).is_file(), "missing C = {c}");
    }
}

#[test]
fn oversampling_balances_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("synth.json");
    std::fs::write(&cfg, r#"{"n_samples": 800, "imbalance": 7, "bands": 3, "size": 8, "signal_bands": [0], "dead_band": null}"#).unwrap();
    let data = tmp.path().join("data");
    ok(&["make-synth", "--out", s(&data), "--config", s(&cfg)]);
    let manifest = data.join("manifest.csv");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = ok(&["oversample", "--manifest", s(&manifest), "--out", s(&a), "--n-syn", "6", "--seed", "5"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("class0=700 class1=700"));
    ok(&["oversample", "--manifest", s(&manifest), "--out", s(&b), "--n-syn", "6", "--seed", "5"]);
    let m = slidenet::DatasetManifest::read(a.join("manifest.csv")).unwrap();
    assert_eq!(m.rows.iter().filter(|r| r.is_synthetic()).count(), 600);
    for r in m.rows.iter().filter(|r| r.is_synthetic()) {
        assert!(r.lambda.is_some() && r.neighbor.is_some());
        assert_eq!(std::fs::read(a.join(&r.path)).unwrap(), std::fs::read(b.join(&r.path)).unwrap());
    }
    assert_eq!(code(&["oversample", "--manifest", s(&manifest), "--out", s(&a), "--n-syn", "0"]), 2);
}

#[test]
fn crossval_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy(tmp.path());
    let args = |out: &Path| {
        vec![
            "crossval".to_string(), "--manifest".into(), s(&manifest).into(), "--out".into(), s(out).into(), "--k".into(),
            "5".into(), "--seed".into(), "7".into(), "--epochs".into(), "2".into(), "--image-size".into(), "16".into(),
            "--batch-size".into(), "4".into(),
        ]
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let argv = args(out);
        ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let ca = std::fs::read_to_string(a.join("crossval.csv")).unwrap();
    assert_eq!(ca, std::fs::read_to_string(b.join("crossval.csv")).unwrap());
    assert_eq!(ca.lines().count(), 7);
    for f in 0..5 {
        let name = format!("fold{f}.cnn");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = toy(tmp.path());
    let m = s(&manifest);
    let out = tmp.path().join("o");
    let o = s(&out);

    assert_eq!(code(&["train", "--bogus-flag"]), 2);
    let bad_cfg = tmp.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"epochz": 3}"#).unwrap();
    assert_eq!(code(&["train", "--manifest", m, "--out", o, "--config", s(&bad_cfg)]), 2);
    assert_eq!(code(&["train", "--manifest", m, "--out", o, "--batch-size", "0"]), 2);

    assert_eq!(code(&["train", "--manifest", s(&tmp.path().join("missing.csv")), "--out", o]), 3);
    let empty = tmp.path().join("data/empty.csv");
    std::fs::write(&empty, "id,path,label\n").unwrap();
    ok(&["train", "--manifest", m, "--out", o, "--epochs", "0", "--image-size", "16"]);
    let ckpt = out.join("model.cnn");
    assert_eq!(code(&["evaluate", "--checkpoint", s(&ckpt), "--manifest", s(&empty)]), 3);

    let single = tmp.path().join("data/single.csv");
    let rows: String = std::fs::read_to_string(&manifest)
        .unwrap()
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || l.ends_with(",1,,,,"))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    assert!(rows.lines().count() > 2);
    std::fs::write(&single, rows).unwrap();
    assert_eq!(
        code(&["fit-svm", "--checkpoint", s(&ckpt), "--manifest", s(&single), "--out", s(&tmp.path().join("x.svm"))]),
        3
    );

    assert_eq!(
        code(&["train", "--manifest", m, "--out", o, "--epochs", "2", "--image-size", "16", "--batch-size", "4", "--lr", "1e300"]),
        4
    );
}
