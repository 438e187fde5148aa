use slidenet::eval::{cross_validate, embeddings_csv, occlusion_importance, sorted_mean};
use slidenet::synth::{make_synth, SynthConfig};
use slidenet::{fit_pipeline, HeadKind, LabeledImage, RngState, RunConfig};

fn small_data(n: usize) -> Vec<LabeledImage> {
    let cfg = SynthConfig {
        seed: 4,
        n_samples: n,
        imbalance: 3,
        bands: 4,
        size: 16,
        signal_bands: vec![1],
        dead_band: Some(3),
        ..SynthConfig::default()
    };
    make_synth(&cfg).unwrap()
}

fn quick_config() -> RunConfig {
    RunConfig { seed: 11, image_size: 16, epochs: 2, batch_size: 8, base_lr: 1e-2, k_folds: 2, ..RunConfig::default() }
}

#[test]
fn two_folds_on_four_samples() {
    let data: Vec<LabeledImage> = small_data(40)
        .into_iter()
        .scan((0, 0), |(neg, pos), s| {
            let keep = if s.label == 1 { *pos < 2 } else { *neg < 2 };
            if s.label == 1 { *pos += keep as usize } else { *neg += keep as usize }
            Some(keep.then_some(s))
        })
        .flatten()
        .collect();
    assert_eq!(data.len(), 4);
    let cfg = RunConfig { smote_balance: false, ..quick_config() };
    let cv = cross_validate(&data, &cfg).unwrap();
    assert_eq!(cv.folds.len(), 2);
    for f in &cv.folds {
        assert_eq!((f.n_train, f.n_val), (2, 2));
    }
}

#[test]
fn mean_is_the_arithmetic_mean_and_default_mode_does_not_leak() {
    let data = small_data(48);
    let cv = cross_validate(&data, &quick_config()).unwrap();
    let fc: Vec<f64> = cv.folds.iter().map(|f| f.fc_f1()).collect();
    let svm: Vec<f64> = cv.folds.iter().map(|f| f.svm_f1()).collect();
    assert!((cv.mean_fc_f1() - fc.iter().sum::<f64>() / 2.0).abs() <= 1e-15);
    assert!((cv.mean_svm_f1() - svm.iter().sum::<f64>() / 2.0).abs() <= 1e-15);
    assert_eq!(sorted_mean(&[0.25, 1.0, 0.5]), 1.75 / 3.0);
    for f in &cv.folds {
        assert!(f.n_synthetic > 0);
        assert_eq!(f.leaked_synthetics, 0);
        assert_eq!(f.n_train + f.n_val, 48);
    }
    let mut buf = Vec::new();
    cv.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
}

#[test]
fn global_oversampling_leaks_across_folds() {
    let data = small_data(40);
    let cfg = RunConfig { global_smote: true, ..quick_config() };
    let cv = cross_validate(&data, &cfg).unwrap();
    assert!(cv.folds.iter().map(|f| f.leaked_synthetics).sum::<usize>() > 0);
}

#[test]
fn band_with_zero_first_layer_weights_has_no_effect() {
    let data = small_data(40);
    let cfg = RunConfig { epochs: 1, ..quick_config() };
    let mut model = fit_pipeline(&data, None, &cfg, &RngState::new(2), true).unwrap().model;
    let w = model.net.param_mut("conv0.weight").unwrap();
    let (cin, cout) = (w.shape[2], w.shape[3]);
    for (i, v) in w.data.iter_mut().enumerate() {
        if (i / cout) % cin == 0 {
            *v = 0.0;
        }
    }
    let pos: Vec<_> = data.iter().filter(|s| s.label == 1).map(|s| s.image.clone()).collect();
    for head in [HeadKind::Fc, HeadKind::Svm] {
        let rep = occlusion_importance(&model, &pos, head, None).unwrap();
        assert_eq!(rep.band(0).unwrap().cumulative_drop, 0.0);
        assert_eq!(rep.band(3).unwrap().cumulative_drop, 0.0, "dead band");
        assert_eq!(rep.bands.len(), 4);
    }
}

#[test]
fn occlusion_ranking_ignores_image_order() {
    let data = small_data(40);
    let model = fit_pipeline(&data, None, &quick_config(), &RngState::new(3), true).unwrap().model;
    let mut pos: Vec<_> = data.iter().filter(|s| s.label == 1).map(|s| s.image.clone()).collect();
    let a = occlusion_importance(&model, &pos, HeadKind::Svm, None).unwrap();
    pos.reverse();
    let b = occlusion_importance(&model, &pos, HeadKind::Svm, None).unwrap();
    assert_eq!(a.ranking(), b.ranking());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn embedding_export_shape_and_stability() {
    let data = small_data(40);
    let model = fit_pipeline(&data, None, &quick_config(), &RngState::new(5), false).unwrap().model;
    let a = embeddings_csv(&model, &data).unwrap();
    assert_eq!(a.lines().count(), data.len() + 1);
    let header: Vec<&str> = a.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len() - 2, model.net.embed_dim());
    assert!(a.lines().skip(1).all(|l| l.split(',').count() == header.len()));
    assert_eq!(a, embeddings_csv(&model, &data).unwrap());
}
