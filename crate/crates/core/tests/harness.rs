use std::f64::consts::{FRAC_PI_2, PI};

use phaser::harness::eval::{evaluate_logits, metrics_csv, MetricsRow};
use phaser::harness::experiments::{
    discrepancy_test_with, run_experiment, semantic_preservation_test, semantic_preservation_test_with,
    ExperimentConfig, ScenarioSplit, Variant,
};
use phaser::harness::io::{decode_csv, decode_tsds, encode_csv, encode_tsds, read_dataset, write_dataset};
use phaser::harness::synth::{
    shifted_domains_spec, sinusoid_spec, synth_generate, ClassCoding, DomainSpec, SynthSpec,
};
use phaser::harness::train::{train, validation_split, TrainConfig, TrainingSet};
use phaser::stationarity::{dataset_adf_summary, LagOrder};
use phaser::{Error, LabeledDataset, PhaserConfig, PhaserModel};
use proptest::prelude::*;

fn quick_cfg(epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.train.max_epochs = epochs;
    cfg
}

fn noise_spec(slope: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        variates: 1,
        length: 500,
        sample_rate_hz: 100.0,
        domains: vec![DomainSpec::trend(0, 500, 0.0, slope, 1.0, 0.0).unwrap()],
        coding: ClassCoding::Frequency { bins: vec![5, 9] },
        tone_amplitude: 0.0,
        samples_per_class: 10,
        phase_jitter: 0.0,
        seed,
    }
}

#[test]
fn white_noise_is_strongly_stationary() {
    let ds = synth_generate(&noise_spec(0.0, 3)).unwrap();
    let summary = dataset_adf_summary(&ds, LagOrder::Fixed(1)).unwrap();
    assert!(summary[0] < -10.0, "{summary:?}");
}

#[test]
fn trend_raises_adf_statistic() {
    for seed in 0..5 {
        let flat = dataset_adf_summary(&synth_generate(&noise_spec(0.0, seed)).unwrap(), LagOrder::Fixed(1)).unwrap();
        let trend = dataset_adf_summary(&synth_generate(&noise_spec(0.05, seed)).unwrap(), LagOrder::Fixed(1)).unwrap();
        assert!(trend[0] > flat[0], "seed {seed}: {} vs {}", trend[0], flat[0]);
    }
}

#[test]
fn strictly_monotone_trend_has_no_period() {
    let d = DomainSpec::trend(0, 200, 1.0, 0.01, 1.0, 0.0).unwrap();
    let mu = &d.track.mu;
    for lag in 1..mu.len() {
        assert!((0..mu.len() - lag).all(|t| mu[t + lag] != mu[t]));
    }
}

#[test]
fn tsds_and_csv_round_trip() {
    let ds = synth_generate(&shifted_domains_spec(2, 32, 3, 3, 2, 5).unwrap()).unwrap();
    let back = decode_tsds(&encode_tsds(&ds).unwrap(), "synth").unwrap();
    // payloads are f32
    for (a, b) in ds.samples().iter().zip(back.samples()) {
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| (*x as f32) as f64 == *y));
    }
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.domains(), ds.domains());

    let from_csv = decode_csv(&encode_csv(&back).unwrap(), "synth", back.sample_rate_hz().unwrap(), Some(3)).unwrap();
    assert_eq!(from_csv, back);

    let dir = tempfile::tempdir().unwrap();
    for name in ["d.tsds", "d.csv"] {
        let path = dir.path().join(name);
        write_dataset(&path, &back).unwrap();
        let read = read_dataset(&path).unwrap();
        assert_eq!(read.samples().len(), back.len());
        assert_eq!(read.labels(), back.labels());
        assert_eq!(read.domains(), back.domains());
    }
}

#[test]
fn corrupt_files_give_distinct_errors() {
    let ds = synth_generate(&sinusoid_spec(1, 16, 2, 2, 0.0, 1).unwrap()).unwrap();
    let bytes = encode_tsds(&ds).unwrap();

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_tsds(&bad, "x"), Err(Error::BadMagic { .. })));
    assert!(matches!(decode_tsds(&bytes[..bytes.len() - 3], "x"), Err(Error::Truncated(_))));

    // the first record's label sits right after the fixed-size header
    let header = bytes.len() - ds.len() * (8 + 16 * 4);
    let mut bad = bytes.clone();
    bad[header..header + 4].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(
        decode_tsds(&bad, "x"),
        Err(Error::LabelOutOfRange { sample: 0, label: 7, .. })
    ));
}

#[test]
fn evaluation_of_fixed_predictors() {
    let labels: Vec<usize> = (0..60).map(|i| i % 6).collect();
    let onehot = |c: usize| (0..6).map(|k| if k == c { 5.0 } else { 0.0 }).collect::<Vec<f64>>();

    let perfect: Vec<Vec<f64>> = labels.iter().map(|&c| onehot(c)).collect();
    let e = evaluate_logits(&perfect, &labels, 6).unwrap();
    assert_eq!(e.accuracy, 1.0);

    let constant: Vec<Vec<f64>> = labels.iter().map(|_| onehot(2)).collect();
    let e = evaluate_logits(&constant, &labels, 6).unwrap();
    assert!((e.accuracy - 1.0 / 6.0).abs() < 1e-15);
    let trace: usize = (0..6).map(|k| e.confusion[k][k]).sum();
    let total: usize = e.confusion.iter().flatten().sum();
    assert_eq!(trace as f64 / total as f64, e.accuracy);
    assert_eq!(e.per_class[2], 1.0);
    assert_eq!(e.per_class[0], 0.0);
}

#[test]
fn zero_epochs_leave_parameters_untouched() {
    let ds = synth_generate(&sinusoid_spec(2, 64, 2, 4, 0.0, 2).unwrap()).unwrap();
    let model = PhaserModel::build(&PhaserConfig::new(2, 1, 16, 8, 2, 4)).unwrap();
    let before = model.named_tensors();
    let cfg = TrainConfig {
        max_epochs: 0,
        ..TrainConfig::default()
    };
    let out = train(model, &TrainingSet::from(&ds), &cfg).unwrap();
    assert_eq!(out.model.named_tensors(), before);
    assert!(out.history.is_empty());
    assert!(out.best_epoch.is_none());
}

#[test]
fn separable_task_is_learned() {
    let ds = synth_generate(&sinusoid_spec(2, 64, 2, 20, 0.0, 8).unwrap()).unwrap();
    let set = TrainingSet::from(&ds);
    for seed in [1, 2, 3] {
        let cfg = TrainConfig {
            max_epochs: 40,
            batch_size: 8,
            patience: 10,
            seed,
            ..TrainConfig::default()
        };
        let model = PhaserModel::build(&PhaserConfig::new(2, 1, 16, 8, 2, seed)).unwrap();
        let out = train(model, &set, &cfg).unwrap();
        let checkpoint = out.validation.unwrap();
        assert!(checkpoint.accuracy > 0.95, "seed {seed}: {}", checkpoint.accuracy);
        // better than both the uninformed predictor and the first epoch
        assert!(checkpoint.loss < 2f64.ln(), "seed {seed}: {}", checkpoint.loss);
        assert!(checkpoint.loss <= out.history[0].val_loss);
    }
}

#[test]
fn non_finite_loss_reports_divergence() {
    let ds = synth_generate(&sinusoid_spec(1, 32, 2, 4, 0.0, 2).unwrap()).unwrap();
    let mut model = PhaserModel::build(&PhaserConfig::new(1, 1, 16, 8, 2, 0)).unwrap();
    let ids: Vec<_> = model
        .params
        .iter()
        .filter(|(_, p)| p.name.starts_with("g_cls"))
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        model.params.get_mut(id).value.data_mut().fill(f64::NAN);
    }
    let cfg = TrainConfig {
        max_epochs: 2,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let err = train(model, &TrainingSet::from(&ds), &cfg).unwrap_err();
    assert!(matches!(err, Error::Diverged { epoch: 0, .. }), "{err}");
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let ds = synth_generate(&shifted_domains_spec(2, 64, 3, 2, 4, 1).unwrap()).unwrap();
    let split = ScenarioSplit::leave_one_out(&ds, 2).unwrap();
    let cfg = quick_cfg(3);
    let a = run_experiment(&ds, &split, Variant::Full, &cfg, 5).unwrap();
    let b = run_experiment(&ds, &split, Variant::Full, &cfg, 5).unwrap();
    assert_eq!(metrics_csv(&a).unwrap(), metrics_csv(&b).unwrap());
    assert_eq!(a.len(), 2);
    assert_eq!(a[0].split, "val");
    assert_eq!(a[1].split, "target");
    assert_eq!(a[1].scenario, "2:full");
}

#[test]
fn domain_ids_do_not_reach_the_trainer() {
    let ds = synth_generate(&shifted_domains_spec(2, 64, 3, 2, 4, 1).unwrap()).unwrap();
    let cfg = quick_cfg(3);
    let split = ScenarioSplit::new("s", vec![0, 1], vec![2]).unwrap();
    // renaming source domains 0,1 to 10,11 changes nothing the trainer may see
    let renamed: Vec<u32> = ds.domains().unwrap().iter().map(|&d| if d < 2 { d + 10 } else { d }).collect();
    let (samples, labels, _) = ds.clone().into_parts();
    let relabelled = LabeledDataset::new("r", samples, labels, Some(renamed), ds.num_classes()).unwrap();
    let split2 = ScenarioSplit::new("s", vec![10, 11], vec![2]).unwrap();
    let a = run_experiment(&ds, &split, Variant::NoAug, &cfg, 9).unwrap();
    let b = run_experiment(&relabelled, &split2, Variant::NoAug, &cfg, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scenario_splits_are_validated() {
    let ds = synth_generate(&shifted_domains_spec(1, 32, 2, 2, 2, 1).unwrap()).unwrap();
    assert!(ScenarioSplit::new("x", vec![0, 1], vec![1]).is_err());
    assert!(ScenarioSplit::new("x", vec![], vec![1]).is_err());
    let missing = ScenarioSplit::new("x", vec![0], vec![5]).unwrap();
    assert!(run_experiment(&ds, &missing, Variant::Full, &quick_cfg(1), 0).is_err());
    assert!(ScenarioSplit::leave_one_out(&ds, 3).is_err());
}

#[test]
fn copy_transform_controls() {
    let ds = synth_generate(&sinusoid_spec(1, 64, 2, 12, 0.0, 4).unwrap()).unwrap();
    let cfg = quick_cfg(10);
    // original and copy are indistinguishable, so the best a classifier can do is chance
    let acc = discrepancy_test_with(&ds, &cfg, 1, |d| Ok(d.clone())).unwrap();
    assert!((acc - 0.5).abs() < 1e-12, "{acc}");

    let p = semantic_preservation_test_with(&ds, &cfg, 1, |d| Ok(d.clone())).unwrap();
    assert_eq!(p.acc_original, p.acc_transformed);
}

#[test]
fn phase_coded_classes_are_not_preserved() {
    // classes differ only by tone phase; a quarter-turn moves each class onto its neighbour
    let mut spec = sinusoid_spec(1, 64, 4, 24, 0.0, 6).unwrap();
    spec.coding = ClassCoding::Phase {
        bin: 5,
        phases: vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2],
    };
    spec.phase_jitter = 0.1;
    spec.tone_amplitude = 2.0;
    let ds = synth_generate(&spec).unwrap();
    let p = semantic_preservation_test(&ds, &quick_cfg(60), 3).unwrap();
    assert!(p.acc_original > 0.8, "{p:?}");
    assert!(p.acc_transformed < p.acc_original - 0.5, "{p:?}");
}

#[test]
fn metrics_csv_header() {
    let e = evaluate_logits(&[vec![1.0, 0.0]], &[0], 2).unwrap();
    let csv = metrics_csv(&[MetricsRow::from_eval("1:full", 3, "target", &e)]).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("scenario,seed,split,accuracy,loss"), "{text}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn validation_split_partitions(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, val) = validation_split(n, frac, seed);
        prop_assert!(!train.is_empty() && !val.is_empty());
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(validation_split(n, frac, seed), (train, val));
    }
}
