//! Diagnostic experiments: augmentation discrepancy, semantic preservation,
//! leave-one-domain-out ablations and the risk-bound trial.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::hilbert_augment;
use crate::dataset::{merge, LabeledDataset};
use crate::divergence::{
    closest_mixture, expected_disagreement, expected_joint_error, gibbs_risk, mixture_epsilon, BoundReport,
    GaussianTrack,
};
use crate::error::{Error, Result};
use crate::harness::eval::{evaluate, MetricsRow};
use crate::harness::synth::{synth_generate, ClassCoding, DomainSpec, SynthSpec};
use crate::harness::train::{train, validation_split, TrainConfig, TrainingSet};
use crate::model::{extract_features, Architecture, PhaserConfig, PhaserModel};

/// Model and training settings shared by every experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub c: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub nfft: usize,
    pub seg_len: usize,
    #[serde(default)]
    pub random_windows: bool,
    pub train: TrainConfig,
    /// Share of the data held out for testing in the discrepancy and
    /// preservation experiments.
    pub holdout_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            c: 2,
            b: 3,
            nfft: 32,
            seg_len: 16,
            random_windows: false,
            train: TrainConfig {
                max_epochs: 80,
                batch_size: 16,
                patience: 8,
                ..TrainConfig::default()
            },
            holdout_fraction: 0.3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "holdout_fraction {} outside (0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, variates: usize, num_classes: usize, seed: u64, arch: Architecture) -> PhaserConfig {
        let mut cfg = PhaserConfig::new(variates, self.c, self.nfft, self.seg_len, num_classes, seed);
        cfg.b = self.b;
        cfg.random_windows = self.random_windows;
        cfg.arch = arch;
        cfg
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }
}

/// Builds, trains and returns the validation checkpoint of a model on `ds`.
pub fn fit(ds: &LabeledDataset, cfg: &ExperimentConfig, seed: u64, arch: Architecture) -> Result<PhaserModel> {
    cfg.validate()?;
    let (v, _) = ds
        .sample_shape()
        .ok_or_else(|| Error::InvalidArgument("cannot train on an empty dataset".into()))?;
    let model = PhaserModel::build(&cfg.model_config(v, ds.num_classes(), seed, arch))?;
    Ok(train(model, &TrainingSet::from(ds), &cfg.train_config(seed))?.model)
}

fn holdout(ds: &LabeledDataset, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train_idx, test_idx) = validation_split(ds.len(), fraction, seed.wrapping_add(0x9E37_79B9));
    Ok((ds.select("train", &train_idx)?, ds.select("test", &test_idx)?))
}

fn relabel(ds: &LabeledDataset, label: usize) -> Result<LabeledDataset> {
    ds.without_domains().with_labels(ds.name.clone(), vec![label; ds.len()], 2)
}

/// Held-out accuracy of a binary classifier separating `S` (label 0) from
/// `transform(S)` (label 1). Both halves of a pair land on the same side of
/// the train/test split.
pub fn discrepancy_test_with<F>(ds: &LabeledDataset, cfg: &ExperimentConfig, seed: u64, transform: F) -> Result<f64>
where
    F: Fn(&LabeledDataset) -> Result<LabeledDataset>,
{
    let (train_part, test_part) = holdout(ds, cfg.holdout_fraction, seed)?;
    let pair = |part: &LabeledDataset| -> Result<LabeledDataset> {
        merge(&relabel(part, 0)?, &relabel(&transform(part)?, 1)?)
    };
    let mut model = fit(&pair(&train_part)?, cfg, seed, Architecture::Full)?;
    Ok(evaluate(&mut model, &pair(&test_part)?)?.accuracy)
}

/// [`discrepancy_test_with`] using the Hilbert transform.
pub fn discrepancy_test(ds: &LabeledDataset, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    discrepancy_test_with(ds, cfg, seed, hilbert_augment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preservation {
    pub acc_original: f64,
    pub acc_transformed: f64,
}

impl Preservation {
    pub fn gap(&self) -> f64 {
        (self.acc_original - self.acc_transformed).abs()
    }
}

/// Trains on `S` only and scores held-out `S` and `transform(held-out S)`.
pub fn semantic_preservation_test_with<F>(
    ds: &LabeledDataset,
    cfg: &ExperimentConfig,
    seed: u64,
    transform: F,
) -> Result<Preservation>
where
    F: Fn(&LabeledDataset) -> Result<LabeledDataset>,
{
    let (train_part, test_part) = holdout(ds, cfg.holdout_fraction, seed)?;
    let mut model = fit(&train_part.without_domains(), cfg, seed, Architecture::Full)?;
    let acc_original = evaluate(&mut model, &test_part)?.accuracy;
    let acc_transformed = evaluate(&mut model, &transform(&test_part)?)?.accuracy;
    Ok(Preservation {
        acc_original,
        acc_transformed,
    })
}

pub fn semantic_preservation_test(ds: &LabeledDataset, cfg: &ExperimentConfig, seed: u64) -> Result<Preservation> {
    semantic_preservation_test_with(ds, cfg, seed, hilbert_augment)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSplit {
    pub id: String,
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

impl ScenarioSplit {
    pub fn new(id: impl Into<String>, source: Vec<u32>, target: Vec<u32>) -> Result<Self> {
        let s = Self {
            id: id.into(),
            source,
            target,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::InvalidArgument(format!("scenario {}: empty source or target set", self.id)));
        }
        if let Some(d) = self.source.iter().find(|d| self.target.contains(d)) {
            return Err(Error::InvalidArgument(format!(
                "scenario {}: domain {d} is both source and target",
                self.id
            )));
        }
        Ok(())
    }

    /// Scenario `k` (1-based) holds out the `k`-th domain id in ascending order.
    pub fn leave_one_out(ds: &LabeledDataset, k: usize) -> Result<Self> {
        let ids = ds.domain_ids();
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 domains for a scenario, found {}",
                ids.len()
            )));
        }
        if k == 0 || k > ids.len() {
            return Err(Error::InvalidArgument(format!("scenario {k} outside 1..={}", ids.len())));
        }
        let target = ids[k - 1];
        Self::new(k.to_string(), ids.iter().copied().filter(|&d| d != target).collect(), vec![target])
    }

    fn check_present(&self, ds: &LabeledDataset) -> Result<()> {
        let ids = ds.domain_ids();
        if let Some(d) = self.source.iter().chain(&self.target).find(|d| !ids.contains(d)) {
            return Err(Error::InvalidArgument(format!("scenario {}: domain {d} not in dataset", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoAug,
    NoResidual,
    MagOnly,
    Concat,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoAug,
        Variant::NoResidual,
        Variant::MagOnly,
        Variant::Concat,
    ];

    pub fn augments(self) -> bool {
        self != Variant::NoAug
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Variant::Full | Variant::NoAug => Architecture::Full,
            Variant::NoResidual => Architecture::NoResidual,
            Variant::MagOnly => Architecture::MagOnly,
            Variant::Concat => Architecture::Concat,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAug => "no_aug",
            Variant::NoResidual => "no_residual",
            Variant::MagOnly => "mag_only",
            Variant::Concat => "concat",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// Trains on the source domains and reports validation and target metrics.
/// The scenario column reads `<scenario id>:<variant>`.
pub fn run_experiment(
    ds: &LabeledDataset,
    split: &ScenarioSplit,
    variant: Variant,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<MetricsRow>> {
    split.validate()?;
    split.check_present(ds)?;
    cfg.validate()?;
    let source = ds.filter_domains("source", &split.source)?.without_domains();
    let target = ds.filter_domains("target", &split.target)?;
    let train_data = if variant.augments() {
        merge(&source, &hilbert_augment(&source)?)?
    } else {
        source
    };
    let (v, _) = train_data
        .sample_shape()
        .ok_or_else(|| Error::InvalidArgument("no source samples".into()))?;
    let model = PhaserModel::build(&cfg.model_config(v, ds.num_classes(), seed, variant.architecture()))?;
    let outcome = train(model, &TrainingSet::from(&train_data), &cfg.train_config(seed))?;
    let mut model = outcome.model;
    let scenario = format!("{}:{variant}", split.id);
    let mut rows = Vec::with_capacity(2);
    if let Some(val) = &outcome.validation {
        rows.push(MetricsRow::from_eval(scenario.clone(), seed, "val", val));
    }
    rows.push(MetricsRow::from_eval(scenario, seed, "target", &evaluate(&mut model, &target)?));
    Ok(rows)
}

/// Evaluates the risk bound for a trained ensemble: `d̂` and the empirical
/// (Gibbs) risk on `target`, `ê` on `mixture` samples.
pub fn bound_report(
    ensemble: &mut [PhaserModel],
    target: &LabeledDataset,
    mixture: &LabeledDataset,
    epsilon: f64,
    q: f64,
) -> Result<BoundReport> {
    let mut predict = |ds: &LabeledDataset| -> Result<Vec<Vec<usize>>> {
        ensemble
            .iter_mut()
            .map(|m| {
                let feats = extract_features(&m.cfg, ds)?;
                m.predict(&feats, crate::harness::eval::EVAL_BATCH)
            })
            .collect()
    };
    let on_target = predict(target)?;
    let on_mixture = predict(mixture)?;
    let d_hat = expected_disagreement(&on_target)?;
    let e_hat = expected_joint_error(&on_mixture, mixture.labels())?;
    let risk = gibbs_risk(&on_target, target.labels())?;
    Ok(BoundReport::new(d_hat, e_hat, epsilon, q, risk))
}

/// Settings of one risk-bound trial on synthetic Gaussian domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrialSpec {
    pub sources: usize,
    pub variates: usize,
    pub length: usize,
    pub classes: usize,
    pub samples_per_class: usize,
    pub ensemble_seeds: Vec<u64>,
    pub q: f64,
    pub grid_resolution: usize,
}

impl Default for BoundTrialSpec {
    fn default() -> Self {
        Self {
            sources: 2,
            variates: 1,
            length: 64,
            classes: 3,
            samples_per_class: 12,
            ensemble_seeds: vec![2711, 2712, 2713, 2714, 2715],
            q: 2.0,
            grid_resolution: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTrial {
    pub report: BoundReport,
    pub mixture_weights: Vec<f64>,
}

fn random_track(rng: &mut ChaCha8Rng, len: usize, offset: (f64, f64), sigma: (f64, f64)) -> Result<GaussianTrack> {
    let a = rng.random_range(offset.0..offset.1);
    let slope = rng.random_range(-0.01..0.01);
    let s = rng.random_range(sigma.0..sigma.1);
    GaussianTrack::new((0..len).map(|t| a + slope * t as f64).collect(), vec![s; len])
}

/// One trial: random source and target tracks, an ensemble trained on the
/// sources, `ê` on draws from the closest source mixture and `ε` as the
/// largest per-timestep β-divergence from the target to that mixture.
pub fn bound_trial(spec: &BoundTrialSpec, cfg: &ExperimentConfig, trial_seed: u64) -> Result<BoundTrial> {
    if spec.sources < 1 || spec.ensemble_seeds.len() < 2 {
        return Err(Error::InvalidArgument("need at least one source and two ensemble members".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let sources = (0..spec.sources)
        .map(|i| random_track(&mut rng, spec.length, (i as f64 - 0.5, i as f64 + 0.5), (0.9, 1.2)))
        .collect::<Result<Vec<_>>>()?;
    // σ_T well below √2·σ_min keeps the order-2 integrand decaying inside the grid.
    let target = random_track(&mut rng, spec.length, (-0.5, spec.sources as f64 - 0.5), (0.8, 1.0))?;
    let bins: Vec<usize> = (0..spec.classes).map(|c| 2 + 3 * c).collect();
    let synth = |tracks: &[GaussianTrack], seed: u64| -> Result<LabeledDataset> {
        let domains = tracks
            .iter()
            .enumerate()
            .map(|(i, t)| DomainSpec {
                id: i as u32,
                track: t.clone(),
                phase_offsets: vec![0.0],
            })
            .collect();
        synth_generate(&SynthSpec {
            variates: spec.variates,
            length: spec.length,
            sample_rate_hz: 50.0,
            domains,
            coding: ClassCoding::Frequency { bins: bins.clone() },
            tone_amplitude: 1.0,
            samples_per_class: spec.samples_per_class,
            phase_jitter: std::f64::consts::PI,
            seed,
        })
    };
    let source_data = synth(&sources, trial_seed.wrapping_mul(3))?.without_domains();
    let train_data = merge(&source_data, &hilbert_augment(&source_data)?)?;
    let mut ensemble = spec
        .ensemble_seeds
        .iter()
        .map(|&s| fit(&train_data, cfg, s ^ trial_seed, Architecture::Full))
        .collect::<Result<Vec<_>>>()?;

    let closest = closest_mixture(&target, &sources, spec.q, spec.grid_resolution)?;
    let weights = closest.mixture.weights.clone();
    // Fresh draws from every source; each mixture sample takes its source by weight.
    let per_source = synth(&sources, trial_seed.wrapping_mul(3).wrapping_add(1))?;
    let n_each = per_source.len() / spec.sources;
    let picks: Vec<usize> = (0..n_each)
        .map(|i| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let k = weights.iter().position(|w| {
                acc += w;
                u < acc
            });
            k.unwrap_or(spec.sources - 1) * n_each + i
        })
        .collect();
    let mixture = per_source.select("mixture", &picks)?;
    let target_data = synth(std::slice::from_ref(&target), trial_seed.wrapping_mul(3).wrapping_add(2))?;

    let epsilon = mixture_epsilon(&target, &closest.mixture, spec.q)?;
    Ok(BoundTrial {
        report: bound_report(&mut ensemble, &target_data, &mixture, epsilon, spec.q)?,
        mixture_weights: weights,
    })
}
