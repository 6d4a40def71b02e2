//! Synthetic nonstationary domains: `x_t = μ_t + σ_t z_t + tone`.
//!
//! Each domain owns a `(μ_t, σ_t)` track and a phase offset per class; the
//! class is carried by a bin-aligned tone (by frequency or by phase).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::augment::sample_rng;
use crate::dataset::{LabeledDataset, TimeSeries};
use crate::divergence::GaussianTrack;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassCoding {
    /// Class `c` is a tone completing `bins[c]` cycles over the sample.
    Frequency { bins: Vec<usize> },
    /// Every class shares `bin`; class `c` starts at phase `phases[c]`.
    Phase { bin: usize, phases: Vec<f64> },
}

impl ClassCoding {
    pub fn num_classes(&self) -> usize {
        match self {
            ClassCoding::Frequency { bins } => bins.len(),
            ClassCoding::Phase { phases, .. } => phases.len(),
        }
    }

    fn tone(&self, class: usize) -> (usize, f64) {
        match self {
            ClassCoding::Frequency { bins } => (bins[class], 0.0),
            ClassCoding::Phase { bin, phases } => (*bin, phases[class]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub id: u32,
    pub track: GaussianTrack,
    /// Tone phase offset per class in this domain (one entry applies to all classes).
    pub phase_offsets: Vec<f64>,
}

impl DomainSpec {
    /// `μ_t = offset + slope·t`, constant `σ`, one phase offset for every class.
    pub fn trend(id: u32, len: usize, offset: f64, slope: f64, sigma: f64, phase: f64) -> Result<Self> {
        let mu = (0..len).map(|t| offset + slope * t as f64).collect();
        Ok(Self {
            id,
            track: GaussianTrack::new(mu, vec![sigma; len])?,
            phase_offsets: vec![phase],
        })
    }

    fn phase_for(&self, class: usize) -> f64 {
        if self.phase_offsets.len() == 1 {
            self.phase_offsets[0]
        } else {
            self.phase_offsets[class]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub variates: usize,
    pub length: usize,
    pub sample_rate_hz: f64,
    pub domains: Vec<DomainSpec>,
    pub coding: ClassCoding,
    pub tone_amplitude: f64,
    pub samples_per_class: usize,
    /// Each sample's tone phase is perturbed uniformly within `±phase_jitter`.
    pub phase_jitter: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn num_classes(&self) -> usize {
        self.coding.num_classes()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.variates == 0 {
            return bad("need at least one variate".into());
        }
        if self.length < TimeSeries::MIN_LEN || !self.length.is_multiple_of(2) {
            return bad(format!("length must be even and ≥ {}, got {}", TimeSeries::MIN_LEN, self.length));
        }
        if self.domains.is_empty() {
            return bad("need at least one domain".into());
        }
        let k = self.num_classes();
        if k < 2 {
            return bad(format!("need at least 2 classes, got {k}"));
        }
        let mut ids: Vec<u32> = self.domains.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.domains.len() {
            return bad("duplicate domain ids".into());
        }
        for d in &self.domains {
            d.track.validate()?;
            if d.track.len() != self.length {
                return bad(format!("domain {} track has length {}, samples have {}", d.id, d.track.len(), self.length));
            }
            if d.phase_offsets.len() != 1 && d.phase_offsets.len() != k {
                return bad(format!("domain {} needs 1 or {k} phase offsets", d.id));
            }
        }
        let nyquist = self.length / 2;
        match &self.coding {
            ClassCoding::Frequency { bins } => {
                let mut sorted = bins.clone();
                sorted.sort_unstable();
                if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                    return bad(format!("frequency collision: two classes use bin {}", w[0]));
                }
                if let Some(b) = bins.iter().find(|&&b| b == 0 || b >= nyquist) {
                    return bad(format!("tone bin {b} must lie strictly between DC and Nyquist ({nyquist})"));
                }
            }
            ClassCoding::Phase { bin, .. } => {
                if *bin == 0 || *bin >= nyquist {
                    return bad(format!("tone bin {bin} must lie strictly between DC and Nyquist ({nyquist})"));
                }
            }
        }
        if !(self.phase_jitter >= 0.0) || !self.tone_amplitude.is_finite() {
            return bad("phase jitter must be ≥ 0 and amplitude finite".into());
        }
        Ok(())
    }
}

/// Samples ordered by domain, then class, then repetition.
pub fn synth_generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let (v, t_len) = (spec.variates, spec.length);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    let mut index = 0usize;
    for d in &spec.domains {
        for class in 0..spec.num_classes() {
            let (bin, class_phase) = spec.coding.tone(class);
            for _ in 0..spec.samples_per_class {
                let mut rng = sample_rng(spec.seed, index);
                let jitter = if spec.phase_jitter > 0.0 {
                    rng.random_range(-spec.phase_jitter..=spec.phase_jitter)
                } else {
                    0.0
                };
                let phase = class_phase + d.phase_for(class) + jitter;
                let w = 2.0 * PI * bin as f64 / t_len as f64;
                let mut values = Vec::with_capacity(v * t_len);
                for _ in 0..v {
                    for t in 0..t_len {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let tone = spec.tone_amplitude * (w * t as f64 + phase).cos();
                        values.push(d.track.mu[t] + d.track.sigma[t] * z + tone);
                    }
                }
                samples.push(TimeSeries::new(v, values, spec.sample_rate_hz)?);
                labels.push(class);
                domains.push(d.id);
                index += 1;
            }
        }
    }
    LabeledDataset::new("synth", samples, labels, Some(domains), spec.num_classes())
}

/// Evenly spaced class tone bins strictly between DC and Nyquist.
pub fn spaced_bins(length: usize, classes: usize) -> Vec<usize> {
    let step = (length / (2 * (classes + 1))).max(1);
    (0..classes).map(|c| step * (c + 1)).collect()
}

/// Frequency-coded sinusoids with random phase on a constant `baseline`
/// in one stationary domain.
pub fn sinusoid_spec(
    variates: usize,
    length: usize,
    classes: usize,
    samples_per_class: usize,
    baseline: f64,
    seed: u64,
) -> Result<SynthSpec> {
    Ok(SynthSpec {
        variates,
        length,
        sample_rate_hz: 50.0,
        domains: vec![DomainSpec::trend(0, length, baseline, 0.0, 0.5, 0.0)?],
        coding: ClassCoding::Frequency {
            bins: spaced_bins(length, classes),
        },
        tone_amplitude: 1.0,
        samples_per_class,
        phase_jitter: PI,
        seed,
    })
}

/// `domains` domains with distinct trends, noise levels and class-dependent
/// tone phases; classes are frequency coded on evenly spaced bins below Nyquist.
///
/// Domain `d` rotates class `c`'s tone phase by `(c·d mod 4)·π/2`, so the
/// class-to-phase association seen in one domain does not carry over to
/// another, while tone magnitudes are the same everywhere.
pub fn shifted_domains_spec(
    variates: usize,
    length: usize,
    domains: usize,
    classes: usize,
    samples_per_class: usize,
    seed: u64,
) -> Result<SynthSpec> {
    let bins = spaced_bins(length, classes);
    let doms = (0..domains)
        .map(|d| {
            let df = d as f64;
            let slope = 0.01 * (df - (domains as f64 - 1.0) / 2.0);
            let mut dom = DomainSpec::trend(d as u32, length, 0.25 * df, slope, 0.6 + 0.15 * df, 0.0)?;
            dom.phase_offsets = (0..classes).map(|c| ((c * d) % 4) as f64 * PI / 2.0).collect();
            Ok(dom)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthSpec {
        variates,
        length,
        sample_rate_hz: 50.0,
        domains: doms,
        coding: ClassCoding::Frequency { bins },
        tone_amplitude: 0.8,
        samples_per_class,
        phase_jitter: 0.2,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_and_labels() {
        let spec = shifted_domains_spec(3, 64, 3, 4, 5, 1).unwrap();
        let ds = synth_generate(&spec).unwrap();
        assert_eq!(ds.len(), 3 * 4 * 5);
        assert_eq!(ds.num_classes(), 4);
        assert_eq!(ds.domain_ids(), vec![0, 1, 2]);
        assert_eq!(ds.sample_shape(), Some((3, 64)));
    }

    #[test]
    fn frequency_collision_rejected() {
        let mut spec = sinusoid_spec(1, 64, 3, 2, 0.0, 0).unwrap();
        spec.coding = ClassCoding::Frequency { bins: vec![3, 5, 3] };
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = sinusoid_spec(2, 32, 2, 3, 0.0, 9).unwrap();
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
    }
}
