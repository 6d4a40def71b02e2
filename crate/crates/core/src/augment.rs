//! Dataset-level augmentations.
//!
//! Every stochastic transform draws from a generator keyed by `(seed,
//! sample index)`, so results do not depend on processing order.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, TimeSeries};
use crate::error::{Error, Result};
use crate::signal::hilbert;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    HilbertFixed,
    HilbertRandomPhase,
    Rotation,
    Permutation,
    CircularShift,
}

impl FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hilbert_fixed" | "hilbert" => AugmentKind::HilbertFixed,
            "hilbert_random_phase" => AugmentKind::HilbertRandomPhase,
            "rotation" => AugmentKind::Rotation,
            "permutation" => AugmentKind::Permutation,
            "circular_shift" => AugmentKind::CircularShift,
            other => return Err(Error::InvalidArgument(format!("unknown augmentation {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    /// Radians, random-phase only.
    pub phi_range: (f64, f64),
    /// Block length for permutation.
    pub window: Option<usize>,
    /// Upper bound on the circular shift as a fraction of the length.
    pub max_shift_frac: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn new(kind: AugmentKind, seed: u64) -> Self {
        Self {
            kind,
            phi_range: (-FRAC_PI_2, FRAC_PI_2),
            window: None,
            max_shift_frac: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.phi_range;
        if self.kind == AugmentKind::HilbertRandomPhase {
            if !(lo <= hi) {
                return Err(Error::InvalidArgument(format!("empty phase range [{lo}, {hi}]")));
            }
            if lo < -PI || hi > PI {
                return Err(Error::InvalidArgument(format!(
                    "phase range [{lo}, {hi}] exceeds [-π, π]"
                )));
            }
        }
        if self.kind == AugmentKind::Permutation && self.window.unwrap_or(0) == 0 {
            return Err(Error::InvalidArgument("permutation needs a positive window".into()));
        }
        if self.kind == AugmentKind::CircularShift
            && !(self.max_shift_frac > 0.0 && self.max_shift_frac <= 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "max_shift_frac {} outside (0, 1]",
                self.max_shift_frac
            )));
        }
        Ok(())
    }
}

/// Generator for one sample; independent of every other sample's stream.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Replaces every variate of every sample by its Hilbert transform.
pub fn hilbert_augment(ds: &LabeledDataset) -> Result<LabeledDataset> {
    ds.map_samples(format!("{}+hilbert", ds.name), |_, s| s.map_rows(hilbert))
}

/// `y = cos(φ)·x − sin(φ)·HT(x)` for every variate of `x`.
pub fn phase_shift(x: &TimeSeries, phi: f64) -> Result<TimeSeries> {
    let (a, b) = (phi.cos(), phi.sin());
    x.map_rows(|row| {
        let h = hilbert(row)?;
        Ok(row.iter().zip(&h).map(|(x, h)| a * x - b * h).collect())
    })
}

/// One φ per sample, drawn from `phi_range` and shared by all its variates.
pub fn random_phase_augment(ds: &LabeledDataset, spec: &AugmentSpec) -> Result<LabeledDataset> {
    if spec.kind != AugmentKind::HilbertRandomPhase {
        return Err(Error::InvalidArgument(format!(
            "random_phase_augment called with {:?}",
            spec.kind
        )));
    }
    spec.validate()?;
    let (lo, hi) = spec.phi_range;
    ds.map_samples(format!("{}+random_phase", ds.name), |i, s| {
        let phi = if lo == hi {
            lo
        } else {
            sample_rng(spec.seed, i).random_range(lo..=hi)
        };
        phase_shift(s, phi)
    })
}

/// Uniform random rotation from a unit quaternion (Shoemake's method).
pub fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        b * (2.0 * PI * u3).cos(),
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
    ];
    quaternion_to_matrix(q)
}

/// Rotation matrix of the unit quaternion `[w, x, y, z]`.
pub fn quaternion_to_matrix([w, x, y, z]: [f64; 4]) -> [[f64; 3]; 3] {
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Left-multiplies a 3-variate sample by `m`.
pub fn rotate(x: &TimeSeries, m: &[[f64; 3]; 3]) -> Result<TimeSeries> {
    if x.variates() != 3 {
        return Err(Error::InvalidArgument(format!(
            "rotation needs 3 variates, got {}",
            x.variates()
        )));
    }
    let t = x.len();
    let mut out = vec![0.0; 3 * t];
    for (r, m_row) in m.iter().enumerate() {
        for (c, &coef) in m_row.iter().enumerate() {
            for (o, v) in out[r * t..(r + 1) * t].iter_mut().zip(x.variate(c)) {
                *o += coef * v;
            }
        }
    }
    x.with_values(out)
}

/// Reorders `window`-long blocks of every variate according to `order`.
pub fn permute_windows(x: &TimeSeries, window: usize, order: &[usize]) -> Result<TimeSeries> {
    let t = x.len();
    if window == 0 || !t.is_multiple_of(window) {
        return Err(Error::InvalidArgument(format!(
            "window {window} does not divide length {t}"
        )));
    }
    if order.len() != t / window {
        return Err(Error::Shape("block order length mismatch".into()));
    }
    x.map_rows(|row| {
        Ok(order
            .iter()
            .flat_map(|&b| row[b * window..(b + 1) * window].iter().copied())
            .collect())
    })
}

/// Rotates every variate right by `shift` steps with wraparound.
pub fn circular_shift(x: &TimeSeries, shift: usize) -> Result<TimeSeries> {
    let t = x.len();
    let k = shift % t;
    x.map_rows(|row| {
        let mut out = row.to_vec();
        out.rotate_right(k);
        Ok(out)
    })
}

/// Rotation, window permutation or circular shift, seeded per sample.
pub fn baseline_augment(ds: &LabeledDataset, spec: &AugmentSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let Some((v, t)) = ds.sample_shape() else {
        return Ok(ds.clone());
    };
    match spec.kind {
        AugmentKind::Rotation => {
            if v != 3 {
                return Err(Error::InvalidArgument(format!("rotation needs 3 variates, got {v}")));
            }
            ds.map_samples(format!("{}+rotation", ds.name), |i, s| {
                rotate(s, &random_rotation(&mut sample_rng(spec.seed, i)))
            })
        }
        AugmentKind::Permutation => {
            let window = spec.window.unwrap_or(0);
            if t % window != 0 {
                return Err(Error::InvalidArgument(format!(
                    "window {window} does not divide length {t}"
                )));
            }
            ds.map_samples(format!("{}+permutation", ds.name), |i, s| {
                let mut order: Vec<usize> = (0..t / window).collect();
                order.shuffle(&mut sample_rng(spec.seed, i));
                permute_windows(s, window, &order)
            })
        }
        AugmentKind::CircularShift => {
            let max_shift = (spec.max_shift_frac * t as f64).floor() as usize;
            ds.map_samples(format!("{}+circular_shift", ds.name), |i, s| {
                let k = sample_rng(spec.seed, i).random_range(0..=max_shift);
                circular_shift(s, k)
            })
        }
        other => Err(Error::InvalidArgument(format!(
            "{other:?} is not a baseline augmentation"
        ))),
    }
}

/// Dispatches on `spec.kind`.
pub fn augment(ds: &LabeledDataset, spec: &AugmentSpec) -> Result<LabeledDataset> {
    match spec.kind {
        AugmentKind::HilbertFixed => hilbert_augment(ds),
        AugmentKind::HilbertRandomPhase => random_phase_augment(ds, spec),
        _ => baseline_augment(ds, spec),
    }
}
