use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Band, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerSpec {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kh: usize,
        kw: usize,
        pad_h: usize,
        pad_w: usize,
    },
    BatchNorm2d {
        ch: usize,
        eps: f64,
        momentum: f64,
    },
    Silu,
    MeanPool {
        axis: usize,
    },
    Dense {
        inp: usize,
        out: usize,
    },
    /// Marks the chain's output as logits for a softmax cross-entropy loss.
    SoftmaxCe,
}

impl LayerSpec {
    pub fn conv(in_ch: usize, out_ch: usize, kh: usize, kw: usize, pad_h: usize, pad_w: usize) -> Self {
        LayerSpec::Conv2d {
            in_ch,
            out_ch,
            kh,
            kw,
            pad_h,
            pad_w,
        }
    }

    pub fn batchnorm(ch: usize) -> Self {
        LayerSpec::BatchNorm2d {
            ch,
            eps: DEFAULT_EPS,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match *self {
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                ..
            } if in_ch == 0 || out_ch == 0 || kh == 0 || kw == 0 => bad("conv dimensions must be positive"),
            LayerSpec::BatchNorm2d { ch: 0, .. } => bad("batchnorm channels must be positive"),
            LayerSpec::BatchNorm2d { eps, .. } if !(eps > 0.0) => bad("batchnorm eps must be positive"),
            LayerSpec::BatchNorm2d { momentum, .. } if !(0.0..=1.0).contains(&momentum) => {
                bad("batchnorm momentum must lie in [0, 1]")
            }
            LayerSpec::Dense { inp, out } if inp == 0 || out == 0 => bad("dense dimensions must be positive"),
            _ => Ok(()),
        }
    }
}

/// How a normalisation layer groups the feature (height) axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandLayout {
    /// One group spanning every row: plain batch norm.
    Whole,
    /// `bands` contiguous groups of `floor(height / bands)` rows, plus one
    /// group for the remainder rows when `height` is not a multiple.
    Split { height: usize, bands: usize },
}

impl BandLayout {
    pub fn groups(&self) -> usize {
        match *self {
            BandLayout::Whole => 1,
            BandLayout::Split { height, bands } => bands + usize::from(height % bands != 0),
        }
    }

    pub fn ranges(&self, height: usize) -> Result<Vec<Band>> {
        match *self {
            BandLayout::Whole => Ok(vec![(0, height)]),
            BandLayout::Split { height: d, bands } => {
                if height != d {
                    return Err(Error::Shape(format!(
                        "normalisation built for {d} feature rows, got {height}"
                    )));
                }
                Ok(band_ranges(d, bands))
            }
        }
    }
}

/// Contiguous bands of `floor(d / b)` rows, then the remainder as its own band.
pub fn band_ranges(d: usize, b: usize) -> Vec<Band> {
    let size = d / b;
    let mut out: Vec<Band> = (0..b).map(|i| (i * size, (i + 1) * size)).collect();
    if !d.is_multiple_of(b) {
        out.push((b * size, d));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormLayer {
    pub channels: usize,
    pub layout: BandLayout,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running: Option<RunningStats>,
}

impl NormLayer {
    pub fn new(
        name: &str,
        channels: usize,
        layout: BandLayout,
        eps: f64,
        momentum: f64,
        params: &mut ParamStore,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("normalisation needs at least one channel".into()));
        }
        if !(eps > 0.0) || !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "invalid normalisation eps {eps} / momentum {momentum}"
            )));
        }
        if let BandLayout::Split { height, bands } = layout {
            if bands == 0 || height < bands {
                return Err(Error::InvalidArgument(format!(
                    "cannot split {height} feature rows into {bands} bands"
                )));
            }
        }
        let g = layout.groups();
        let gamma = params.add(format!("{name}.gamma"), Tensor::full(&[channels, g], 1.0));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(&[channels, g]));
        Ok(Self {
            channels,
            layout,
            eps,
            momentum,
            gamma,
            beta,
            running: None,
        })
    }

    /// Normalised output before the affine step.
    pub fn normalize(&mut self, tape: &mut Tape, x: Var, mode: Mode) -> Result<Var> {
        let (_, c, h, _) = tape.value(x).dims4()?;
        if c != self.channels {
            return Err(Error::Shape(format!(
                "normalisation expects {} channels, got {c}",
                self.channels
            )));
        }
        let bands = self.layout.ranges(h)?;
        match mode {
            Mode::Train => {
                let (y, stats) = tape.group_norm(x, &bands, self.eps)?;
                let running = self.running.get_or_insert_with(|| RunningStats {
                    mean: vec![0.0; stats.mean.len()],
                    var: vec![1.0; stats.var.len()],
                });
                let m = self.momentum;
                for i in 0..stats.mean.len() {
                    let n = stats.counts[i] as f64;
                    let unbiased = if n > 1.0 { stats.var[i] * n / (n - 1.0) } else { stats.var[i] };
                    running.mean[i] = (1.0 - m) * running.mean[i] + m * stats.mean[i];
                    running.var[i] = (1.0 - m) * running.var[i] + m * unbiased;
                }
                Ok(y)
            }
            Mode::Eval => {
                let r = self.running.as_ref().ok_or_else(|| Error::NoRunningStats("eval-mode normalisation before any training pass".into()))?;
                tape.fixed_norm(x, &bands, &r.mean, &r.var, self.eps)
            }
        }
    }

    pub fn forward(&mut self, tape: &mut Tape, params: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let y = self.normalize(tape, x, mode)?;
        let h = tape.shape(x)[2];
        let bands = self.layout.ranges(h)?;
        let g = tape.param(params, self.gamma);
        let b = tape.param(params, self.beta);
        tape.group_affine(y, g, b, &bands)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub pad: (usize, usize),
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        pad: (usize, usize),
        params: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (kh, kw) = kernel;
        let weight = params.add_fan_in_uniform(format!("{name}.weight"), &[out_ch, in_ch, kh, kw], in_ch * kh * kw, rng);
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[out_ch]));
        Self { weight, bias, pad }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        tape.conv2d(x, w, Some(b), self.pad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    Norm(NormLayer),
    Silu,
    MeanPool { axis: usize },
    Dense { weight: ParamId, bias: ParamId },
    SoftmaxCe,
}

impl Layer {
    pub fn build(name: &str, spec: &LayerSpec, params: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                kh,
                kw,
                pad_h,
                pad_w,
            } => Layer::Conv2d(Conv2d::new(name, in_ch, out_ch, (kh, kw), (pad_h, pad_w), params, rng)),
            LayerSpec::BatchNorm2d { ch, eps, momentum } => {
                Layer::Norm(NormLayer::new(name, ch, BandLayout::Whole, eps, momentum, params)?)
            }
            LayerSpec::Silu => Layer::Silu,
            LayerSpec::MeanPool { axis } => Layer::MeanPool { axis },
            LayerSpec::Dense { inp, out } => Layer::Dense {
                weight: params.add_fan_in_uniform(format!("{name}.weight"), &[out, inp], inp, rng),
                bias: params.add(format!("{name}.bias"), Tensor::zeros(&[out])),
            },
            LayerSpec::SoftmaxCe => Layer::SoftmaxCe,
        })
    }

    pub fn forward(&mut self, tape: &mut Tape, params: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        match self {
            Layer::Conv2d(c) => c.forward(tape, params, x),
            Layer::Norm(n) => n.forward(tape, params, x, mode),
            Layer::Silu => Ok(tape.silu(x)),
            Layer::MeanPool { axis } => tape.mean_axis(x, *axis),
            Layer::Dense { weight, bias } => {
                let w = tape.param(params, *weight);
                let b = tape.param(params, *bias);
                tape.dense(x, w, Some(b))
            }
            Layer::SoftmaxCe => Ok(x),
        }
    }
}

/// Applies one layer to a fresh input and returns the output value.
pub fn layer_forward(spec: &LayerSpec, seed: u64, input: &Tensor, mode: Mode) -> Result<Tensor> {
    let mut params = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Layer::build("layer", spec, &mut params, &mut rng)?;
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone(), false);
    let y = layer.forward(&mut tape, &params, x, mode)?;
    Ok(tape.value(y).clone())
}

/// A linear chain of layers sharing one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn build(specs: &[LayerSpec], seed: u64, params: &mut ParamStore) -> Result<Self> {
        if let Some(i) = specs.iter().position(|s| *s == LayerSpec::SoftmaxCe) {
            if i + 1 != specs.len() {
                return Err(Error::InvalidArgument("softmax_ce must be the last layer".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .enumerate()
            .map(|(i, s)| Layer::build(&format!("layers.{i}"), s, params, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn forward(&mut self, tape: &mut Tape, params: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        self.layers
            .iter_mut()
            .try_fold(x, |h, l| l.forward(tape, params, h, mode))
    }

    /// Mean cross-entropy of the chain output; the output must be `N×K`
    /// (trailing singleton axes are flattened).
    pub fn loss(&mut self, tape: &mut Tape, params: &ParamStore, x: Var, labels: &[usize], mode: Mode) -> Result<Var> {
        let y = self.forward(tape, params, x, mode)?;
        let n = tape.shape(y)[0];
        let k = tape.value(y).numel() / n.max(1);
        let logits = tape.reshape(y, &[n, k])?;
        tape.cross_entropy(logits, labels)
    }
}
