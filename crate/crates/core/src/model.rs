//! The magnitude/phase classifier.
//!
//! Magnitude and phase spectrograms get separate 5×5 encoders, each followed
//! by band-wise (subspectral) normalisation. The two maps are fused, encoded
//! along the feature axis and pooled to one row, encoded along time, and then
//! broadcast back across the feature axis where a projected phase map is
//! added as a residual. A 1×1 class convolution and a global mean give logits.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::layers::{band_ranges, BandLayout, Conv2d, Mode, NormLayer, RunningStats, DEFAULT_MOMENTUM};
use crate::nn::weights::{self, NamedTensor};
use crate::nn::{ParamStore, Tape, Tensor, Var};
use crate::signal::{mag_phase, stft_with_windows, StftConfig};

fn default_bands() -> usize {
    3
}
fn default_nfft() -> usize {
    1024
}
fn default_eps() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Both encoders, fusion, and the phase residual.
    #[default]
    Full,
    /// As `Full` with the residual projection zeroed and frozen.
    NoResidual,
    /// Magnitude encoder only, no residual.
    MagOnly,
    /// Magnitude and phase stacked as `2V` input channels of one encoder, no residual.
    Concat,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "no_residual" => Ok(Self::NoResidual),
            "mag_only" => Ok(Self::MagOnly),
            "concat" => Ok(Self::Concat),
            _ => Err(Error::InvalidArgument(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaserConfig {
    #[serde(rename = "V")]
    pub v: usize,
    pub c: usize,
    #[serde(rename = "B", default = "default_bands")]
    pub b: usize,
    #[serde(default = "default_nfft")]
    pub nfft: usize,
    pub seg_len: usize,
    pub num_classes: usize,
    #[serde(default = "default_eps")]
    pub eps_norm: f64,
    pub seed: u64,
    /// Per-variate Hanning windows of random power-of-two length ≤ `seg_len`.
    #[serde(default)]
    pub random_windows: bool,
    /// Feed the residual projection the phase encoder output before normalisation.
    #[serde(default)]
    pub residual_from_raw_phase: bool,
    #[serde(default)]
    pub arch: Architecture,
}

impl PhaserConfig {
    pub fn new(v: usize, c: usize, nfft: usize, seg_len: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            v,
            c,
            b: default_bands(),
            nfft,
            seg_len,
            num_classes,
            eps_norm: default_eps(),
            seed,
            random_windows: false,
            residual_from_raw_phase: false,
            arch: Architecture::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.v == 0 {
            return bad("V must be at least 1".into());
        }
        if self.c == 0 {
            return bad("c must be at least 1".into());
        }
        if self.b == 0 {
            return bad("B must be at least 1".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if !(self.eps_norm > 0.0) {
            return bad(format!("eps_norm must be positive, got {}", self.eps_norm));
        }
        if self.bins() < self.b {
            return bad(format!("{} frequency bins cannot form {} bands", self.bins(), self.b));
        }
        StftConfig::new(self.seg_len, self.nfft).validate(self.seg_len)
    }

    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn width(&self) -> usize {
        2 * self.c
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig::new(self.seg_len, self.nfft)
    }

    /// Analysis window length per variate.
    pub fn window_lengths(&self) -> Vec<usize> {
        if !self.random_windows {
            return vec![self.seg_len; self.v];
        }
        let max_exp = usize::BITS - 1 - self.seg_len.leading_zeros();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        (0..self.v)
            .map(|_| 1usize << rng.random_range(1..=max_exp))
            .collect()
    }
}

/// Magnitude and phase inputs for a whole dataset, `N×V×D×F` each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub n: usize,
    pub v: usize,
    pub d: usize,
    pub f: usize,
    pub mag: Vec<f64>,
    pub pha: Vec<f64>,
}

impl FeatureSet {
    pub fn per_sample(&self) -> usize {
        self.v * self.d * self.f
    }

    /// Gathers rows into `(mag, pha)` batch tensors.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let m = self.per_sample();
        let mut mag = Vec::with_capacity(indices.len() * m);
        let mut pha = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            mag.extend_from_slice(&self.mag[i * m..(i + 1) * m]);
            pha.extend_from_slice(&self.pha[i * m..(i + 1) * m]);
        }
        let shape = vec![indices.len(), self.v, self.d, self.f];
        (
            Tensor::new(shape.clone(), mag).expect("gathered rows"),
            Tensor::new(shape, pha).expect("gathered rows"),
        )
    }
}

/// STFT magnitude/phase of every sample under the model's window policy.
pub fn extract_features(cfg: &PhaserConfig, ds: &LabeledDataset) -> Result<FeatureSet> {
    let (v, t) = ds
        .sample_shape()
        .ok_or_else(|| Error::InvalidArgument("cannot extract features from an empty dataset".into()))?;
    if v != cfg.v {
        return Err(Error::Shape(format!("model expects {} variates, data has {v}", cfg.v)));
    }
    let stft_cfg = cfg.stft();
    stft_cfg.validate(t)?;
    let windows = cfg.window_lengths();
    let (d, f) = (stft_cfg.bins(), stft_cfg.frames(t));
    let mut mag = Vec::with_capacity(ds.len() * v * d * f);
    let mut pha = Vec::with_capacity(ds.len() * v * d * f);
    for (i, s) in ds.samples().iter().enumerate() {
        let mp = stft_with_windows(s, &stft_cfg, &windows)
            .and_then(|spec| mag_phase(&spec))
            .map_err(|e| Error::at_sample(i, e))?;
        mag.extend(mp.mag);
        pha.extend(mp.pha);
    }
    Ok(FeatureSet {
        n: ds.len(),
        v,
        d,
        f,
        mag,
        pha,
    })
}

/// Band-wise batch standardisation of an `N×C×D×T` tensor without affine:
/// `B` bands of `floor(D/B)` rows plus a remainder band.
pub fn subspectral_normalize(f: &Tensor, bands: usize, eps: f64) -> Result<Tensor> {
    let (_, _, d, _) = f.dims4()?;
    if bands == 0 || d < bands {
        return Err(Error::InvalidArgument(format!("cannot split {d} feature rows into {bands} bands")));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(f.clone(), false);
    let (y, _) = tape.group_norm(x, &band_ranges(d, bands), eps)?;
    Ok(tape.value(y).clone())
}

/// Layer handles of one model; parameter values live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaserNet {
    pub arch: Architecture,
    pub residual_from_raw_phase: bool,
    /// Magnitude encoder (or the joint encoder for [`Architecture::Concat`]).
    pub f_mag: Conv2d,
    pub ssn_mag: NormLayer,
    pub f_pha: Option<Conv2d>,
    pub ssn_pha: Option<NormLayer>,
    pub f_fus: Option<Conv2d>,
    pub f_dep: Vec<(Conv2d, NormLayer)>,
    pub f_tem: Conv2d,
    pub g_res: Option<Conv2d>,
    pub g_cls: Conv2d,
}

/// Named intermediate maps of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub e_m: Var,
    pub e_p: Option<Var>,
    pub r_fus: Var,
    pub r_dep: Var,
    pub r: Var,
    pub logits: Var,
}

impl PhaserNet {
    fn build(cfg: &PhaserConfig, params: &mut ParamStore) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (v, w, k) = (cfg.v, cfg.width(), cfg.num_classes);
        let layout = BandLayout::Split {
            height: cfg.bins(),
            bands: cfg.b,
        };
        let norm = |name: &str, params: &mut ParamStore, layout| {
            NormLayer::new(name, w, layout, cfg.eps_norm, DEFAULT_MOMENTUM, params)
        };
        let arch = cfg.arch;
        let enc_in = if arch == Architecture::Concat { 2 * v } else { v };
        let f_mag = Conv2d::new("f_mag", enc_in, w, (5, 5), (2, 2), params, &mut rng);
        let ssn_mag = norm("ssn_mag", params, layout)?;
        let two_branch = matches!(arch, Architecture::Full | Architecture::NoResidual);
        let (f_pha, ssn_pha, f_fus) = if two_branch {
            let f_pha = Conv2d::new("f_pha", v, w, (5, 5), (2, 2), params, &mut rng);
            let ssn_pha = norm("ssn_pha", params, layout)?;
            let f_fus = Conv2d::new("f_fus", 2 * w, w, (1, 1), (0, 0), params, &mut rng);
            (Some(f_pha), Some(ssn_pha), Some(f_fus))
        } else {
            (None, None, None)
        };
        let mut f_dep = Vec::new();
        for i in 0..2 {
            let conv = Conv2d::new(&format!("f_dep.{i}.conv"), w, w, (3, 3), (1, 1), params, &mut rng);
            let bn = norm(&format!("f_dep.{i}.bn"), params, BandLayout::Whole)?;
            f_dep.push((conv, bn));
        }
        let f_tem = Conv2d::new("f_tem", w, w, (1, 3), (0, 1), params, &mut rng);
        let g_res = if two_branch {
            let g = Conv2d::new("g_res", w, w, (1, 1), (0, 0), params, &mut rng);
            if arch == Architecture::NoResidual {
                for id in [g.weight, g.bias] {
                    params.get_mut(id).value.data_mut().iter_mut().for_each(|x| *x = 0.0);
                    params.set_trainable(id, false);
                }
            }
            Some(g)
        } else {
            None
        };
        let g_cls = Conv2d::new("g_cls", w, k, (1, 1), (0, 0), params, &mut rng);
        Ok(Self {
            arch,
            residual_from_raw_phase: cfg.residual_from_raw_phase,
            f_mag,
            ssn_mag,
            f_pha,
            ssn_pha,
            f_fus,
            f_dep,
            f_tem,
            g_res,
            g_cls,
        })
    }

    /// Forward pass on `N×V×D×F` magnitude and phase inputs.
    pub fn forward(&mut self, tape: &mut Tape, params: &ParamStore, mag: Var, pha: Var, mode: Mode) -> Result<ForwardVars> {
        if tape.shape(mag) != tape.shape(pha) {
            return Err(Error::Shape(format!(
                "magnitude {:?} and phase {:?} differ in shape",
                tape.shape(mag),
                tape.shape(pha)
            )));
        }
        let (n, _, _, _) = tape.value(mag).dims4()?;
        let enc_in = if self.arch == Architecture::Concat { tape.concat(mag, pha, 1)? } else { mag };
        let a_m = self.f_mag.forward(tape, params, enc_in)?;
        let e_m = self.ssn_mag.forward(tape, params, a_m, mode)?;

        let (r_fus, e_p, res_in) = match (&self.f_pha, &mut self.ssn_pha, &self.f_fus) {
            (Some(f_pha), Some(ssn_pha), Some(f_fus)) => {
                let a_p = f_pha.forward(tape, params, pha)?;
                let e_p = ssn_pha.forward(tape, params, a_p, mode)?;
                let both = tape.concat(e_m, e_p, 1)?;
                let r_fus = f_fus.forward(tape, params, both)?;
                let res_in = if self.residual_from_raw_phase { a_p } else { e_p };
                (r_fus, Some(e_p), Some(res_in))
            }
            _ => (e_m, None, None),
        };

        let mut h = r_fus;
        for (conv, bn) in &mut self.f_dep {
            h = conv.forward(tape, params, h)?;
            h = bn.forward(tape, params, h, mode)?;
            h = tape.silu(h);
        }
        let r_dep = tape.mean_axis(h, 2)?;
        let tem = self.f_tem.forward(tape, params, r_dep)?;

        let r = match (&self.g_res, res_in) {
            (Some(g_res), Some(res_in)) => {
                let proj = g_res.forward(tape, params, res_in)?;
                let proj = tape.silu(proj);
                let (ts, ps) = (tape.shape(tem), tape.shape(proj));
                if ts[2] != 1 || ts[..2] != ps[..2] || ts[3] != ps[3] {
                    return Err(Error::Shape(format!("cannot broadcast temporal map {ts:?} onto residual {ps:?}")));
                }
                tape.add(tem, proj)?
            }
            _ => tem,
        };

        let cls = self.g_cls.forward(tape, params, r)?;
        let pooled = tape.mean_axis(cls, 2)?;
        let pooled = tape.mean_axis(pooled, 3)?;
        let k = tape.shape(pooled)[1];
        let logits = tape.reshape(pooled, &[n, k])?;
        Ok(ForwardVars {
            e_m,
            e_p,
            r_fus,
            r_dep,
            r,
            logits,
        })
    }

    fn norms(&self) -> Vec<(&'static str, &NormLayer)> {
        let mut out = vec![("ssn_mag", &self.ssn_mag)];
        if let Some(n) = &self.ssn_pha {
            out.push(("ssn_pha", n));
        }
        out.extend(
            self.f_dep
                .iter()
                .zip(["f_dep.0.bn", "f_dep.1.bn"])
                .map(|((_, bn), name)| (name, bn)),
        );
        out
    }

    fn norms_mut(&mut self) -> Vec<(&'static str, &mut NormLayer)> {
        let mut out = vec![("ssn_mag", &mut self.ssn_mag)];
        if let Some(n) = &mut self.ssn_pha {
            out.push(("ssn_pha", n));
        }
        out.extend(
            self.f_dep
                .iter_mut()
                .zip(["f_dep.0.bn", "f_dep.1.bn"])
                .map(|((_, bn), name)| (name, bn)),
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaserModel {
    pub cfg: PhaserConfig,
    pub net: PhaserNet,
    pub params: ParamStore,
}

impl PhaserModel {
    pub fn build(cfg: &PhaserConfig) -> Result<Self> {
        let mut params = ParamStore::new();
        let net = PhaserNet::build(cfg, &mut params)?;
        Ok(Self {
            cfg: cfg.clone(),
            net,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.trainable_count()
    }

    /// Logits for a batch; the tape is returned so callers can backpropagate.
    pub fn forward(&mut self, tape: &mut Tape, mag: &Tensor, pha: &Tensor, mode: Mode) -> Result<ForwardVars> {
        let m = tape.leaf(mag.clone(), false);
        let p = tape.leaf(pha.clone(), false);
        self.net.forward(tape, &self.params, m, p, mode)
    }

    pub fn logits(&mut self, mag: &Tensor, pha: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, mag, pha, mode)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Eval-mode logits for every sample, in chunks of `batch` rows.
    pub fn predict_logits(&mut self, feats: &FeatureSet, batch: usize) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = (0..feats.n).collect();
        let mut out = Vec::with_capacity(feats.n);
        for chunk in idx.chunks(batch.max(1)) {
            let (m, p) = feats.batch(chunk);
            let l = self.logits(&m, &p, Mode::Eval)?;
            let k = l.shape()[1];
            out.extend(l.data().chunks(k).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    pub fn predict(&mut self, feats: &FeatureSet, batch: usize) -> Result<Vec<usize>> {
        Ok(self.predict_logits(feats, batch)?.iter().map(|r| argmax(r)).collect())
    }

    /// Parameters and running statistics as named tensors.
    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        let mut out: Vec<NamedTensor> = self
            .params
            .iter()
            .map(|(_, p)| (p.name.clone(), p.value.clone()))
            .collect();
        for (name, n) in self.net.norms() {
            if let Some(r) = &n.running {
                let shape = vec![n.channels, r.mean.len() / n.channels];
                out.push((format!("{name}.running_mean"), Tensor::new(shape.clone(), r.mean.clone()).expect("stats")));
                out.push((format!("{name}.running_var"), Tensor::new(shape, r.var.clone()).expect("stats")));
            }
        }
        out
    }

    pub fn load_tensors(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        let find = |name: &str| tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let ids: Vec<_> = self.params.iter().map(|(id, p)| (id, p.name.clone())).collect();
        for (id, name) in ids {
            let t = find(&name).ok_or_else(|| Error::Malformed(format!("weights lack tensor {name}")))?;
            if t.shape() != self.params.value(id).shape() {
                return Err(Error::Shape(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.shape(),
                    self.params.value(id).shape()
                )));
            }
            self.params.get_mut(id).value = t.clone();
        }
        for (name, n) in self.net.norms_mut() {
            let (m, v) = (find(&format!("{name}.running_mean")), find(&format!("{name}.running_var")));
            n.running = match (m, v) {
                (Some(m), Some(v)) if m.numel() == n.channels * n.layout.groups() && v.numel() == m.numel() => {
                    Some(RunningStats {
                        mean: m.data().to_vec(),
                        var: v.data().to_vec(),
                    })
                }
                (None, None) => None,
                _ => return Err(Error::Malformed(format!("bad running statistics for {name}"))),
            };
        }
        Ok(())
    }

    /// Writes `path` (PHSW weights) and the config JSON at [`config_path`].
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(&self.cfg)?;
        crate::harness::io::write_atomic(&config_path(path), &json)?;
        weights::save(path, &self.named_tensors())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cp = config_path(path);
        let bytes = std::fs::read(&cp).map_err(|e| Error::io(&cp, e))?;
        let cfg: PhaserConfig = serde_json::from_slice(&bytes)?;
        let mut model = Self::build(&cfg)?;
        model.load_tensors(&weights::load(path)?)?;
        Ok(model)
    }
}

/// Sidecar holding the config of a weight file: `model.phsw` → `model.phsw.json`.
pub fn config_path(weights: &Path) -> PathBuf {
    let mut s = weights.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Index of the largest entry; first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Closed-form trainable parameter count of an architecture.
pub fn expected_param_count(cfg: &PhaserConfig) -> usize {
    let (v, w, k) = (cfg.v, cfg.width(), cfg.num_classes);
    let conv = |i: usize, o: usize, kh: usize, kw: usize| o * i * kh * kw + o;
    let bands = BandLayout::Split {
        height: cfg.bins(),
        bands: cfg.b,
    }
    .groups();
    let ssn = 2 * w * bands;
    let dep = 2 * (conv(w, w, 3, 3) + 2 * w);
    let tail = dep + conv(w, w, 1, 3) + conv(w, k, 1, 1);
    match cfg.arch {
        Architecture::Full => 2 * (conv(v, w, 5, 5) + ssn) + conv(2 * w, w, 1, 1) + conv(w, w, 1, 1) + tail,
        Architecture::NoResidual => 2 * (conv(v, w, 5, 5) + ssn) + conv(2 * w, w, 1, 1) + tail,
        Architecture::MagOnly => conv(v, w, 5, 5) + ssn + tail,
        Architecture::Concat => conv(2 * v, w, 5, 5) + ssn + tail,
    }
}
