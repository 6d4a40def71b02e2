//! Discrete Fourier analysis: DFT, Hilbert transform, STFT and the
//! magnitude/phase split used as network input.
//!
//! The forward kernel is `exp(-i 2π k n / N)` and the inverse carries the
//! `1/N` factor. Spectrograms may be produced in the conjugate
//! (`exp(+i ...)`) convention through [`PhaseConvention`];
//! magnitudes are identical and phases flip sign.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeries;
use crate::error::{Error, Result};

/// Relative imaginary residue above which an inverse transform is treated as broken.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

/// Full complex spectrum; bin `k` corresponds to frequency `k * fs / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| wrapped_atan2(i, r))
            .collect()
    }

    fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    fn from_complex(buf: &[Complex64]) -> Self {
        Self {
            re: buf.iter().map(|c| c.re).collect(),
            im: buf.iter().map(|c| c.im).collect(),
        }
    }
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty signal".into()));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "transform length must be even and at least 2, got {n}"
        )));
    }
    Ok(())
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(buf);
    if inverse {
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }
}

/// Forward DFT of a real, even-length signal.
pub fn dft(x: &[f64]) -> Result<ComplexSpectrum> {
    check_len(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dft input"));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    Ok(ComplexSpectrum::from_complex(&buf))
}

/// Inverse DFT returning the full complex result (scaled by `1/N`).
pub fn idft_complex(spec: &ComplexSpectrum) -> Result<ComplexSpectrum> {
    if spec.re.len() != spec.im.len() {
        return Err(Error::Shape("spectrum re/im lengths differ".into()));
    }
    check_len(spec.len())?;
    if spec.re.iter().chain(&spec.im).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("idft input"));
    }
    let mut buf = spec.to_complex();
    fft_in_place(&mut buf, true);
    Ok(ComplexSpectrum::from_complex(&buf))
}

/// Inverse DFT of a Hermitian spectrum back to a real signal.
///
/// Fails with [`Error::ImaginaryResidue`] when the result is not real to
/// within [`IMAG_RESIDUE_TOL`] relative to the signal scale.
pub fn idft(spec: &ComplexSpectrum) -> Result<Vec<f64>> {
    let out = idft_complex(spec)?;
    real_part_checked(out)
}

fn real_part_checked(out: ComplexSpectrum) -> Result<Vec<f64>> {
    let scale = out.re.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let residue = out.im.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale;
    if residue > IMAG_RESIDUE_TOL {
        return Err(Error::ImaginaryResidue(residue));
    }
    Ok(out.re)
}

/// Hilbert transform: `IDFT(-i·sgn(ξ)·DFT(x))`.
///
/// DC and Nyquist bins map to zero, so their content is annihilated and the
/// output stays real.
pub fn hilbert(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "hilbert needs an even length of at least 4, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hilbert input"));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        *c = match k {
            0 => Complex64::new(0.0, 0.0),
            k if k == half => Complex64::new(0.0, 0.0),
            // -i * (a + bi) = b - ai
            k if k < half => Complex64::new(c.im, -c.re),
            // +i * (a + bi) = -b + ai
            _ => Complex64::new(-c.im, c.re),
        };
    }
    fft_in_place(&mut buf, true);
    real_part_checked(ComplexSpectrum::from_complex(&buf))
}

/// Sign convention of the analysis kernel used by [`stft`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `exp(-i ξ m)`, the usual DFT analysis kernel.
    #[default]
    Analysis,
    /// `exp(+i ξ m)`: every coefficient is the conjugate of the analysis one.
    Conjugate,
}

/// Symmetric Hanning window `0.5 (1 - cos(2πn/(W-1)))`.
pub fn hanning(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let d = (len - 1) as f64;
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / d).cos()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub seg_len: usize,
    pub nfft: usize,
    #[serde(default)]
    pub convention: PhaseConvention,
}

impl StftConfig {
    pub fn new(seg_len: usize, nfft: usize) -> Self {
        Self {
            seg_len,
            nfft,
            convention: PhaseConvention::Analysis,
        }
    }

    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        len / self.seg_len
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.seg_len < 2 {
            return Err(Error::InvalidArgument(format!(
                "seg_len must be at least 2, got {}",
                self.seg_len
            )));
        }
        if !self.nfft.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "nfft must be a power of two, got {}",
                self.nfft
            )));
        }
        if self.nfft < self.seg_len {
            return Err(Error::InvalidArgument(format!(
                "nfft {} is shorter than seg_len {}",
                self.nfft, self.seg_len
            )));
        }
        if len < self.seg_len {
            return Err(Error::InvalidArgument(format!(
                "series of length {len} is shorter than seg_len {}",
                self.seg_len
            )));
        }
        Ok(())
    }
}

/// Complex STFT, laid out `[variate][bin][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub variates: usize,
    pub bins: usize,
    pub frames: usize,
    pub seg_len: usize,
    pub nfft: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.variates, self.bins, self.frames)
    }

    pub fn at(&self, v: usize, k: usize, n: usize) -> Complex64 {
        self.data[(v * self.bins + k) * self.frames + n]
    }

    /// Debug dump as CSV with columns `variate,bin,frame,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variate", "bin", "frame", "re", "im"])?;
        for v in 0..self.variates {
            for k in 0..self.bins {
                for n in 0..self.frames {
                    let c = self.at(v, k, n);
                    w.write_record([
                        v.to_string(),
                        k.to_string(),
                        n.to_string(),
                        c.re.to_string(),
                        c.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::harness::io::write_atomic(path, &buf)
    }
}

/// One-sided spectra of consecutive frames of a single row.
///
/// Frame `n` covers `[n*hop, n*hop + window.len())`, is multiplied by
/// `window`, zero-padded to `nfft` and transformed. Output is `[bin][frame]`.
pub fn stft_row(
    row: &[f64],
    window: &[f64],
    hop: usize,
    frames: usize,
    nfft: usize,
    convention: PhaseConvention,
) -> Vec<Complex64> {
    let bins = nfft / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let plan = planner.plan_fft_forward(nfft);
    let mut out = vec![Complex64::new(0.0, 0.0); bins * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for n in 0..frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let start = n * hop;
        for (m, w) in window.iter().enumerate() {
            buf[m] = Complex64::new(row[start + m] * w, 0.0);
        }
        plan.process(&mut buf);
        for k in 0..bins {
            let c = buf[k];
            out[k * frames + n] = match convention {
                PhaseConvention::Analysis => c,
                PhaseConvention::Conjugate => c.conj(),
            };
        }
    }
    out
}

/// STFT with non-overlapping Hanning frames (`hop = seg_len`).
///
/// Trailing samples that do not fill a frame are dropped.
pub fn stft(x: &TimeSeries, cfg: &StftConfig) -> Result<Spectrogram> {
    let windows = vec![cfg.seg_len; x.variates()];
    stft_with_windows(x, cfg, &windows)
}

/// STFT where variate `i` uses a Hanning window of length `windows[i]`
/// (each at most `seg_len`); frames still start every `seg_len` samples so
/// all variates share one `bins × frames` grid.
pub fn stft_with_windows(x: &TimeSeries, cfg: &StftConfig, windows: &[usize]) -> Result<Spectrogram> {
    cfg.validate(x.len())?;
    if windows.len() != x.variates() {
        return Err(Error::Shape(format!(
            "{} window lengths for {} variates",
            windows.len(),
            x.variates()
        )));
    }
    if let Some(&w) = windows.iter().find(|&&w| w == 0 || w > cfg.seg_len) {
        return Err(Error::InvalidArgument(format!(
            "window length {w} outside [1, {}]",
            cfg.seg_len
        )));
    }
    let frames = cfg.frames(x.len());
    let bins = cfg.bins();
    let mut data = Vec::with_capacity(x.variates() * bins * frames);
    for (row, &w) in x.rows().zip(windows) {
        let window = hanning(w);
        data.extend(stft_row(row, &window, cfg.seg_len, frames, cfg.nfft, cfg.convention));
    }
    Ok(Spectrogram {
        variates: x.variates(),
        bins,
        frames,
        seg_len: cfg.seg_len,
        nfft: cfg.nfft,
        data,
    })
}

/// Magnitude and phase tensors, both `[variate][bin][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagPhase {
    pub variates: usize,
    pub bins: usize,
    pub frames: usize,
    pub mag: Vec<f64>,
    pub pha: Vec<f64>,
}

/// `atan2` folded into `(-π, π]`, with `0` for a zero vector.
pub fn wrapped_atan2(im: f64, re: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        return 0.0;
    }
    let p = im.atan2(re);
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

pub fn mag_phase(s: &Spectrogram) -> Result<MagPhase> {
    if s.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("spectrogram"));
    }
    let mag = s.data.iter().map(|c| c.re.hypot(c.im)).collect();
    let pha = s.data.iter().map(|c| wrapped_atan2(c.im, c.re)).collect();
    Ok(MagPhase {
        variates: s.variates,
        bins: s.bins,
        frames: s.frames,
        mag,
        pha,
    })
}
