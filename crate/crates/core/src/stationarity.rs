//! Augmented Dickey-Fuller unit-root statistic.
//!
//! The test regression is
//! `Δy_t = α + γ·y_{t-1} + Σ_{i=1..p} δ_i·Δy_{t-i} + e_t`
//! (constant, no trend) and the reported statistic is `γ̂ / SE(γ̂)`.
//! More negative values are stronger evidence against a unit root.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Asymptotic 5% critical value for the constant-only regression.
pub const CRITICAL_5PCT: f64 = -2.86;

pub const MIN_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagOrder {
    /// Schwert's rule `floor(12 (n/100)^{1/4})`.
    #[default]
    Auto,
    Fixed(usize),
}

impl LagOrder {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            LagOrder::Fixed(p) => p,
            LagOrder::Auto => schwert_lag(n),
        }
    }
}

pub fn schwert_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    pub n_obs: usize,
    pub reject_at_5pct: bool,
    /// OLS coefficients in regressor order `[α, γ, δ_1, …, δ_p]`.
    pub coefficients: Vec<f64>,
}

/// Design matrix and response of the ADF regression with `p` lagged differences.
pub fn adf_design(y: &[f64], p: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = y.len();
    let k = p + 2;
    if n < p + 2 {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} too short for lag order {p}"
        )));
    }
    let n_obs = n - p - 1;
    if n_obs <= k {
        return Err(Error::InvalidArgument(format!(
            "{n_obs} observations after lagging do not exceed {k} regressors"
        )));
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Row r corresponds to t = p + 1 + r, with Δy_t = dy[t - 1].
    let x = DMatrix::from_fn(n_obs, k, |r, c| {
        let t = p + 1 + r;
        match c {
            0 => 1.0,
            1 => y[t - 1],
            i => dy[t - 1 - (i - 1)],
        }
    });
    let resp = DVector::from_fn(n_obs, |r, _| dy[p + r]);
    Ok((x, resp))
}

pub fn adf_statistic(y: &[f64], lag: LagOrder) -> Result<AdfResult> {
    if y.len() < MIN_LEN {
        return Err(Error::InvalidArgument(format!(
            "ADF needs at least {MIN_LEN} observations, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adf input"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    if var <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Err(Error::Singular("series has zero variance".into()));
    }
    let p = lag.resolve(y.len());
    let (x, resp) = adf_design(y, p)?;
    let (n_obs, k) = x.shape();

    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return Err(Error::Singular("rank-deficient ADF design".into()));
    }
    let qty = qr.q().transpose() * &resp;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let resid = &resp - &x * &beta;
    let sigma2 = resid.norm_squared() / (n_obs - k) as f64;
    // Var(β̂) = σ² (RᵀR)⁻¹, so Var(γ̂) = σ² ‖R⁻ᵀ e_γ‖².
    let mut e = DVector::zeros(k);
    e[1] = 1.0;
    let z = r
        .transpose()
        .solve_lower_triangular(&e)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let se = (sigma2 * z.norm_squared()).sqrt();
    let statistic = beta[1] / se;
    if !statistic.is_finite() {
        return Err(Error::Singular("non-finite ADF statistic".into()));
    }
    Ok(AdfResult {
        statistic,
        lag_order: p,
        n_obs,
        reject_at_5pct: statistic < CRITICAL_5PCT,
        coefficients: beta.iter().copied().collect(),
    })
}

/// Mean ADF statistic per variate across all samples of a dataset.
pub fn dataset_adf_summary(ds: &LabeledDataset, lag: LagOrder) -> Result<Vec<f64>> {
    let (v, _) = ds
        .sample_shape()
        .ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
    let mut sums = vec![0.0; v];
    for (i, s) in ds.samples().iter().enumerate() {
        for (acc, row) in sums.iter_mut().zip(s.rows()) {
            *acc += adf_statistic(row, lag)
                .map_err(|e| Error::at_sample(i, e))?
                .statistic;
        }
    }
    let n = ds.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Writes `variate,mean_statistic` rows.
pub fn summary_csv(summary: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variate", "mean_statistic"])?;
    for (v, s) in summary.iter().enumerate() {
        w.write_record([v.to_string(), s.to_string()])?;
    }
    w.into_inner()
        .map_err(|e| Error::Malformed(format!("csv buffer: {e}")))
}
