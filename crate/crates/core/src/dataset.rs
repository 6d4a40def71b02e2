//! Multivariate samples and labelled collections of them.

use crate::error::{Error, Result};

/// A single multivariate sample stored variate-major (`V` rows of `T` steps).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    variates: usize,
    values: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub const MIN_LEN: usize = 4;

    pub fn new(variates: usize, values: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if variates == 0 {
            return Err(Error::InvalidArgument("time series needs at least one variate".into()));
        }
        if !values.len().is_multiple_of(variates) {
            return Err(Error::Shape(format!(
                "{} values do not split into {variates} variates",
                values.len()
            )));
        }
        if values.len() / variates < Self::MIN_LEN {
            return Err(Error::InvalidArgument(format!(
                "time series needs at least {} steps, got {}",
                Self::MIN_LEN,
                values.len() / variates
            )));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series values"));
        }
        Ok(Self {
            variates,
            values,
            sample_rate_hz,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        let v = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Shape("ragged variate rows".into()));
        }
        Self::new(v, rows.into_iter().flatten().collect(), sample_rate_hz)
    }

    pub fn variates(&self) -> usize {
        self.variates
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.variates
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variate(&self, v: usize) -> &[f64] {
        let t = self.len();
        &self.values[v * t..(v + 1) * t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.len())
    }

    /// Applies `f` to every variate row, producing a series of the same shape.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut out = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            let mapped = f(row)?;
            if mapped.len() != row.len() {
                return Err(Error::Shape("row transform changed length".into()));
            }
            out.extend(mapped);
        }
        Self::new(self.variates, out, self.sample_rate_hz)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.variates, values, self.sample_rate_hz)
    }

    /// Shape key used to check dataset homogeneity.
    pub fn shape(&self) -> (usize, usize) {
        (self.variates, self.len())
    }
}

/// Samples with class labels and (optionally) domain ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    samples: Vec<TimeSeries>,
    labels: Vec<usize>,
    domains: Option<Vec<u32>>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        samples: Vec<TimeSeries>,
        labels: Vec<usize>,
        domains: Option<Vec<u32>>,
        num_classes: usize,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be positive".into()));
        }
        if samples.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(d) = &domains {
            if d.len() != samples.len() {
                return Err(Error::Shape(format!(
                    "{} samples but {} domain ids",
                    samples.len(),
                    d.len()
                )));
            }
        }
        if let Some(first) = samples.first() {
            let key = (first.shape(), first.sample_rate_hz());
            if let Some(i) = samples
                .iter()
                .position(|s| (s.shape(), s.sample_rate_hz()) != key)
            {
                return Err(Error::Shape(format!("sample {i} differs in shape or sample rate")));
            }
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                sample: i,
                label: l,
                num_classes,
            });
        }
        Ok(Self {
            name: name.into(),
            samples,
            labels,
            domains,
            num_classes,
        })
    }

    pub fn empty(name: impl Into<String>, num_classes: usize) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
            labels: Vec::new(),
            domains: None,
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[TimeSeries] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn domains(&self) -> Option<&[u32]> {
        self.domains.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `(V, T)` of the samples, `None` when empty.
    pub fn sample_shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(TimeSeries::shape)
    }

    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.samples.first().map(TimeSeries::sample_rate_hz)
    }

    /// Rebuilds the dataset with transformed samples, keeping labels and domains.
    pub fn map_samples<F>(&self, name: impl Into<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &TimeSeries) -> Result<TimeSeries>,
    {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| f(i, s).map_err(|e| Error::at_sample(i, e)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            name,
            samples,
            self.labels.clone(),
            self.domains.clone(),
            self.num_classes,
        )
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("index {bad} out of range")));
        }
        Self::new(
            name,
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.domains
                .as_ref()
                .map(|d| indices.iter().map(|&i| d[i]).collect()),
            self.num_classes,
        )
    }

    /// Samples whose domain id is in `ids`. Errors when the dataset has no domains.
    pub fn filter_domains(&self, name: impl Into<String>, ids: &[u32]) -> Result<Self> {
        let domains = self
            .domains
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("dataset carries no domain ids".into()))?;
        let idx: Vec<usize> = domains
            .iter()
            .enumerate()
            .filter(|(_, d)| ids.contains(d))
            .map(|(i, _)| i)
            .collect();
        self.select(name, &idx)
    }

    pub fn with_labels(&self, name: impl Into<String>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        Self::new(name, self.samples.clone(), labels, self.domains.clone(), num_classes)
    }

    pub fn without_domains(&self) -> Self {
        Self {
            domains: None,
            ..self.clone()
        }
    }

    pub fn into_parts(self) -> (Vec<TimeSeries>, Vec<usize>, Option<Vec<u32>>) {
        (self.samples, self.labels, self.domains)
    }

    /// Sorted distinct domain ids.
    pub fn domain_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.domains.clone().unwrap_or_default();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Concatenates `augmented` after `original`.
///
/// Provenance is not recorded: downstream stages see one undifferentiated pool.
pub fn merge(original: &LabeledDataset, augmented: &LabeledDataset) -> Result<LabeledDataset> {
    if augmented.is_empty() {
        return Ok(original.clone());
    }
    if original.is_empty() {
        return Ok(augmented.clone());
    }
    if original.num_classes() != augmented.num_classes() {
        return Err(Error::Shape(format!(
            "class count {} vs {}",
            original.num_classes(),
            augmented.num_classes()
        )));
    }
    if original.sample_shape() != augmented.sample_shape() {
        return Err(Error::Shape(format!(
            "sample shape {:?} vs {:?}",
            original.sample_shape(),
            augmented.sample_shape()
        )));
    }
    let mut samples = original.samples().to_vec();
    samples.extend_from_slice(augmented.samples());
    let mut labels = original.labels().to_vec();
    labels.extend_from_slice(augmented.labels());
    let domains = match (original.domains(), augmented.domains()) {
        (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
        (None, None) => None,
        _ => {
            return Err(Error::Shape(
                "cannot merge a dataset with domain ids and one without".into(),
            ))
        }
    };
    LabeledDataset::new(
        original.name.clone(),
        samples,
        labels,
        domains,
        original.num_classes(),
    )
}
