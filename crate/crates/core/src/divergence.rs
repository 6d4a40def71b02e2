//! Rényi and β-divergences between per-timestep Gaussian domains, mixture
//! search over the source simplex, ensemble disagreement estimators and the
//! resulting unseen-domain risk bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-timestep mean and standard deviation of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTrack {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianTrack {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let t = Self { mu, sigma };
        t.validate()?;
        Ok(t)
    }

    pub fn constant(len: usize, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![mu; len], vec![sigma; len])
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.sigma.len() {
            return Err(Error::Shape(format!(
                "track has {} means but {} deviations",
                self.mu.len(),
                self.sigma.len()
            )));
        }
        if self.mu.is_empty() {
            return Err(Error::InvalidArgument("track must have at least one timestep".into()));
        }
        if self.mu.iter().chain(&self.sigma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian track"));
        }
        if let Some(t) = self.sigma.iter().position(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma at t={t} is not positive")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Simplex weights over a list of tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub tracks: Vec<GaussianTrack>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, tracks: Vec<GaussianTrack>) -> Result<Self> {
        if weights.len() != tracks.len() || tracks.is_empty() {
            return Err(Error::Shape(format!("{} weights for {} tracks", weights.len(), tracks.len())));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights {weights:?} are not on the simplex")));
        }
        check_same_length(&tracks)?;
        Ok(Self { weights, tracks })
    }

    pub fn density(&self, t: usize, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.tracks)
            .map(|(w, tr)| w * gaussian_pdf(x, tr.mu[t], tr.sigma[t]))
            .sum()
    }
}

fn check_same_length(tracks: &[GaussianTrack]) -> Result<usize> {
    for t in tracks {
        t.validate()?;
    }
    let len = tracks.first().map_or(0, GaussianTrack::len);
    if tracks.iter().any(|t| t.len() != len) {
        return Err(Error::Shape("tracks differ in length".into()));
    }
    Ok(len)
}

pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

fn check_order(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("order q = {q} must be positive")));
    }
    if q == 1.0 {
        return Err(Error::Domain("order q = 1 is singular".into()));
    }
    Ok(())
}

/// Alternative closed form
/// `q(μj−μi)² / (2(1−q)σi² + 2σj²) + ln(√((1−q)σi² + σj²) / (σi^{1−q} σj^q)) / (1−q)`.
///
/// Unlike [`renyi_gaussian_standard`] this is not zero for identical
/// Gaussians, and it is undefined when `(1−q)σi² + σj² ≤ 0`.
pub fn renyi_gaussian_verbatim(mu_i: f64, sigma_i: f64, mu_j: f64, sigma_j: f64, q: f64) -> Result<f64> {
    check_order(q)?;
    let comb = (1.0 - q) * sigma_i * sigma_i + sigma_j * sigma_j;
    if !(comb > 0.0) {
        return Err(Error::Domain(format!(
            "(1-q)σi² + σj² = {comb} is not positive (q={q}, σi={sigma_i}, σj={sigma_j})"
        )));
    }
    let dm = mu_j - mu_i;
    let first = q * dm * dm / (2.0 * comb);
    let second = (comb.sqrt() / (sigma_i.powf(1.0 - q) * sigma_j.powf(q))).ln() / (1.0 - q);
    Ok(first + second)
}

/// `D_q(N(μi,σi²) ‖ N(μj,σj²))` with `σ*² = qσj² + (1−q)σi²`:
/// `qΔμ²/(2σ*²) + ln(σ* / (σi^{1−q} σj^q)) / (1−q)`.
pub fn renyi_gaussian_standard(mu_i: f64, sigma_i: f64, mu_j: f64, sigma_j: f64, q: f64) -> Result<f64> {
    check_order(q)?;
    let vi = sigma_i * sigma_i;
    let var = vi + q * (sigma_j * sigma_j - vi);
    if !(var > 0.0) {
        return Err(Error::Domain(format!(
            "qσj² + (1-q)σi² = {var} is not positive (q={q}, σi={sigma_i}, σj={sigma_j})"
        )));
    }
    let dm = mu_j - mu_i;
    let first = q * dm * dm / (2.0 * var);
    // Ratios keep identical arguments at exactly zero.
    let second = (0.5 * (var / vi).ln() - q * (sigma_j / sigma_i).ln()) / (1.0 - q);
    Ok(first + second)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenyiForm {
    /// See [`renyi_gaussian_verbatim`].
    Verbatim,
    /// The textbook closed form, see [`renyi_gaussian_standard`].
    #[default]
    Standard,
}

impl RenyiForm {
    pub fn eval(self, mu_i: f64, sigma_i: f64, mu_j: f64, sigma_j: f64, q: f64) -> Result<f64> {
        match self {
            RenyiForm::Verbatim => renyi_gaussian_verbatim(mu_i, sigma_i, mu_j, sigma_j, q),
            RenyiForm::Standard => renyi_gaussian_standard(mu_i, sigma_i, mu_j, sigma_j, q),
        }
    }
}

impl std::str::FromStr for RenyiForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(RenyiForm::Verbatim),
            "standard" => Ok(RenyiForm::Standard),
            _ => Err(Error::InvalidArgument(format!("unknown divergence form {s:?}"))),
        }
    }
}

/// Uniform trapezoid grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    /// Odd, so every other node forms the half-resolution grid.
    pub points: usize,
}

pub const GRID_POINTS: usize = 20_001;
pub const GRID_SPAN_SIGMAS: f64 = 8.0;
/// Allowed `|1 − ∫density|` on the grid.
pub const MASS_TOL: f64 = 1e-10;
/// Allowed relative difference between full- and half-resolution integrals.
pub const REFINE_TOL: f64 = 1e-9;
/// Integrand at the grid ends relative to its peak above which the grid is too narrow.
pub const EDGE_TOL: f64 = 1e-8;

impl Grid {
    /// `[min μ − 8σmax, max μ + 8σmax]` with [`GRID_POINTS`] nodes.
    pub fn covering(mus: &[f64], sigmas: &[f64]) -> Self {
        let smax = sigmas.iter().copied().fold(0.0, f64::max);
        let lo = mus.iter().copied().fold(f64::INFINITY, f64::min) - GRID_SPAN_SIGMAS * smax;
        let hi = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max) + GRID_SPAN_SIGMAS * smax;
        Self {
            lo,
            hi,
            points: GRID_POINTS,
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.step();
        (0..self.points).map(move |i| self.lo + i as f64 * dx)
    }

    fn validate(&self) -> Result<()> {
        if self.points < 5 || self.points.is_multiple_of(2) || !(self.hi > self.lo) {
            return Err(Error::InvalidArgument(format!(
                "grid needs an odd number (≥5) of points on a nonempty interval, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Trapezoid rule on uniform samples; also returns the half-resolution value.
fn trapezoid(y: &[f64], dx: f64) -> (f64, f64) {
    let n = y.len();
    let full = dx * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1]));
    let coarse = 2.0 * dx * (y.iter().step_by(2).sum::<f64>() - 0.5 * (y[0] + y[n - 1]));
    (full, coarse)
}

fn check_mass(density: &[f64], dx: f64, which: &str) -> Result<()> {
    let (mass, _) = trapezoid(density, dx);
    if (1.0 - mass).abs() > MASS_TOL {
        return Err(Error::Quadrature(format!("{which} density has mass {mass} on the grid")));
    }
    Ok(())
}

/// `1/(q−1) · ln ∫ p^q r^{1−q}` from densities sampled on a common grid.
pub fn renyi_sampled(p: &[f64], r: &[f64], q: f64, dx: f64) -> Result<f64> {
    check_order(q)?;
    if p.len() != r.len() || p.len() < 5 {
        return Err(Error::Shape("densities must share a grid of at least 5 nodes".into()));
    }
    check_mass(p, dx, "first")?;
    check_mass(r, dx, "second")?;
    let mut integrand = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(r) {
        let v = if a == 0.0 {
            0.0
        } else if b == 0.0 {
            if q > 1.0 {
                return Err(Error::Quadrature("second density vanishes where the first does not".into()));
            }
            0.0
        } else {
            (q * a.ln() + (1.0 - q) * b.ln()).exp()
        };
        integrand.push(v);
    }
    let peak = integrand.iter().copied().fold(0.0, f64::max);
    if !peak.is_finite() || peak == 0.0 {
        return Err(Error::Quadrature(format!("integrand peak is {peak}")));
    }
    let edge = integrand[0].max(integrand[integrand.len() - 1]);
    if edge > EDGE_TOL * peak {
        return Err(Error::Quadrature(format!(
            "integrand not contained in the grid (edge/peak = {:e})",
            edge / peak
        )));
    }
    let (full, coarse) = trapezoid(&integrand, dx);
    if !(full > 0.0) || !full.is_finite() {
        return Err(Error::Quadrature(format!("integral evaluated to {full}")));
    }
    if (full - coarse).abs() > REFINE_TOL * full {
        return Err(Error::Quadrature(format!(
            "grid refinement changed the integral by {:e} (relative)",
            (full - coarse).abs() / full
        )));
    }
    Ok(full.ln() / (q - 1.0))
}

/// Trapezoid-rule Rényi divergence `D_q(p ‖ r)` of two densities on `grid`.
pub fn renyi_numeric(p: impl Fn(f64) -> f64, r: impl Fn(f64) -> f64, q: f64, grid: &Grid) -> Result<f64> {
    grid.validate()?;
    let ps: Vec<f64> = grid.nodes().map(&p).collect();
    let rs: Vec<f64> = grid.nodes().map(&r).collect();
    renyi_sampled(&ps, &rs, q, grid.step())
}

/// `2^{((q−1)/q)·rd}`.
pub fn beta_divergence(rd: f64, q: f64) -> f64 {
    2f64.powf((q - 1.0) / q * rd)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub source_i: usize,
    pub source_j: usize,
    pub t: usize,
    pub q: f64,
    pub form: RenyiForm,
}

/// Maximum per-timestep β-divergence over ordered pairs of distinct tracks.
/// Ties keep the lowest `(i, j, t)`.
pub fn epsilon_bound(tracks: &[GaussianTrack], q: f64, form: RenyiForm) -> Result<EpsilonReport> {
    if tracks.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 tracks, got {}", tracks.len())));
    }
    let len = check_same_length(tracks)?;
    let mut best: Option<EpsilonReport> = None;
    for (i, a) in tracks.iter().enumerate() {
        for (j, b) in tracks.iter().enumerate() {
            if i == j {
                continue;
            }
            for t in 0..len {
                let rd = form
                    .eval(a.mu[t], a.sigma[t], b.mu[t], b.sigma[t], q)
                    .map_err(|e| Error::Domain(format!("pair ({i}, {j}) at t={t}: {e}")))?;
                let beta = beta_divergence(rd, q);
                if best.as_ref().is_none_or(|b| beta > b.epsilon) {
                    best = Some(EpsilonReport {
                        epsilon: beta,
                        source_i: i,
                        source_j: j,
                        t,
                        q,
                        form,
                    });
                }
            }
        }
    }
    Ok(best.expect("at least one pair and timestep"))
}

/// Every simplex point whose coordinates are multiples of `1/(resolution−1)`,
/// in lexicographic order of the integer coordinates (first coordinate largest first).
pub fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(dim - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let steps = resolution - 1;
    let mut ints = Vec::new();
    rec(dim, steps, &mut Vec::new(), &mut ints);
    ints.into_iter()
        .map(|p| p.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosestMixture {
    pub mixture: MixtureSpec,
    /// Time-averaged `D_q(target ‖ mixture)` at the chosen weights.
    pub divergence: f64,
}

pub const MAX_SOURCES: usize = 4;
pub const MIN_RESOLUTION: usize = 11;

/// Exhaustive simplex-grid search for the mixture of `sources` closest to
/// `target` in time-averaged quadrature Rényi divergence. The first grid point
/// attaining the minimum wins.
pub fn closest_mixture(target: &GaussianTrack, sources: &[GaussianTrack], q: f64, resolution: usize) -> Result<ClosestMixture> {
    check_order(q)?;
    if sources.is_empty() || sources.len() > MAX_SOURCES {
        return Err(Error::InvalidArgument(format!(
            "need 1 to {MAX_SOURCES} sources, got {}",
            sources.len()
        )));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "grid resolution {resolution} below {MIN_RESOLUTION}"
        )));
    }
    let len = check_same_length(sources)?;
    target.validate()?;
    if target.len() != len {
        return Err(Error::Shape("target and sources differ in length".into()));
    }
    let candidates = simplex_grid(sources.len(), resolution);
    let mut totals = vec![0.0f64; candidates.len()];
    for t in 0..len {
        let mut mus: Vec<f64> = sources.iter().map(|s| s.mu[t]).collect();
        let mut sig: Vec<f64> = sources.iter().map(|s| s.sigma[t]).collect();
        mus.push(target.mu[t]);
        sig.push(target.sigma[t]);
        let grid = Grid::covering(&mus, &sig);
        let nodes: Vec<f64> = grid.nodes().collect();
        let p: Vec<f64> = nodes.iter().map(|&x| gaussian_pdf(x, target.mu[t], target.sigma[t])).collect();
        let comps: Vec<Vec<f64>> = sources
            .iter()
            .map(|s| nodes.iter().map(|&x| gaussian_pdf(x, s.mu[t], s.sigma[t])).collect())
            .collect();
        let mut mix = vec![0.0; nodes.len()];
        for (c, w) in candidates.iter().enumerate() {
            mix.iter_mut().for_each(|m| *m = 0.0);
            for (wk, comp) in w.iter().zip(&comps) {
                if *wk > 0.0 {
                    for (m, d) in mix.iter_mut().zip(comp) {
                        *m += wk * d;
                    }
                }
            }
            if totals[c].is_finite() {
                // A non-decaying integrand means the divergence is infinite at these weights.
                totals[c] += match renyi_sampled(&p, &mix, q, grid.step()) {
                    Ok(v) => v,
                    Err(Error::Quadrature(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
            }
        }
    }
    let best = totals
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < totals[b] { i } else { b });
    if !totals[best].is_finite() {
        return Err(Error::Quadrature(format!(
            "D_{q}(target ‖ mixture) is infinite or unresolvable for every grid mixture"
        )));
    }
    Ok(ClosestMixture {
        mixture: MixtureSpec::new(candidates[best].clone(), sources.to_vec())?,
        divergence: totals[best] / len as f64,
    })
}

/// `max_t β_q(target_t ‖ mixture_t)` with the divergence by quadrature.
pub fn mixture_epsilon(target: &GaussianTrack, mixture: &MixtureSpec, q: f64) -> Result<f64> {
    target.validate()?;
    let len = mixture.tracks[0].len();
    if target.len() != len {
        return Err(Error::Shape("target and mixture differ in length".into()));
    }
    let mut eps = f64::NEG_INFINITY;
    for t in 0..len {
        let mut mus: Vec<f64> = mixture.tracks.iter().map(|s| s.mu[t]).collect();
        let mut sig: Vec<f64> = mixture.tracks.iter().map(|s| s.sigma[t]).collect();
        mus.push(target.mu[t]);
        sig.push(target.sigma[t]);
        let grid = Grid::covering(&mus, &sig);
        let rd = renyi_numeric(
            |x| gaussian_pdf(x, target.mu[t], target.sigma[t]),
            |x| mixture.density(t, x),
            q,
            &grid,
        )
        .map_err(|e| Error::Quadrature(format!("t={t}: {e}")))?;
        eps = eps.max(beta_divergence(rd, q));
    }
    Ok(eps)
}

fn check_predictions(preds: &[Vec<usize>]) -> Result<usize> {
    if preds.len() < 2 {
        return Err(Error::InvalidArgument(format!("ensemble needs at least 2 members, got {}", preds.len())));
    }
    let n = preds[0].len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    if preds.iter().any(|p| p.len() != n) {
        return Err(Error::Shape("members predicted different numbers of samples".into()));
    }
    Ok(n)
}

/// Mean over samples and unordered pairs of distinct members of `I[h(x) ≠ h'(x)]`.
/// `preds[m][i]` is member `m`'s prediction for sample `i`.
pub fn expected_disagreement(preds: &[Vec<usize>]) -> Result<f64> {
    let n = check_predictions(preds)?;
    let mut count = 0usize;
    let mut pairs = 0usize;
    for a in 0..preds.len() {
        for b in a + 1..preds.len() {
            pairs += 1;
            count += preds[a].iter().zip(&preds[b]).filter(|(x, y)| x != y).count();
        }
    }
    Ok(count as f64 / (pairs * n) as f64)
}

/// Mean over samples and unordered pairs of distinct members of
/// `I[h(x) ≠ y] · I[h'(x) ≠ y]`.
pub fn expected_joint_error(preds: &[Vec<usize>], labels: &[usize]) -> Result<f64> {
    let n = check_predictions(preds)?;
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} predictions but {} labels", labels.len())));
    }
    let wrong: Vec<Vec<bool>> = preds
        .iter()
        .map(|p| p.iter().zip(labels).map(|(a, y)| a != y).collect())
        .collect();
    let mut count = 0usize;
    let mut pairs = 0usize;
    for a in 0..wrong.len() {
        for b in a + 1..wrong.len() {
            pairs += 1;
            count += wrong[a].iter().zip(&wrong[b]).filter(|(x, y)| **x && **y).count();
        }
    }
    Ok(count as f64 / (pairs * n) as f64)
}

/// Average member error rate (the risk of the uniform distribution over members).
pub fn gibbs_risk(preds: &[Vec<usize>], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || labels.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble or data".into()));
    }
    if preds.iter().any(|p| p.len() != labels.len()) {
        return Err(Error::Shape("prediction and label counts differ".into()));
    }
    let wrong: usize = preds
        .iter()
        .map(|p| p.iter().zip(labels).filter(|(a, y)| a != y).count())
        .sum();
    Ok(wrong as f64 / (preds.len() * labels.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskRhs {
    pub value: f64,
    /// Set when `ê = 0` meets a negative exponent (`q < 1`), making the value `+∞`.
    pub infinite: bool,
}

/// `0.5·d̂ + ε·ê^{1−1/q}`.
pub fn risk_bound_rhs(d_hat: f64, e_hat: f64, epsilon: f64, q: f64) -> RiskRhs {
    let exp = 1.0 - 1.0 / q;
    let term = if e_hat == 0.0 {
        if exp > 0.0 {
            0.0
        } else if exp == 0.0 {
            1.0
        } else {
            return RiskRhs {
                value: f64::INFINITY,
                infinite: true,
            };
        }
    } else {
        e_hat.powf(exp)
    };
    RiskRhs {
        value: 0.5 * d_hat + epsilon * term,
        infinite: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d_hat: f64,
    pub e_hat: f64,
    pub epsilon: f64,
    pub q: f64,
    pub rhs: f64,
    pub empirical_risk: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn new(d_hat: f64, e_hat: f64, epsilon: f64, q: f64, empirical_risk: f64) -> Self {
        let rhs = risk_bound_rhs(d_hat, e_hat, epsilon, q).value;
        Self {
            d_hat,
            e_hat,
            epsilon,
            q,
            rhs,
            empirical_risk,
            holds: empirical_risk <= rhs,
        }
    }

    pub const CSV_HEADER: [&'static str; 7] = ["d_hat", "e_hat", "epsilon", "q", "rhs", "empirical_risk", "holds"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.d_hat.to_string(),
            self.e_hat.to_string(),
            self.epsilon.to_string(),
            self.q.to_string(),
            self.rhs.to_string(),
            self.empirical_risk.to_string(),
            self.holds.to_string(),
        ]
    }
}

pub fn bound_reports_csv(reports: &[BoundReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BoundReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.into_inner()
        .map_err(|e| Error::Malformed(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verbatim_form_examples() {
        let v = renyi_gaussian_verbatim(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        assert!((v - 1.5f64.sqrt().ln() / 0.5).abs() < 1e-15);
        assert!((v - 0.40546).abs() < 1e-5);
        let v = renyi_gaussian_verbatim(0.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((v - 0.57213).abs() < 1e-4);
        assert!(matches!(renyi_gaussian_verbatim(0.0, 2.0, 0.0, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(renyi_gaussian_verbatim(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn standard_form_examples() {
        for q in [0.3, 0.5, 2.0, 4.0] {
            assert_eq!(renyi_gaussian_standard(0.7, 1.3, 0.7, 1.3, q).unwrap(), 0.0);
        }
        let v = renyi_gaussian_standard(0.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_divergence(0.0, 0.5), 1.0);
        assert_eq!(beta_divergence(0.0, 3.0), 1.0);
        assert!((beta_divergence(1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((beta_divergence(0.40546, 0.5) - 2f64.powf(-0.40546)).abs() < 1e-15);
        assert!((beta_divergence(0.40546, 0.5) - 0.754996).abs() < 1e-6);
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(risk_bound_rhs(0.0, 0.0, 1.0, 2.0).value, 0.0);
        assert!((risk_bound_rhs(0.2, 0.04, 1.5, 2.0).value - 0.4).abs() < 1e-12);
        let r = risk_bound_rhs(0.1, 0.0, 1.0, 0.5);
        assert!(r.infinite && r.value.is_infinite());
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(1, 11), vec![vec![1.0]]);
        assert_eq!(simplex_grid(2, 11).len(), 11);
        assert_eq!(simplex_grid(3, 11).len(), 66);
        assert_eq!(simplex_grid(4, 11).len(), 286);
        assert_eq!(simplex_grid(3, 11)[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn estimator_edge_cases() {
        let same = vec![vec![0, 1, 1], vec![0, 1, 1]];
        assert_eq!(expected_disagreement(&same).unwrap(), 0.0);
        let opp = vec![vec![0, 0, 1], vec![1, 1, 0]];
        assert_eq!(expected_disagreement(&opp).unwrap(), 1.0);
        let wrong = vec![vec![1, 1], vec![1, 1]];
        assert_eq!(expected_joint_error(&wrong, &[0, 0]).unwrap(), 1.0);
        assert!(expected_disagreement(&[vec![0]]).is_err());
        assert!(expected_disagreement(&[vec![], vec![]]).is_err());
    }

    #[test]
    fn epsilon_tie_break_and_errors() {
        let a = GaussianTrack::constant(3, 0.0, 1.0).unwrap();
        let b = GaussianTrack::constant(3, 1.0, 1.0).unwrap();
        let r = epsilon_bound(&[a.clone(), b], 2.0, RenyiForm::Standard).unwrap();
        assert_eq!((r.source_i, r.source_j, r.t), (0, 1, 0));
        assert!(epsilon_bound(&[a], 2.0, RenyiForm::Standard).is_err());
    }
}
