use phaser::stationarity::{adf_statistic, dataset_adf_summary, LagOrder, CRITICAL_5PCT};
use phaser::{LabeledDataset, TimeSeries};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// ADF t-ratio from explicit normal equations solved by Gauss-Jordan elimination.
fn oracle(y: &[f64], p: usize) -> (f64, Vec<f64>) {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let k = p + 2;
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    let mut rows = Vec::new();
    // Δy index j corresponds to y[j+1] − y[j]; regress Δy_j on y[j] and Δy_{j−1..j−p}.
    for j in p..dy.len() {
        let mut x = vec![1.0, y[j]];
        for i in 1..=p {
            x.push(dy[j - i]);
        }
        for a in 0..k {
            for b in 0..k {
                xtx[a][b] += x[a] * x[b];
            }
            xty[a] += x[a] * dy[j];
        }
        rows.push((x, dy[j]));
    }
    // invert X'X
    let mut aug: Vec<Vec<f64>> = xtx
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            r.extend((0..k).map(|c| if c == i { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..k {
            if r != col {
                let f = aug[r][col];
                let pivot_row = aug[col].clone();
                aug[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    let inv: Vec<Vec<f64>> = aug.iter().map(|r| r[k..].to_vec()).collect();
    let beta: Vec<f64> = (0..k).map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let rss: f64 = rows
        .iter()
        .map(|(x, t)| {
            let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (t - fit).powi(2)
        })
        .sum();
    let s2 = rss / (rows.len() - k) as f64;
    (beta[1] / (s2 * inv[1][1]).sqrt(), beta)
}

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        prev = phi * prev + e;
        y.push(prev);
    }
    y
}

#[test]
fn statistic_and_coefficients_match_normal_equations() {
    for seed in 0..10 {
        for (phi, p) in [(0.5, 0), (0.5, 3), (1.0, 2), (1.0, LagOrder::Auto.resolve(500))] {
            let y = ar1(phi, 500, seed);
            let r = adf_statistic(&y, LagOrder::Fixed(p)).unwrap();
            let (stat, beta) = oracle(&y, p);
            assert!((r.statistic - stat).abs() < 1e-8, "seed {seed} phi {phi} p {p}");
            for (a, b) in r.coefficients.iter().zip(&beta) {
                assert!((a - b).abs() < 1e-8);
            }
            assert_eq!(r.n_obs, 500 - p - 1);
        }
    }
}

#[test]
fn ar1_rejects_and_random_walk_does_not() {
    let mut reject = 0;
    let mut keep = 0;
    let mut ordered = 0;
    for seed in 0..20 {
        let s = adf_statistic(&ar1(0.5, 500, 100 + seed), LagOrder::Auto).unwrap();
        let w = adf_statistic(&ar1(1.0, 500, 200 + seed), LagOrder::Auto).unwrap();
        reject += usize::from(s.statistic < CRITICAL_5PCT);
        keep += usize::from(w.statistic > CRITICAL_5PCT);
        ordered += usize::from(s.statistic < w.statistic);
        assert_eq!(s.reject_at_5pct, s.statistic < CRITICAL_5PCT);
    }
    assert!(reject >= 18, "{reject}");
    assert!(keep >= 18, "{keep}");
    assert!(ordered >= 18, "{ordered}");
}

#[test]
fn constant_series_is_an_error() {
    assert!(adf_statistic(&[2.0; 100], LagOrder::Auto).is_err());
    assert!(adf_statistic(&[1.0, 2.0, 3.0], LagOrder::Fixed(0)).is_err());
}

fn dataset(series: Vec<Vec<f64>>) -> LabeledDataset {
    let n = series.len();
    let samples = series.into_iter().map(|s| TimeSeries::new(1, s, 1.0).unwrap()).collect();
    LabeledDataset::new("d", samples, vec![0; n], None, 1).unwrap()
}

#[test]
fn summary_is_the_mean_of_sample_statistics() {
    let a = ar1(0.5, 200, 1);
    let b = ar1(0.9, 200, 2);
    let sa = adf_statistic(&a, LagOrder::Auto).unwrap().statistic;
    let sb = adf_statistic(&b, LagOrder::Auto).unwrap().statistic;
    let same = dataset_adf_summary(&dataset(vec![a.clone(), a.clone(), a.clone()]), LagOrder::Auto).unwrap();
    assert!((same[0] - sa).abs() < 1e-12);
    let two = dataset_adf_summary(&dataset(vec![a, b]), LagOrder::Auto).unwrap();
    assert!((two[0] - (sa + sb) / 2.0).abs() < 1e-12);
}

#[test]
fn white_noise_summary_is_strongly_negative() {
    let series: Vec<Vec<f64>> = (0..20).map(|s| ar1(0.0, 500, 300 + s)).collect();
    let ds = dataset(series.clone());
    let summary = dataset_adf_summary(&ds, LagOrder::Fixed(1)).unwrap()[0];
    let oracle_mean = series.iter().map(|y| oracle(y, 1).0).sum::<f64>() / 20.0;
    assert!((summary - oracle_mean).abs() < 1e-8);
    assert!(summary < -10.0, "{summary}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scale_invariance(seed in any::<u64>(), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let y = ar1(0.7, 120, seed);
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        let a = adf_statistic(&y, LagOrder::Auto).unwrap().statistic;
        let b = adf_statistic(&scaled, LagOrder::Auto).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
