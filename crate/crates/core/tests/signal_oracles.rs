use std::f64::consts::PI;

use phaser::signal::{dft, hanning, hilbert, idft, mag_phase, stft, StftConfig};
use phaser::TimeSeries;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct O(N²) summation of the forward DFT.
fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

/// Hilbert transform by direct summation: multiply by `−i·sgn(k)` and invert.
fn naive_hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let spec: Vec<(f64, f64)> = naive_dft(x)
        .into_iter()
        .enumerate()
        .map(|(k, (re, im))| {
            let s = if k == 0 || 2 * k == n {
                0.0
            } else if k < n / 2 {
                1.0
            } else {
                -1.0
            };
            // (−i·s)(re + i·im) = s·im − i·s·re
            (s * im, -s * re)
        })
        .collect();
    (0..n)
        .map(|t| {
            spec.iter().enumerate().fold(0.0, |acc, (k, &(re, im))| {
                let a = 2.0 * PI * (k * t) as f64 / n as f64;
                acc + re * a.cos() - im * a.sin()
            }) / n as f64
        })
        .collect()
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Removes DC and Nyquist content exactly through the naive oracle.
fn band_limit(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let nyq = x.iter().enumerate().map(|(t, v)| if t % 2 == 0 { *v } else { -*v }).sum::<f64>() / n as f64;
    x.iter()
        .enumerate()
        .map(|(t, v)| v - mean - if t % 2 == 0 { nyq } else { -nyq })
        .collect()
}

#[test]
fn dft_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [2, 4, 6, 32, 100, 128] {
        let x = random_signal(&mut rng, n);
        let fast = dft(&x).unwrap();
        for (k, (re, im)) in naive_dft(&x).into_iter().enumerate() {
            assert!((fast.re[k] - re).abs() < 1e-10 && (fast.im[k] - im).abs() < 1e-10);
        }
    }
}

#[test]
fn dft_examples() {
    let s = dft(&[1.0, 1.0, 1.0, 1.0]).unwrap();
    assert_eq!(s.re, vec![4.0, 0.0, 0.0, 0.0]);
    assert!(s.im.iter().all(|v| v.abs() < 1e-15));

    let x: Vec<f64> = (0..32).map(|n| (2.0 * PI * 3.0 * n as f64 / 32.0).cos()).collect();
    let mag = dft(&x).unwrap().magnitude();
    for (k, m) in mag.iter().enumerate() {
        let expected = if k == 3 || k == 29 { 16.0 } else { 0.0 };
        assert!((m - expected).abs() < 1e-10, "bin {k}: {m}");
    }
}

#[test]
fn inverse_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [4, 64, 128, 250] {
        let x = random_signal(&mut rng, n);
        assert!(rms(&idft(&dft(&x).unwrap()).unwrap(), &x) < 1e-12);
    }
}

#[test]
fn hilbert_matches_direct_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [4, 16, 64, 128] {
        let x = random_signal(&mut rng, n);
        assert!(rms(&hilbert(&x).unwrap(), &naive_hilbert(&x)) < 1e-10);
    }
}

#[test]
fn hilbert_turns_cosine_into_sine() {
    let n = 128;
    for bin in [1usize, 5, 17, 63] {
        let w = 2.0 * PI * bin as f64 / n as f64;
        let x: Vec<f64> = (0..n).map(|t| 2.0 * (w * t as f64).cos()).collect();
        let expected: Vec<f64> = (0..n).map(|t| 2.0 * (w * t as f64).sin()).collect();
        assert!(rms(&hilbert(&x).unwrap(), &expected) < 1e-9);
    }
}

#[test]
fn hilbert_annihilates_constants() {
    let h = hilbert(&[3.5; 16]).unwrap();
    assert!(h.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn hilbert_shifts_tone_phase_by_minus_half_pi() {
    let n = 64;
    let bin = 7;
    let x: Vec<f64> = (0..n)
        .map(|t| (2.0 * PI * bin as f64 * t as f64 / n as f64 + 0.4).cos())
        .collect();
    let a = dft(&x).unwrap();
    let b = dft(&hilbert(&x).unwrap()).unwrap();
    let d = b.im[bin].atan2(b.re[bin]) - a.im[bin].atan2(a.re[bin]);
    let wrapped = (d + PI).rem_euclid(2.0 * PI) - PI;
    assert!((wrapped + PI / 2.0).abs() < 1e-9);
}

#[test]
fn stft_impulse_and_shape() {
    let mut values = vec![0.0; 16];
    values[1] = 1.0;
    let x = TimeSeries::new(1, values, 1.0).unwrap();
    let s = stft(&x, &StftConfig::new(4, 8)).unwrap();
    assert_eq!(s.shape(), (1, 5, 4));
    assert!((hanning(4)[1] - 0.75).abs() < 1e-15);
    for k in 0..5 {
        assert!((s.at(0, k, 0).norm() - 0.75).abs() < 1e-14);
    }

    let x = TimeSeries::new(3, vec![0.1; 3 * 128], 1.0).unwrap();
    let s = stft(&x, &StftConfig::new(4, 1024)).unwrap();
    assert_eq!(s.shape(), (3, 513, 32));
}

#[test]
fn stft_frame_matches_direct_windowed_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values = random_signal(&mut rng, 40);
    let x = TimeSeries::new(1, values.clone(), 1.0).unwrap();
    let (seg, nfft) = (8, 16);
    let s = stft(&x, &StftConfig::new(seg, nfft)).unwrap();
    let w = hanning(seg);
    for n in 0..s.frames {
        let mut frame = vec![0.0; nfft];
        for m in 0..seg {
            frame[m] = values[n * seg + m] * w[m];
        }
        for (k, (re, im)) in naive_dft(&frame).into_iter().take(nfft / 2 + 1).enumerate() {
            let c = s.at(0, k, n);
            assert!((c.re - re).abs() < 1e-12 && (c.im - im).abs() < 1e-12);
        }
    }
}

#[test]
fn mag_phase_of_stft_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = TimeSeries::new(2, random_signal(&mut rng, 64), 1.0).unwrap();
    let s = stft(&x, &StftConfig::new(8, 16)).unwrap();
    let mp = mag_phase(&s).unwrap();
    for (i, c) in s.data.iter().enumerate() {
        assert!(mp.mag[i] >= 0.0);
        assert!(mp.pha[i] > -PI && mp.pha[i] <= PI);
        assert!((mp.mag[i] - c.norm()).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_any_signal(half in 1usize..100, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2 * half).map(|_| rng.random_range(-1e3..1e3)).collect();
        let back = idft(&dft(&x).unwrap()).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(rms(&back, &x) < 1e-12 * scale);
    }

    #[test]
    fn hilbert_invariants(seed in any::<u64>(), half in 2usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = band_limit(&random_signal(&mut rng, 2 * half));
        let h = hilbert(&x).unwrap();
        // magnitude preserved off DC/Nyquist
        let (a, b) = (dft(&x).unwrap().magnitude(), dft(&h).unwrap().magnitude());
        for k in 1..half {
            prop_assert!((a[k] - b[k]).abs() < 1e-9);
        }
        // orthogonality
        let dot: f64 = x.iter().zip(&h).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nh = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx > 1e-6 {
            prop_assert!(dot.abs() / (nx * nh) <= 1e-9);
        }
        // anti-involution
        let hh = hilbert(&h).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!(rms(&hh, &neg) < 1e-9);
    }

    #[test]
    fn stft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xv, yv) = (random_signal(&mut rng, 96), random_signal(&mut rng, 96));
        let zv: Vec<f64> = xv.iter().zip(&yv).map(|(p, q)| a * p + b * q).collect();
        let cfg = StftConfig::new(8, 16);
        let sx = stft(&TimeSeries::new(2, xv, 1.0).unwrap(), &cfg).unwrap();
        let sy = stft(&TimeSeries::new(2, yv, 1.0).unwrap(), &cfg).unwrap();
        let sz = stft(&TimeSeries::new(2, zv, 1.0).unwrap(), &cfg).unwrap();
        for i in 0..sz.data.len() {
            let d = sz.data[i] - (sx.data[i] * a + sy.data[i] * b);
            prop_assert!(d.norm() < 1e-10);
        }
    }
}
