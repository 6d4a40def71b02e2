use phaser::divergence::{
    beta_divergence, bound_reports_csv, closest_mixture, epsilon_bound, expected_disagreement, expected_joint_error,
    gaussian_pdf, gibbs_risk, mixture_epsilon, renyi_gaussian_verbatim, renyi_gaussian_standard, renyi_numeric,
    risk_bound_rhs, simplex_grid, BoundReport, Grid, MixtureSpec,
};
use phaser::{Error, GaussianTrack, RenyiForm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite Simpson rule for `(1/(q−1)) ln ∫ p^q r^{1−q}` on `[lo, hi]`.
fn simpson_renyi(p: impl Fn(f64) -> f64, r: impl Fn(f64) -> f64, q: f64, lo: f64, hi: f64) -> f64 {
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| {
        let (a, b) = (p(x), r(x));
        if a == 0.0 {
            0.0
        } else {
            (q * a.ln() + (1.0 - q) * b.ln()).exp()
        }
    };
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * h / 3.0).ln() / (q - 1.0)
}

fn covering(mus: &[f64], sigmas: &[f64]) -> Grid {
    Grid::covering(mus, sigmas)
}

/// The integrand `p^q r^{1−q}` of two Gaussians is itself Gaussian-shaped with
/// this centre and spread; draws are kept when it sits well inside the grid.
fn integrand_inside_grid(mi: f64, si: f64, mj: f64, sj: f64, q: f64) -> bool {
    let var = q * sj * sj + (1.0 - q) * si * si;
    if var <= 0.0 {
        return false;
    }
    let centre = (q * sj * sj * mi + (1.0 - q) * si * si * mj) / var;
    let spread = si * sj / var.sqrt();
    let g = covering(&[mi, mj], &[si, sj]);
    centre - 8.0 * spread > g.lo && centre + 8.0 * spread < g.hi
}

#[test]
fn closed_forms_match_quadrature_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for q in [0.5, 2.0, 4.0] {
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 50 {
            attempts += 1;
            assert!(attempts < 5000, "too few admissible draws at q={q}");
            let (mi, mj) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (si, sj) = (rng.random_range(0.6..1.4), rng.random_range(0.6..1.4));
            if !integrand_inside_grid(mi, si, mj, sj, q) {
                continue;
            }
            accepted += 1;
            let closed = renyi_gaussian_standard(mi, si, mj, sj, q).unwrap();
            let grid = covering(&[mi, mj], &[si, sj]);
            let quad = renyi_numeric(|x| gaussian_pdf(x, mi, si), |x| gaussian_pdf(x, mj, sj), q, &grid).unwrap();
            let simpson = simpson_renyi(
                |x| gaussian_pdf(x, mi, si),
                |x| gaussian_pdf(x, mj, sj),
                q,
                grid.lo,
                grid.hi,
            );
            assert!((closed - quad).abs() < 1e-6, "q={q}: {closed} vs {quad}");
            assert!((closed - simpson).abs() < 1e-6, "q={q}: {closed} vs {simpson}");
        }
    }
}

#[test]
fn closed_form_examples() {
    let v = renyi_gaussian_verbatim(0.0, 1.0, 1.0, 1.0, 0.5).unwrap();
    assert!((v - 0.57213).abs() < 1e-4);
    let v = renyi_gaussian_verbatim(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
    assert!((v - 0.40546).abs() < 1e-5);
    assert!(matches!(renyi_gaussian_verbatim(0.0, 2.0, 0.0, 1.0, 2.0), Err(Error::Domain(_))));

    for q in [0.3, 0.5, 2.0, 4.0] {
        assert_eq!(renyi_gaussian_standard(0.7, 1.3, 0.7, 1.3, q).unwrap(), 0.0);
        assert_eq!(beta_divergence(0.0, q), 1.0);
    }
    assert!((renyi_gaussian_standard(0.0, 1.0, 1.0, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
    assert!(renyi_gaussian_standard(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
    assert!(renyi_gaussian_standard(0.0, 1.0, 0.0, 1.0, -2.0).is_err());
    assert!((beta_divergence(1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
    assert!((RenyiForm::Verbatim.eval(0.0, 1.0, 1.0, 1.0, 0.5).unwrap() - v - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn quadrature_identities_and_mixtures() {
    let grid = covering(&[0.0], &[1.0]);
    for q in [0.5, 2.0, 3.0] {
        let d = renyi_numeric(|x| gaussian_pdf(x, 0.0, 1.0), |x| gaussian_pdf(x, 0.0, 1.0), q, &grid).unwrap();
        assert!(d.abs() < 1e-10);
    }

    let two = MixtureSpec::new(
        vec![0.3, 0.7],
        vec![GaussianTrack::constant(1, -0.5, 1.0).unwrap(), GaussianTrack::constant(1, 0.8, 1.2).unwrap()],
    )
    .unwrap();
    let three = MixtureSpec::new(
        vec![0.2, 0.5, 0.3],
        vec![
            GaussianTrack::constant(1, -1.0, 1.1).unwrap(),
            GaussianTrack::constant(1, 0.0, 1.0).unwrap(),
            GaussianTrack::constant(1, 1.0, 1.2).unwrap(),
        ],
    )
    .unwrap();
    let grid = covering(&[-1.0, 1.0], &[1.2]);
    let d = renyi_numeric(|x| two.density(0, x), |x| three.density(0, x), 2.0, &grid).unwrap();
    let s = simpson_renyi(|x| two.density(0, x), |x| three.density(0, x), 2.0, grid.lo, grid.hi);
    assert!(d.is_finite() && d > 0.0);
    assert!((d - s).abs() < 1e-8);

    // a grid that cuts off mass is refused rather than silently wrong
    let narrow = Grid { lo: -1.0, hi: 1.0, points: 2001 };
    let r = renyi_numeric(|x| gaussian_pdf(x, 0.0, 1.0), |x| gaussian_pdf(x, 0.0, 1.0), 2.0, &narrow);
    assert!(matches!(r, Err(Error::Quadrature(_))));
    let even = Grid { lo: -9.0, hi: 9.0, points: 2000 };
    assert!(renyi_numeric(|x| gaussian_pdf(x, 0.0, 1.0), |x| gaussian_pdf(x, 0.0, 1.0), 2.0, &even).is_err());
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    w
}

#[test]
fn mixtures_inside_the_hull_stay_within_the_pairwise_maximum() {
    let q = 2.0;
    let sources = [(-0.3, 1.0), (0.0, 1.05), (0.3, 1.1)];
    let tracks: Vec<GaussianTrack> = sources.iter().map(|&(m, s)| GaussianTrack::constant(1, m, s).unwrap()).collect();
    let mus: Vec<f64> = sources.iter().map(|s| s.0).collect();
    let sig: Vec<f64> = sources.iter().map(|s| s.1).collect();
    let grid = covering(&mus, &sig);

    let mut max_pair = f64::NEG_INFINITY;
    for (i, a) in sources.iter().enumerate() {
        for (j, b) in sources.iter().enumerate() {
            if i != j {
                let rd = renyi_numeric(|x| gaussian_pdf(x, a.0, a.1), |x| gaussian_pdf(x, b.0, b.1), q, &grid).unwrap();
                max_pair = max_pair.max(beta_divergence(rd, q));
            }
        }
    }
    let report = epsilon_bound(&tracks, q, RenyiForm::Standard).unwrap();
    assert!((report.epsilon - max_pair).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let a = MixtureSpec::new(random_weights(&mut rng, 3), tracks.clone()).unwrap();
        let b = MixtureSpec::new(random_weights(&mut rng, 3), tracks.clone()).unwrap();
        let rd = renyi_numeric(|x| a.density(0, x), |x| b.density(0, x), q, &grid).unwrap();
        assert!(beta_divergence(rd, q) <= max_pair + 1e-6, "{:?} {:?}", a.weights, b.weights);
    }
}

#[test]
fn epsilon_bound_examples() {
    // the verbatim form has (1−q)σ² + σ² = 0 for identical tracks at q = 2
    let same = vec![GaussianTrack::constant(4, 0.0, 1.0).unwrap(); 2];
    assert!(matches!(epsilon_bound(&same, 2.0, RenyiForm::Verbatim), Err(Error::Domain(_))));
    let r = epsilon_bound(&same, 0.5, RenyiForm::Verbatim).unwrap();
    let per_t = beta_divergence(renyi_gaussian_verbatim(0.0, 1.0, 0.0, 1.0, 0.5).unwrap(), 0.5);
    assert_eq!(r.epsilon, per_t);
    assert_eq!((r.source_i, r.source_j, r.t), (0, 1, 0));

    let a = GaussianTrack::constant(8, 0.0, 1.0).unwrap();
    let mut b = a.clone();
    b.mu[5] = 0.6;
    let r = epsilon_bound(&[a.clone(), b.clone()], 2.0, RenyiForm::Standard).unwrap();
    assert_eq!(r.t, 5);
    assert_eq!(r.epsilon, beta_divergence(renyi_gaussian_standard(0.0, 1.0, 0.6, 1.0, 2.0).unwrap(), 2.0));

    let x = GaussianTrack::constant(1, 0.2, 0.9).unwrap();
    let y = GaussianTrack::constant(1, -0.3, 1.1).unwrap();
    let r = epsilon_bound(&[x, y], 0.5, RenyiForm::Verbatim).unwrap();
    let forward = beta_divergence(renyi_gaussian_verbatim(0.2, 0.9, -0.3, 1.1, 0.5).unwrap(), 0.5);
    let backward = beta_divergence(renyi_gaussian_verbatim(-0.3, 1.1, 0.2, 0.9, 0.5).unwrap(), 0.5);
    assert_eq!(r.epsilon, forward.max(backward));

    assert!(epsilon_bound(std::slice::from_ref(&a), 2.0, RenyiForm::Standard).is_err());
    let short = GaussianTrack::constant(3, 0.0, 1.0).unwrap();
    assert!(epsilon_bound(&[a, short], 2.0, RenyiForm::Standard).is_err());
}

/// Time-averaged divergence of every grid mixture, by the Simpson oracle.
fn brute_force_argmin(target: &GaussianTrack, sources: &[GaussianTrack], q: f64, resolution: usize) -> Vec<f64> {
    let candidates = simplex_grid(sources.len(), resolution);
    let mut best = (f64::INFINITY, candidates[0].clone());
    for w in candidates {
        let mut total = 0.0;
        for t in 0..target.len() {
            let mus: Vec<f64> = sources.iter().map(|s| s.mu[t]).chain([target.mu[t]]).collect();
            let sig: Vec<f64> = sources.iter().map(|s| s.sigma[t]).chain([target.sigma[t]]).collect();
            let g = covering(&mus, &sig);
            let mix = |x: f64| w.iter().zip(sources).map(|(wk, s)| wk * gaussian_pdf(x, s.mu[t], s.sigma[t])).sum::<f64>();
            total += simpson_renyi(|x| gaussian_pdf(x, target.mu[t], target.sigma[t]), mix, q, g.lo, g.hi);
        }
        if total < best.0 - 1e-9 {
            best = (total, w);
        }
    }
    best.1
}

#[test]
fn closest_mixture_examples() {
    let s0 = GaussianTrack::new(vec![0.0, 0.2, 0.1], vec![1.0, 1.1, 0.9]).unwrap();
    let s1 = GaussianTrack::new(vec![1.0, 0.8, 1.2], vec![1.0, 1.0, 1.1]).unwrap();
    let s2 = GaussianTrack::new(vec![-0.5, 0.0, 0.4], vec![1.2, 0.9, 1.0]).unwrap();
    let sources = vec![s0.clone(), s1.clone(), s2];

    let m = closest_mixture(&s0, &sources, 2.0, 11).unwrap();
    assert_eq!(m.mixture.weights, vec![1.0, 0.0, 0.0]);
    assert!(m.divergence.abs() < 1e-10);

    let near = GaussianTrack::new(vec![0.1, 0.3, 0.0], vec![1.0, 1.1, 0.9]).unwrap();
    let m = closest_mixture(&near, &sources[..1], 2.0, 11).unwrap();
    assert_eq!(m.mixture.weights, vec![1.0]);

    let a = GaussianTrack::constant(2, -1.0, 1.0).unwrap();
    let b = GaussianTrack::constant(2, 1.0, 1.0).unwrap();
    let mid = GaussianTrack::constant(2, 0.0, 1.0).unwrap();
    let m = closest_mixture(&mid, &[a, b], 2.0, 11).unwrap();
    assert!((m.mixture.weights[0] - 0.5).abs() < 1e-12);

    let target = GaussianTrack::new(vec![0.4, 0.5, 0.3], vec![1.05, 1.0, 1.0]).unwrap();
    let m = closest_mixture(&target, &sources, 0.5, 11).unwrap();
    let oracle = brute_force_argmin(&target, &sources, 0.5, 11);
    for (a, b) in m.mixture.weights.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{:?} vs {oracle:?}", m.mixture.weights);
    }

    assert!(closest_mixture(&target, &sources, 2.0, 5).is_err());
    assert!(closest_mixture(&target, &vec![s1; 5], 2.0, 11).is_err());
}

#[test]
fn mixture_epsilon_of_a_hull_member_is_one() {
    let s0 = GaussianTrack::constant(3, 0.0, 1.0).unwrap();
    let s1 = GaussianTrack::constant(3, 0.5, 1.1).unwrap();
    let mix = MixtureSpec::new(vec![1.0, 0.0], vec![s0.clone(), s1.clone()]).unwrap();
    assert!((mixture_epsilon(&s0, &mix, 2.0).unwrap() - 1.0).abs() < 1e-9);
    let far = GaussianTrack::constant(3, 1.5, 1.0).unwrap();
    assert!(mixture_epsilon(&far, &mix, 2.0).unwrap() > 1.0);
}

#[test]
fn simplex_grid_cardinality_and_order() {
    // C(r + d − 2, d − 1) points for resolution r and dimension d
    assert_eq!(simplex_grid(2, 11).len(), 11);
    assert_eq!(simplex_grid(3, 11).len(), 66);
    assert_eq!(simplex_grid(4, 11).len(), 286);
    assert_eq!(simplex_grid(3, 11)[0], vec![1.0, 0.0, 0.0]);
    for p in simplex_grid(3, 11) {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

/// Counts over every unordered pair by explicit enumeration.
fn brute_pairs(preds: &[Vec<usize>], labels: &[usize]) -> (f64, f64) {
    let (mut dis, mut joint, mut cnt) = (0.0, 0.0, 0.0);
    for a in 0..preds.len() {
        for b in 0..preds.len() {
            if a >= b {
                continue;
            }
            for i in 0..labels.len() {
                cnt += 1.0;
                dis += f64::from(u8::from(preds[a][i] != preds[b][i]));
                joint += f64::from(u8::from(preds[a][i] != labels[i] && preds[b][i] != labels[i]));
            }
        }
    }
    (dis / cnt, joint / cnt)
}

#[test]
fn estimator_examples() {
    let same = vec![vec![0, 1, 1, 0]; 2];
    assert_eq!(expected_disagreement(&same).unwrap(), 0.0);
    let opposite = vec![vec![0, 0, 0], vec![1, 1, 1]];
    assert_eq!(expected_disagreement(&opposite).unwrap(), 1.0);
    let wrong = vec![vec![0, 0, 0], vec![2, 2, 2]];
    assert_eq!(expected_joint_error(&wrong, &[1, 1, 1]).unwrap(), 1.0);

    let preds = vec![vec![0, 1, 2, 1], vec![0, 2, 2, 0], vec![1, 2, 2, 0]];
    let labels = [0, 1, 2, 0];
    let (d, e) = brute_pairs(&preds, &labels);
    assert!((expected_disagreement(&preds).unwrap() - d).abs() < 1e-15);
    assert!((expected_joint_error(&preds, &labels).unwrap() - e).abs() < 1e-15);
    // pairs (a,b), (a,c), (b,c) disagree on 2, 3 and 1 points; only (b,c) share an error
    assert!((d - 6.0 / 12.0).abs() < 1e-15);
    assert!((e - 1.0 / 12.0).abs() < 1e-15);
    assert!((gibbs_risk(&preds, &labels).unwrap() - 4.0 / 12.0).abs() < 1e-15);

    assert!(expected_disagreement(&preds[..1]).is_err());
    assert!(expected_disagreement(&[vec![], vec![]]).is_err());
    assert!(expected_joint_error(&preds, &labels[..3]).is_err());
}

#[test]
fn risk_bound_examples() {
    assert_eq!(risk_bound_rhs(0.0, 0.0, 1.0, 2.0).value, 0.0);
    assert!((risk_bound_rhs(0.2, 0.04, 1.5, 2.0).value - 0.4).abs() < 1e-15);
    let r = risk_bound_rhs(0.1, 0.0, 1.0, 0.5);
    assert!(r.infinite && r.value.is_infinite());

    let rep = BoundReport::new(0.2, 0.04, 1.5, 2.0, 0.3);
    assert!(rep.holds);
    let csv = String::from_utf8(bound_reports_csv(&[rep]).unwrap()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "d_hat,e_hat,epsilon,q,rhs,empirical_risk,holds");
    assert_eq!(csv.lines().count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn beta_is_monotone_in_rd(a in 0.0f64..20.0, b in 0.0f64..20.0, q in prop_oneof![0.1f64..0.95, 1.05f64..6.0]) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if q > 1.0 {
            prop_assert!(beta_divergence(lo, q) < beta_divergence(hi, q));
        } else {
            prop_assert!(beta_divergence(lo, q) > beta_divergence(hi, q));
        }
    }

    #[test]
    fn estimators_ignore_member_order(seed in any::<u64>(), m in 2usize..6, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let preds: Vec<Vec<usize>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(0..3)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let mut shuffled = preds.clone();
        shuffled.rotate_left(1);
        shuffled.swap(0, m - 1);
        prop_assert_eq!(expected_disagreement(&preds).unwrap(), expected_disagreement(&shuffled).unwrap());
        prop_assert_eq!(
            expected_joint_error(&preds, &labels).unwrap(),
            expected_joint_error(&shuffled, &labels).unwrap()
        );
        let (d, e) = brute_pairs(&preds, &labels);
        prop_assert!((expected_disagreement(&preds).unwrap() - d).abs() < 1e-12);
        prop_assert!((expected_joint_error(&preds, &labels).unwrap() - e).abs() < 1e-12);
        let dh = expected_disagreement(&preds).unwrap();
        prop_assert!((0.0..=1.0).contains(&dh));
    }

    #[test]
    fn standard_form_is_nonnegative(mi in -2.0f64..2.0, mj in -2.0f64..2.0, si in 0.5f64..2.0, sj in 0.5f64..2.0, q in 0.1f64..0.95) {
        prop_assert!(renyi_gaussian_standard(mi, si, mj, sj, q).unwrap() >= -1e-15);
    }
}
