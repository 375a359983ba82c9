//! End-to-end checks of the diagnose → cluster → PSIS → stack → combine
//! pipeline on the Cauchy test bed, with a grid-quadrature oracle for the
//! leave-one-out densities.

use chainstack_core::cauchy::{
    generate_data, log_cauchy, log_posterior, simulate_chains, CauchyScenario,
};
use chainstack_core::combine::{thin_resample, weighted_expectation, WeightedDrawSet};
use chainstack_core::diagnostics::{cluster_chains, merge_clusters, pairwise_mixing, SummaryBy};
use chainstack_core::draws::{DrawSet, EstimandSeries};
use chainstack_core::psis::loo_matrix;
use chainstack_core::stacking::{monitor_curve, optimize_weights, StackingConfig};

fn cauchy_fixture(seed: u64, n: usize, p0: f64, step: f64) -> (CauchyScenario, Vec<f64>, DrawSet) {
    let sc = CauchyScenario::new(10.0, p0, n, seed).unwrap();
    let data = generate_data(&sc);
    let runs = simulate_chains(&sc, &data, 8, 4000, 1000, step).unwrap();
    let ds = DrawSet::assemble(runs.into_iter().map(|r| r.chain).collect()).unwrap();
    (sc, data, ds)
}

/// Exact LOO of a mode-restricted posterior by dense grid quadrature:
/// p(y_i|y_−i) = 1 / Σ_g q_g / p(y_i|μ_g) with q_g the normalized
/// posterior masses over the mode's basin (the harmonic-mean identity that
/// follows from reweighting the stationary distribution by 1/p(y_i|θ)).
fn grid_loo(data: &[f64], lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let grid: Vec<f64> = (0..points)
        .map(|j| lo + j as f64 * ((hi - lo) / (points - 1) as f64))
        .collect();
    let lp: Vec<f64> = grid.iter().map(|&mu| log_posterior(data, mu)).collect();
    let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = lp.iter().map(|l| (l - m).exp()).collect();
    let qsum: f64 = q.iter().sum();
    data.iter()
        .map(|&y| {
            let denom: f64 = grid
                .iter()
                .zip(&q)
                .map(|(&mu, &qg)| qg / qsum / log_cauchy(y, mu).exp())
                .sum();
            1.0 / denom
        })
        .collect()
}

#[test]
fn eight_chain_fixture_assembles() {
    let (_, _, ds) = cauchy_fixture(12, 100, 0.5, 0.5);
    assert_eq!(ds.n_chains(), 8);
    assert_eq!(ds.n_obs(), 100);
    assert!(ds.draw_counts().iter().all(|&s| s == 4000));
}

#[test]
fn pairwise_mixing_separates_modes_and_clusters_four_by_four() {
    let (_, _, ds) = cauchy_fixture(12, 100, 0.5, 0.5);
    let mix = pairwise_mixing(&ds, SummaryBy::MeanLogLik).unwrap();
    // side of each chain from its parameter draws
    let sides: Vec<bool> = ds
        .chains()
        .iter()
        .map(|c| {
            let mus = c.param_series(0).unwrap();
            mus.iter().sum::<f64>() > 0.0
        })
        .collect();
    for j in 0..8 {
        for k in j + 1..8 {
            if sides[j] != sides[k] {
                assert!(mix[j][k] > 1.1, "({j},{k}): {}", mix[j][k]);
            } else {
                assert!(mix[j][k] < 1.05, "({j},{k}): {}", mix[j][k]);
            }
        }
    }
    let ca = cluster_chains(&mix, 1.05).unwrap();
    assert_eq!(ca.n_clusters(), 2);
    assert_eq!(ca.members(0).len(), 4);
    assert_eq!(ca.members(1).len(), 4);

    let merged = merge_clusters(&ds, &ca).unwrap();
    assert_eq!(merged.n_chains(), 2);
    assert_eq!(merged.draw_counts(), vec![16_000, 16_000]);
}

#[test]
fn psis_loo_matches_grid_quadrature_oracle() {
    let (_, data, ds) = cauchy_fixture(42, 100, 0.5, 0.5);
    let mix = pairwise_mixing(&ds, SummaryBy::MeanLogLik).unwrap();
    let ca = cluster_chains(&mix, 1.05).unwrap();
    let merged = merge_clusters(&ds, &ca).unwrap();
    let loo = loo_matrix(&merged).unwrap();

    // right-mode cluster column against the dense-grid oracle
    let right_k = (0..merged.n_chains())
        .find(|&k| {
            let mus = merged.chain(k).param_series(0).unwrap();
            mus.iter().sum::<f64>() > 0.0
        })
        .unwrap();
    let oracle = grid_loo(&data, 0.5, 20.0, 40_000);
    // checked on ten held-out observations
    for i in (0..100).step_by(10) {
        let psis = loo.loo(i, right_k);
        let rel = (psis - oracle[i]).abs() / oracle[i];
        assert!(
            rel < 0.05,
            "obs {i}: psis {psis} oracle {} rel {rel}",
            oracle[i]
        );
    }
    // all Pareto shapes in the reliable regime
    let bins = loo.khat_bins();
    assert_eq!(bins.good, bins.total(), "khat bins {bins:?}");
}

#[test]
fn stacked_positive_mass_across_seeds() {
    for seed in [7, 8, 9] {
        let (_, _, ds) = cauchy_fixture(seed, 100, 0.5, 0.5);
        let mix = pairwise_mixing(&ds, SummaryBy::MeanLogLik).unwrap();
        let ca = cluster_chains(&mix, 1.05).unwrap();
        let merged = merge_clusters(&ds, &ca).unwrap();
        let loo = loo_matrix(&merged).unwrap();
        let sol = optimize_weights(&loo, &StackingConfig::default()).unwrap();
        let h: Vec<EstimandSeries> = merged
            .chains()
            .iter()
            .map(|c| {
                EstimandSeries::from_params(c, |p| if p[0] > 0.0 { 1.0 } else { 0.0 }).unwrap()
            })
            .collect();
        let wds = WeightedDrawSet::new(merged, sol.weights).unwrap();
        let pr = weighted_expectation(&wds, &h).unwrap();
        assert!(
            (0.40..=0.62).contains(&pr),
            "seed {seed}: Pr(mu>0|y) = {pr}"
        );
    }
}

#[test]
fn stacked_weights_and_positive_mass_are_balanced() {
    let (_, _, ds) = cauchy_fixture(12345, 100, 0.5, 0.5);
    let mix = pairwise_mixing(&ds, SummaryBy::MeanLogLik).unwrap();
    let ca = cluster_chains(&mix, 1.05).unwrap();
    let merged = merge_clusters(&ds, &ca).unwrap();
    let loo = loo_matrix(&merged).unwrap();
    let sol = optimize_weights(&loo, &StackingConfig::default()).unwrap();
    for &w in sol.weights.as_slice() {
        assert!(
            (0.35..=0.65).contains(&w),
            "weights {:?}",
            sol.weights.as_slice()
        );
    }

    // stacked Pr(mu > 0 | y) via the weighted Monte Carlo estimate
    let h: Vec<EstimandSeries> = merged
        .chains()
        .iter()
        .map(|c| EstimandSeries::from_params(c, |p| if p[0] > 0.0 { 1.0 } else { 0.0 }).unwrap())
        .collect();
    let wds = WeightedDrawSet::new(merged, sol.weights).unwrap();
    let pr = weighted_expectation(&wds, &h).unwrap();
    assert!((0.35..=0.65).contains(&pr), "Pr(mu>0|y) = {pr}");

    // thinning the stacked set keeps the estimate close
    let plan = thin_resample(&wds, 8000, 77).unwrap();
    assert_eq!(plan.s_thin(), 8000);
}

#[test]
fn monitor_curve_plateaus_once_both_modes_are_covered() {
    let (_, _, ds) = cauchy_fixture(3, 100, 0.5, 0.5);
    // no clustering: K' runs over chains in init order (first 4 left-mode)
    let loo = loo_matrix(&ds).unwrap();
    // per-chain ratios (S = 4000) are reliable: every khat below 0.5
    let bins = loo.khat_bins();
    assert_eq!(bins.good, bins.total(), "khat bins {bins:?}");
    let order: Vec<usize> = (0..8).collect();
    let curve = monitor_curve(&loo, &StackingConfig::default(), &order).unwrap();
    let diffs: Vec<f64> = curve.lpd_loo.windows(2).map(|w| w[1] - w[0]).collect();
    let (jump_at, jump) = diffs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    // the jump happens when the first right-mode chain (index 4) enters
    assert_eq!(jump_at, 3, "curve {:?}", curve.lpd_loo);
    assert!(*jump > 10.0, "jump {jump}");
    // plateau afterwards
    for d in &diffs[jump_at + 1..] {
        assert!(
            d.abs() < 1.0,
            "post-jump diff {d}, curve {:?}",
            curve.lpd_loo
        );
    }
}

#[test]
fn monitor_curve_is_nondecreasing_on_random_fixtures() {
    // Property: adding a chain cannot lower the stacked optimum beyond the
    // slack induced by the near-flat prior. Run at lambda close to 1 with a
    // loose tol and slack 10·tol.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let cfg = StackingConfig::default()
        .with_lambda(1.0 + 1e-9)
        .unwrap()
        .with_tol(1e-6)
        .unwrap();
    for _rep in 0..25 {
        let n = 5 + (rng.random::<u64>() % 20) as usize;
        let k = 2 + (rng.random::<u64>() % 3) as usize;
        let mut log = ndarray::Array2::zeros((n, k));
        for v in log.iter_mut() {
            *v = -3.0 * rng.random::<f64>();
        }
        let loo =
            chainstack_core::psis::LooMatrix::from_log(log.clone(), ndarray::Array2::zeros((n, k)))
                .unwrap();
        let order: Vec<usize> = (0..k).collect();
        let curve = monitor_curve(&loo, &cfg, &order).unwrap();
        for w in curve.lpd_loo.windows(2) {
            assert!(
                w[1] >= w[0] - 10.0 * cfg.tol(),
                "decreasing curve {:?}",
                curve.lpd_loo
            );
        }
    }
}

#[test]
fn optimizer_matches_brute_force_on_a_random_fixture() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let (n, k) = (20usize, 3usize);
    let mut log = ndarray::Array2::zeros((n, k));
    for v in log.iter_mut() {
        *v = -4.0 * rng.random::<f64>();
    }
    let loo =
        chainstack_core::psis::LooMatrix::from_log(log, ndarray::Array2::zeros((n, k))).unwrap();
    let cfg = StackingConfig::default();
    let sol = optimize_weights(&loo, &cfg).unwrap();

    // brute-force simplex grid at step 1e-3
    let mut best = (f64::NEG_INFINITY, vec![0.0; k]);
    let steps = 1000usize;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let w = vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            let cw = chainstack_core::stacking::ChainWeights::new(w.clone()).unwrap();
            let f = chainstack_core::stacking::objective(&cw, &loo, &cfg).unwrap();
            if f > best.0 {
                best = (f, w);
            }
        }
    }
    for (a, b) in sol.weights.as_slice().iter().zip(&best.1) {
        assert!(
            (a - b).abs() <= 2e-3,
            "optimizer {:?} vs grid {:?}",
            sol.weights.as_slice(),
            best.1
        );
    }
}
