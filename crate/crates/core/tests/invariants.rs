mod common;

use std::collections::BTreeMap;

use common::*;
use npmle_boost::classify::{fit_bayes, split_experiment, split_indices, GaussianTask, LabeledDataset, SplitConfig};
use npmle_boost::likelihood::{log_likelihood, log_likelihood_gradient, surrogate, weights_responses};
use npmle_boost::sim::{kl_divergence, kl_sweep, SweepConfig};
use npmle_boost::{
    build_dataset, fit_samples, model, trapezoid_weights, DistributionSpec, FitConfig, KnotFunction, LearnerSpec,
    RawSamples,
};
use proptest::prelude::*;

fn raw_values() -> impl Strategy<Value = Vec<f64>> {
    // a small alphabet makes ties common
    prop::collection::vec((-20i32..20).prop_map(|k| k as f64 * 0.25), 2..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequencies_are_counts_over_n(values in raw_values()) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let ds = build_dataset(&RawSamples::new(values.clone()).unwrap()).unwrap();
        let total: f64 = ds.freqs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let n = values.len() as f64;
        for q in ds.freqs() {
            let c = q * n;
            prop_assert!((c - c.round()).abs() < 1e-9 && c.round() >= 1.0);
        }
    }

    #[test]
    fn frequencies_match_naive_count(values in prop::collection::vec(0u8..6, 2..=12)) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let raw: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let ds = build_dataset(&RawSamples::new(raw).unwrap()).unwrap();
        let mut naive = BTreeMap::new();
        for v in &values {
            *naive.entry(*v).or_insert(0usize) += 1;
        }
        prop_assert_eq!(ds.knots().len(), naive.len());
        for ((k, c), (x, q)) in naive.iter().zip(ds.knots().iter().zip(ds.freqs())) {
            prop_assert_eq!(f64::from(*k), *x);
            prop_assert!((q - *c as f64 / values.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_weights_span_the_support(values in raw_values(), rot in 0usize..40) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let ds = build_dataset(&RawSamples::new(values.clone()).unwrap()).unwrap();
        let qw = trapezoid_weights(&ds).unwrap();
        let (lo, hi) = ds.support();
        prop_assert!((qw.as_slice().iter().sum::<f64>() - (hi - lo)).abs() < 1e-12 * (1.0 + hi - lo));
        let mut permuted = values.clone();
        permuted.rotate_left(rot % values.len());
        permuted.reverse();
        prop_assert_eq!(build_dataset(&RawSamples::new(permuted).unwrap()).unwrap(), ds);
    }

    #[test]
    fn surrogate_shift_property(values in raw_values(), c in -2.0f64..2.0, seed in 0u64..1000) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let ds = build_dataset(&RawSamples::new(values).unwrap()).unwrap();
        let qw = trapezoid_weights(&ds).unwrap();
        let mut r = rng(seed);
        let f = random_responses(&mut r, ds.n());
        let z: f64 = qw.as_slice().iter().zip(&f).map(|(a, f)| a * f.exp()).sum();
        let base = surrogate(&ds, &qw, &KnotFunction::new(f.clone()).unwrap()).unwrap();
        let shifted = surrogate(&ds, &qw, &KnotFunction::new(f.iter().map(|v| v + c).collect()).unwrap()).unwrap();
        prop_assert!((shifted - (base + c - (c.exp() - 1.0) * z)).abs() < 1e-10 * (1.0 + z * c.exp()));
        // ω is a·e^f, strictly positive
        let st = weights_responses(&ds, &qw, &KnotFunction::new(f).unwrap()).unwrap();
        prop_assert!(st.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn exact_gradient_matches_differences(values in raw_values(), seed in 0u64..1000) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let ds = build_dataset(&RawSamples::new(values).unwrap()).unwrap();
        let qw = trapezoid_weights(&ds).unwrap();
        let mut r = rng(seed);
        let f = random_responses(&mut r, ds.n());
        let grad = log_likelihood_gradient(&ds, &qw, &KnotFunction::new(f.clone()).unwrap()).unwrap();
        let h = 1e-5;
        for i in 0..f.len() {
            let mut up = f.clone();
            let mut down = f.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (log_likelihood(&ds, &qw, &KnotFunction::new(up).unwrap()).unwrap()
                - log_likelihood(&ds, &qw, &KnotFunction::new(down).unwrap()).unwrap())
                / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() < 1e-7);
        }
    }
}

#[test]
fn surrogate_improves_on_fitting_study() {
    for (dist, spec) in DistributionSpec::fitting_study() {
        let raw = spec.sample(500, 21).unwrap();
        for learner in [LearnerSpec::smooth_spline(), LearnerSpec::gaussian_kernel()] {
            let (_, trace) = fit_samples(&raw, &FitConfig::new(learner, 200).with_trace()).unwrap();
            let s: Vec<f64> = trace.records.iter().map(|r| r.surrogate).collect();
            assert!(s[200] > s[0], "{dist} {learner:?}");
            let mut steps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
            steps.sort_by(f64::total_cmp);
            assert!(steps[steps.len() / 2] > 0.0, "{dist} {learner:?}");
        }
    }
}

#[test]
fn fits_are_bit_identical_and_prefix_stable() {
    let raw = DistributionSpec::student_t().sample(300, 22).unwrap();
    for learner in [LearnerSpec::smooth_spline(), LearnerSpec::gaussian_kernel(), LearnerSpec::cart()] {
        let (full, _) = fit_samples(&raw, &FitConfig::new(learner, 40)).unwrap();
        let (again, _) = fit_samples(&raw, &FitConfig::new(learner, 40)).unwrap();
        let bytes = |e| {
            let mut v = Vec::new();
            model::to_writer(e, &mut v).unwrap();
            v
        };
        assert_eq!(bytes(&full), bytes(&again));
        let (short, _) = fit_samples(&raw, &FitConfig::new(learner, 15)).unwrap();
        let prefix = full.truncated(15).unwrap();
        assert_eq!(bytes(&short), bytes(&prefix), "{learner:?}");
    }
}

#[test]
fn density_grid_integrates_to_one() {
    let raw = DistributionSpec::gmm(0.3).sample(500, 23).unwrap();
    for learner in [LearnerSpec::smooth_spline(), LearnerSpec::gaussian_kernel()] {
        let (ens, _) = fit_samples(&raw, &FitConfig::new(learner, 100)).unwrap();
        let grid = ens.density_grid(4001).unwrap();
        let step = grid[1].x - grid[0].x;
        let mass = trapezoid(&grid.iter().map(|g| g.density).collect::<Vec<_>>(), step);
        assert!((mass - 1.0).abs() < 5e-3, "{learner:?}: {mass}");
    }
}

#[test]
fn kl_quadrature_converges_and_stays_nonnegative() {
    let spec = DistributionSpec::gmm(0.5);
    let raw = spec.sample(500, 24).unwrap();
    let (ens, _) = fit_samples(&raw, &FitConfig::new(LearnerSpec::smooth_spline(), 100)).unwrap();
    let coarse = kl_divergence(&spec, &ens, 2001).unwrap();
    let fine = kl_divergence(&spec, &ens, 4001).unwrap();
    assert!((coarse.kl - fine.kl).abs() < 1e-4);
    assert!(coarse.kl >= -1e-6);
    assert!(coarse.truncated_mass > 0.0 && coarse.truncated_mass < 0.05);
    assert!((coarse.kl - (coarse.log_ratio + coarse.truncated_mass)).abs() < 1e-3);
}

#[test]
fn single_cell_sweep_is_one_kl_evaluation() {
    let mut cfg = SweepConfig::new(vec![0.0], vec![1], 1, LearnerSpec::smooth_spline());
    cfg.base_seed = 5;
    let res = kl_sweep(&cfg).unwrap();
    assert_eq!(res.cells.len(), 1);
    let spec = DistributionSpec::gmm(0.0);
    let (ens, _) = fit_samples(&spec.sample(500, 5).unwrap(), &FitConfig::new(LearnerSpec::smooth_spline(), 1)).unwrap();
    let direct = kl_divergence(&spec, &ens, cfg.grid_size).unwrap();
    assert!((res.cells[0].kl - direct.kl).abs() < 1e-12);
    assert_eq!(res.aggregate(0.0, 1).unwrap().count, 1);
}

#[test]
fn sweep_is_symmetric_in_beta() {
    let mut cfg = SweepConfig::new(vec![0.25, 0.75], vec![30], 40, LearnerSpec::smooth_spline());
    cfg.sample_size = 300;
    let res = kl_sweep(&cfg).unwrap();
    assert!(res.cells.iter().all(|c| c.kl >= -1e-6));
    let (a, b) = (res.aggregate(0.25, 30).unwrap(), res.aggregate(0.75, 30).unwrap());
    let se = ((a.sd * a.sd + b.sd * b.sd) / 40.0).sqrt();
    assert!((a.mean - b.mean).abs() <= 2.0 * se, "{a:?} vs {b:?}");
}

#[test]
fn mirrored_sample_gives_mirrored_fit() {
    // negating a draw from the β mixture gives a draw from the 1 − β mixture
    let raw = DistributionSpec::gmm(0.3).sample(400, 28).unwrap();
    let mirrored = RawSamples::new(raw.values().iter().map(|x| -x).collect()).unwrap();
    for learner in [LearnerSpec::smooth_spline(), LearnerSpec::gaussian_kernel()] {
        let (a, _) = fit_samples(&raw, &FitConfig::new(learner, 60)).unwrap();
        let (b, _) = fit_samples(&mirrored, &FitConfig::new(learner, 60)).unwrap();
        for x in [-4.0, -1.3, 0.0, 0.7, 3.9] {
            assert!((a.density(x).unwrap() - b.density(-x).unwrap()).abs() < 1e-9);
        }
        let ka = kl_divergence(&DistributionSpec::gmm(0.3), &a, 2001).unwrap().kl;
        let kb = kl_divergence(&DistributionSpec::gmm(0.7), &b, 2001).unwrap().kl;
        assert!((ka - kb).abs() < 1e-9, "{ka} vs {kb}");
    }
}

#[test]
fn classifier_ignores_translation_of_the_feature() {
    let data = GaussianTask::default().sample(400, 25).unwrap();
    let moved = LabeledDataset::new(data.features().iter().map(|x| x + 8.0).collect(), data.labels().to_vec()).unwrap();
    let cfg = FitConfig::new(LearnerSpec::smooth_spline(), 100);
    let (a, b) = (fit_bayes(&data, &cfg).unwrap(), fit_bayes(&moved, &cfg).unwrap());
    let agree = data
        .features()
        .iter()
        .filter(|&&x| a.predict(x) == b.predict(x + 8.0))
        .count();
    assert!(agree as f64 >= 0.99 * data.len() as f64);
    assert!((a.error_rate(&data) - b.error_rate(&moved)).abs() <= 0.01);
}

#[test]
fn priors_are_training_frequencies() {
    // 462 rows split 70/30 leaves 323 for training
    let data = GaussianTask::default().sample(462, 26).unwrap();
    let (train, test) = split_indices(462, 0.7, 3);
    assert_eq!((train.len(), test.len()), (323, 139));
    let model = fit_bayes(&data.subset(&train).unwrap(), &FitConfig::new(LearnerSpec::smooth_spline(), 20)).unwrap();
    for p in model.priors() {
        let k = p * 323.0;
        assert!((k - k.round()).abs() < 1e-9);
    }
}

#[test]
fn split_summary_is_bounded_by_its_splits() {
    let data = GaussianTask::default().sample(300, 27).unwrap();
    let report = split_experiment(&data, &SplitConfig::new(6, 0.7, FitConfig::new(LearnerSpec::gaussian_kernel(), 30))).unwrap();
    let rates: Vec<f64> = report
        .outcomes
        .iter()
        .filter_map(|o| match o {
            npmle_boost::classify::SplitOutcome::Completed { test_error, .. } => Some(*test_error),
            _ => None,
        })
        .collect();
    assert_eq!(rates.len(), 6);
    let (lo, hi) = rates.iter().fold((1.0f64, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!((0.0..=1.0).contains(&lo) && hi <= 1.0);
    assert!(lo <= report.summary.test_mean && report.summary.test_mean <= hi);
}
