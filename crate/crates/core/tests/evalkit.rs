use lwi_core::eval::{
    make_plan, run_experiment, skewness, write_report_csv, write_summary_csv, CellData, fit_fold,
    ModelSpec, PlanParams,
};
use lwi_core::features::{build_frame, FeatureFrame, FeatureSpec};
use lwi_core::grid::warm_start;
use lwi_core::models::FittedModel;
use lwi_core::scenario::{gaussian_noise, spiky_bins, SpikyParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frame(seed: u64, n: usize) -> FeatureFrame {
    let bins = warm_start(spiky_bins(seed, n, &SpikyParams::default()).unwrap(), 240);
    build_frame("E", &bins, &FeatureSpec::default()).unwrap()
}

fn small_plan() -> PlanParams {
    PlanParams {
        embargo_bins: 40,
        ..PlanParams::default()
    }
}

#[test]
fn planted_linear_target_is_recovered_by_ar5() {
    let mut f = frame(1, 3_000);
    let lwi = f.lwi().unwrap().to_vec();
    let target: Vec<f64> = (0..lwi.len())
        .map(|t| if t >= 2 { 0.3 * lwi[t] - 0.2 * lwi[t - 2] + 0.01 } else { f64::NAN })
        .collect();
    f.set_target(4, target).unwrap();
    let rep = run_experiment(&f, &[ModelSpec::ar5()], &[4], &small_plan(), 0).unwrap();
    assert!(rep.failures.is_empty());
    assert!(rep.mean_r2_of("E", "AR(5)", 4).unwrap() > 0.999);
}

#[test]
fn noise_target_has_no_skill() {
    let mut f = frame(2, 3_000);
    let n = f.n_rows();
    f.set_target(4, gaussian_noise(3, n)).unwrap();
    let rep = run_experiment(&f, &ModelSpec::default_suite(), &[4], &small_plan(), 0).unwrap();
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    for m in ["AR(5)", "HAR", "GBT"] {
        assert!(rep.mean_r2_of("E", m, 4).unwrap() <= 0.05, "{m}");
    }
}

#[test]
fn trees_beat_ar_on_planted_threshold_signal() {
    let f = frame(3, 6_000);
    let rep = run_experiment(&f, &[ModelSpec::ar5(), ModelSpec::gbt()], &[20], &small_plan(), 0).unwrap();
    assert!(rep.mean_r2_of("E", "GBT", 20).unwrap() > rep.mean_r2_of("E", "AR(5)", 20).unwrap());
}

fn coefficients(m: &FittedModel) -> Vec<f64> {
    match m {
        FittedModel::Linear(l) => l.coefficients.clone(),
        FittedModel::Gbt(g) => g.trees.iter().flat_map(|t| t.value.iter().chain(&t.threshold).copied()).collect(),
    }
}

/// Max absolute coefficient change over folds when, for each fold, every
/// target from its embargo onward is shuffled before refitting that fold.
pub fn shuffle_delta(f: &FeatureFrame, model: &ModelSpec, k: usize, seed: u64) -> f64 {
    let plan = small_plan();
    let data = CellData::new(f, model, k).unwrap();
    let wf = plan.plan(data.rows.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (i, fold) in wf.folds.iter().enumerate() {
        let mut y = f.target(k).unwrap().to_vec();
        let rows = &data.rows[fold.embargo.start..];
        let mut vals: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        vals.shuffle(&mut rng);
        for (&r, v) in rows.iter().zip(vals) {
            y[r] = v;
        }
        let mut shuffled = f.clone();
        shuffled.set_target(k, y).unwrap();
        let data2 = CellData::new(&shuffled, model, k).unwrap();
        assert_eq!(data.rows, data2.rows);
        let a = fit_fold(&data, model, fold, i as u64).unwrap();
        let b = fit_fold(&data2, model, fold, i as u64).unwrap();
        assert_ne!(a.y_true, b.y_true);
        let (ca, cb) = (coefficients(&a.model), coefficients(&b.model));
        assert_eq!(ca.len(), cb.len());
        for (u, v) in ca.iter().zip(&cb) {
            worst = worst.max((u - v).abs());
        }
    }
    worst
}

#[test]
fn shuffling_test_targets_changes_no_fit() {
    let f = frame(4, 3_000);
    for model in ModelSpec::default_suite() {
        assert!(shuffle_delta(&f, &model, 8, 1) < 1e-12, "{}", model.label());
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let f = frame(5, 2_500);
    let run = || {
        let rep = run_experiment(&f, &ModelSpec::default_suite(), &[1, 4], &small_plan(), 9).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_report_csv(&mut a, &rep).unwrap();
        write_summary_csv(&mut b, &rep).unwrap();
        (a, b)
    };
    assert_eq!(run(), run());
}

#[test]
fn symmetric_noise_has_small_skew() {
    assert!(skewness(&gaussian_noise(8, 50_000)).abs() < 0.05);
}

#[test]
fn missing_target_fails_only_that_cell() {
    let f = frame(6, 2_000);
    let rep = run_experiment(&f, &[ModelSpec::ar5()], &[4, 7], &small_plan(), 0).unwrap();
    assert_eq!(rep.failures.len(), 1);
    assert_eq!(rep.failures[0].horizon, 7);
    assert_eq!(rep.rows.len(), 5);
}

proptest! {
    #[test]
    fn plan_invariants(n in 50usize..5_000, folds in 1usize..8, embargo in 0usize..200, frac in 0.1f64..0.6) {
        let initial = ((n as f64) * frac) as usize;
        if let Ok(plan) = make_plan(n, folds, embargo, initial) {
            prop_assert_eq!(plan.folds.len(), folds);
            for (i, f) in plan.folds.iter().enumerate() {
                prop_assert!(!f.test.is_empty());
                prop_assert_eq!(f.train.end, f.embargo.start);
                prop_assert_eq!(f.embargo.end, f.test.start);
                prop_assert!(f.train.end + embargo <= f.test.start);
                if i > 0 {
                    prop_assert_eq!(plan.folds[i - 1].test.end, f.test.start);
                }
            }
            prop_assert_eq!(plan.folds.last().unwrap().test.end, n);
            if let Ok(wider) = make_plan(n, folds, embargo + 1, initial) {
                let rows = |p: &lwi_core::eval::WalkForwardPlan| p.folds.iter().map(|f| f.test.len()).sum::<usize>();
                prop_assert!(rows(&wider) <= rows(&plan));
            }
        }
    }
}
