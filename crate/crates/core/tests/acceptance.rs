//! Acceptance suite. Prints one line per criterion and exits non-zero when a
//! criterion fails, except for documented known failures (see KNOWN).

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{synth_events, OracleBook};
use lwi_core::book::{BookEngine, BookL1};
use lwi_core::eval::{
    fit_fold, run_experiment, skewness, write_forecasts_csv, write_report_csv, write_summary_csv,
    CellData, EvalReport, ModelSpec, PlanParams,
};
use lwi_core::features::{build_frame, compute_lwi, write_frame_csv, FeatureFrame, FeatureSpec};
use lwi_core::grid::{resample, warm_start, GridBin, Session, DEFAULT_GRID_NS};
use lwi_core::mbo::{parse_csv, synth_stream, write_csv, SynthParams};
use lwi_core::models::{gbt_fit, ols_fit, FittedModel, GbtParams};
use lwi_core::scenario::{ar1_series, planted_feature_frame, random_walk, spiky_bins, SpikyParams};
use lwi_core::stats::{
    adf_test, consensus, lambda_grid, lambda_max, lasso_path, screen_features,
    write_consensus_csv, write_rankings_csv, ScreenParams,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Criteria expected to fail, with the reason printed next to the result.
const KNOWN: &[(u32, &str)] = &[(
    6,
    "random walk 13 (seed 213) is rejected at 5%; the reference implementation rejects it too (type-I error)",
)];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut events_checked = 0usize;
    for seed in 0..100 {
        let events = synth_events(10_000 + seed, 100_000);
        let mut book = BookEngine::new();
        let mut oracle = OracleBook::default();
        for (i, ev) in events.iter().enumerate() {
            let ok = book.apply(ev).is_ok();
            if ok != oracle.apply(ev) || book.snapshot() != oracle.l1() {
                return outcome(false, format!("stream {seed} diverges at event {i}"));
            }
        }
        events_checked += events.len();
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(secs < 60.0, format!("{events_checked} events match the rescan oracle in {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..1_000 {
        let cancels: u64 = if i % 10 == 0 { 0 } else { rng.random_range(0..10_000) };
        let depths: Vec<u64> = (0..4).map(|_| rng.random_range(0..50_000)).collect();
        let adds: u64 = rng.random_range(0..5_000);
        let eps: f64 = rng.random_range(0.5..10.0);
        let mut bins: Vec<GridBin> = depths
            .iter()
            .chain([&1])
            .enumerate()
            .map(|(t, &d)| {
                GridBin::empty(
                    t as u64 * DEFAULT_GRID_NS,
                    BookL1 {
                        best_bid_px: Some(100),
                        best_ask_px: Some(101),
                        bid_depth_l1: d / 2,
                        ask_depth_l1: d - d / 2,
                    },
                )
            })
            .collect();
        bins[4].cancels_l1 = cancels;
        bins[4].adds_l1 = adds;
        let got = compute_lwi(&bins, eps, 4).unwrap()[4];
        let ma = depths.iter().sum::<u64>() as f64 / 4.0;
        let want = cancels as f64 / (ma + (adds as f64).max(eps));
        if got < 0.0 || (cancels == 0 && got != 0.0) {
            return outcome(false, format!("tuple {i}: LWI {got}"));
        }
        if want != 0.0 {
            worst = worst.max(((got - want) / want).abs());
        }
    }
    outcome(worst <= 1e-12, format!("1000 tuples, max relative error {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let params = SynthParams::default();
    let start = params.start_ns;
    let session = Session::new(start, start + 3_600 * 1_000_000_000, DEFAULT_GRID_NS).unwrap();
    let events = synth_stream(3, 3_600.0, &params).unwrap();
    let out = resample(&events, &session);
    let frame = build_frame("SYN", &out.bins, &FeatureSpec::default()).unwrap();
    let ok = session.n_bins() == 14_400 && out.bins.len() == 14_400 && frame.n_rows() == 14_400;
    outcome(ok, format!("{} bins, {} frame rows for one hour at 250 ms", out.bins.len(), frame.n_rows()))
}

fn random_bins(rng: &mut ChaCha8Rng, n: usize) -> Vec<GridBin> {
    (0..n)
        .map(|t| {
            let bid: u64 = rng.random_range(0..400);
            let ask: u64 = rng.random_range(0..400);
            let mut b = GridBin::empty(
                t as u64 * DEFAULT_GRID_NS,
                BookL1 {
                    best_bid_px: (bid > 0).then_some(5_000),
                    best_ask_px: (ask > 0).then_some(5_000 + rng.random_range(1..5)),
                    bid_depth_l1: bid,
                    ask_depth_l1: ask,
                },
            );
            b.adds_l1 = rng.random_range(0..60);
            b.cancels_l1 = rng.random_range(0..60);
            b.exec_l1 = rng.random_range(0..20);
            b.ofi = b.adds_l1 as i64 - b.cancels_l1 as i64;
            b.event_count = (b.adds_l1 + b.cancels_l1 + b.exec_l1) as u32;
            b.modelable = true;
            b
        })
        .collect()
}

fn coefficients(m: &FittedModel) -> Vec<f64> {
    match m {
        FittedModel::Linear(l) => l.coefficients.clone(),
        FittedModel::Gbt(g) => g
            .trees
            .iter()
            .flat_map(|t| t.value.iter().chain(&t.threshold).copied())
            .collect(),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = FeatureSpec::default();
    for i in 0..50 {
        let bins = random_bins(&mut rng, 400);
        let full = build_frame("T", &bins, &spec).unwrap();
        let t = rng.random_range(100..399);
        let part = build_frame("T", &bins[..=t], &spec).unwrap();
        for (name, col) in part.columns() {
            let whole = full.column(name).unwrap();
            for r in 0..=t {
                if col[r].to_bits() != whole[r].to_bits() && !(col[r].is_nan() && whole[r].is_nan()) {
                    return outcome(false, format!("frame {i}: {name} row {r} changes under truncation"));
                }
            }
        }
    }

    let bins = warm_start(spiky_bins(44, 3_000, &SpikyParams::default()).unwrap(), 240);
    let frame = build_frame("L", &bins, &spec).unwrap();
    let plan = PlanParams { embargo_bins: 40, ..PlanParams::default() };
    let mut worst: f64 = 0.0;
    for model in ModelSpec::default_suite() {
        let data = CellData::new(&frame, &model, 8).unwrap();
        let wf = plan.plan(data.rows.len()).unwrap();
        for (f, fold) in wf.folds.iter().enumerate() {
            let mut y = frame.target(8).unwrap().to_vec();
            let rows = &data.rows[fold.embargo.start..];
            let mut vals: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            vals.shuffle(&mut rng);
            for (&r, v) in rows.iter().zip(vals) {
                y[r] = v;
            }
            let mut shuffled = frame.clone();
            shuffled.set_target(8, y).unwrap();
            let data2 = CellData::new(&shuffled, &model, 8).unwrap();
            let a = coefficients(&fit_fold(&data, &model, fold, f as u64).unwrap().model);
            let b = coefficients(&fit_fold(&data2, &model, fold, f as u64).unwrap().model);
            if a.len() != b.len() {
                return outcome(false, "model shape changed under shuffling");
            }
            worst = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(worst, f64::max);
        }
    }
    outcome(worst < 1e-12, format!("50 truncated frames unchanged; shuffle max coefficient delta {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ols_worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(20..300);
        let p = rng.random_range(1..8);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let fit = ols_fit(&x, &y, &names).unwrap();
        let d = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let beta = (d.transpose() * &d).try_inverse().unwrap() * (d.transpose() * DVector::from_column_slice(&y));
        ols_worst = fit.coefficients.iter().zip(beta.iter()).map(|(a, b)| (a - b).abs()).fold(ols_worst, f64::max);
    }

    let mut kkt_worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
        let (n, p) = (300, 10);
        let x = DMatrix::from_fn(n, p, |_, j| rng.random::<f64>() * (1 + j) as f64);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 2.0 * x[(i, 3)] + rng.random::<f64>()).collect();
        let grid = lambda_grid(lambda_max(&x, &y).unwrap(), 1e-4, 50);
        let path = lasso_path(&x, &y, &grid).unwrap();
        let nf = n as f64;
        let mut xs = x.clone();
        for j in 0..p {
            let m = x.column(j).sum() / nf;
            let sd = (x.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf).sqrt();
            for i in 0..n {
                xs[(i, j)] = (x[(i, j)] - m) / sd;
            }
        }
        let my = y.iter().sum::<f64>() / nf;
        for (k, &lambda) in grid.iter().enumerate() {
            let b = &path.coefs[k];
            for j in 0..p {
                let g = (0..n)
                    .map(|i| xs[(i, j)] * (y[i] - my - (0..p).map(|c| xs[(i, c)] * b[c]).sum::<f64>()))
                    .sum::<f64>()
                    / nf;
                let v = if b[j] == 0.0 { (g.abs() - lambda).max(0.0) } else { (g - lambda * b[j].signum()).abs() };
                kkt_worst = kkt_worst.max(v);
            }
        }
    }

    let mut monotone = true;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = 600;
        let x = DMatrix::from_fn(n, 4, |_, _| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|i| (x[(i, 0)] > 0.5) as u8 as f64 + x[(i, 1)] * x[(i, 2)] + rng.random::<f64>()).collect();
        let names: Vec<String> = (0..4).map(|j| format!("x{j}")).collect();
        let m = gbt_fit(&x, &y, &names, &GbtParams { seed, ..GbtParams::default() }).unwrap();
        monotone &= m.train_loss.windows(2).all(|w| w[1] <= w[0]);
    }
    outcome(
        ols_worst < 1e-8 && kkt_worst < 1e-6 && monotone,
        format!("OLS max delta {ols_worst:.1e}; LASSO max KKT violation {kkt_worst:.1e}; GBT loss monotone on 20 datasets: {monotone}"),
    )
}

// statsmodels adfuller(x, maxlag=12, regression="c", autolag="AIC").
const ADF_REFERENCE: [f64; 20] = [
    -27.154911169833078,
    -22.005332686527435,
    -12.131922485091064,
    -27.694191925607104,
    -25.88437095061386,
    -24.289300838388975,
    -18.759769366174325,
    -15.479803949131595,
    -20.060944331575417,
    -18.31604730539439,
    -0.8576381713567647,
    -0.7587171337104462,
    -1.5432101025373925,
    -3.4765101414151096,
    -1.4946465844472014,
    -2.379089877272913,
    1.0545653168311122,
    -0.897883061118267,
    -0.3757675363027893,
    -2.697473182767461,
];

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut wrong = Vec::new();
    for i in 0..20u64 {
        let (series, stationary) = if i < 10 {
            (ar1_series(100 + i, 0.3 + 0.4 * i as f64 / 9.0, 2_000), true)
        } else {
            (random_walk(200 + i, 2_000), false)
        };
        let r = adf_test(&series, 12).unwrap();
        worst = worst.max((r.statistic - ADF_REFERENCE[i as usize]).abs());
        if r.reject_at_5pct != stationary {
            wrong.push(i);
        }
    }
    let stats_ok = worst < 1e-6;
    let detail = format!(
        "{}/20 decisions correct (misses {wrong:?}); max |statistic - reference| {worst:.1e}",
        20 - wrong.len()
    );
    // Only the documented miss is tolerated as known; anything else is a hard failure.
    let known_only = wrong == [13];
    outcome(stats_ok && wrong.is_empty(), if stats_ok && known_only { detail } else { format!("UNEXPECTED: {detail}") })
}

struct Table3 {
    report: EvalReport,
    secs: f64,
}

fn table3() -> Table3 {
    let start = Instant::now();
    let bins = warm_start(spiky_bins(1, 14_400, &SpikyParams::default()).unwrap(), 240);
    let frame = build_frame("SYN", &bins, &FeatureSpec::default()).unwrap();
    let report = run_experiment(&frame, &ModelSpec::default_suite(), &[1, 4, 8, 20], &PlanParams::default(), 7).unwrap();
    Table3 { report, secs: start.elapsed().as_secs_f64() }
}

fn criterion_7(t: &Table3) -> Outcome {
    let r2 = |m: &str, k| t.report.mean_r2_of("SYN", m, k).unwrap_or(f64::NAN);
    let (ar, har, gbt) = ("AR(5)", "HAR", "GBT");
    let a = [ar, har, gbt].iter().all(|m| r2(m, 1) < 0.2);
    let b = r2(har, 8) >= r2(ar, 8);
    let c = r2(gbt, 20) >= r2(har, 20) && r2(har, 20) >= 0.5 && r2(gbt, 20) - r2(ar, 20) >= 0.1;
    let grid: Vec<String> = [ar, har, gbt]
        .iter()
        .map(|m| format!("{m} {:.3}/{:.3}/{:.3}/{:.3}", r2(m, 1), r2(m, 4), r2(m, 8), r2(m, 20)))
        .collect();
    outcome(
        a && b && c && t.report.failures.is_empty() && t.secs < 300.0,
        format!("R2 k=1/4/8/20: {} ({:.0}s)", grid.join("; "), t.secs),
    )
}

fn criterion_8() -> Outcome {
    let plan: [&[(&str, f64)]; 4] = [
        &[("LWI_ma1s", 1.0), ("LWI_sd2s", 0.8), ("spread_sd1s", 0.6)],
        &[("LWI_ma1s", 1.0), ("LWI_sd2s", 0.8), ("spread_sd1s", 0.6)],
        &[("LWI_ma1s", 1.0), ("LWI_sd2s", 0.8), ("QI_lag2", 0.6)],
        &[("LWI_ma1s", 1.0), ("depth_L1", 0.8), ("OFI", 0.6)],
    ];
    let params = ScreenParams { top_k: 3, ..ScreenParams::default() };
    let results: Vec<_> = plan
        .iter()
        .enumerate()
        .map(|(i, signals)| {
            let frame = planted_feature_frame(&format!("S{i}"), 80 + i as u64, 3_000, 4, signals, 0.5).unwrap();
            screen_features(&frame, 4, &params).unwrap()
        })
        .collect();
    let table = consensus(&results, 0.6).unwrap();
    let row = |f: &str| table.iter().find(|r| r.feature == f).map(|r| (r.n_symbols, r.consensus));
    let got = [row("LWI_ma1s"), row("LWI_sd2s"), row("spread_sd1s")];
    let ok = got == [Some((4, true)), Some((3, true)), Some((2, false))];
    outcome(ok, format!("LWI_ma1s {:?}, LWI_sd2s {:?}, spread_sd1s {:?} as (symbols, consensus)", got[0], got[1], got[2]))
}

fn criterion_9(t: &Table3) -> Outcome {
    let s4 = skewness(&t.report.residuals("SYN", "GBT", 1_000));
    let s20 = skewness(&t.report.residuals("SYN", "GBT", 5_000));
    outcome(s4 - s20 >= 0.2, format!("GBT residual skew k=4 {s4:.3}, k=20 {s20:.3}"))
}

/// Every output file of one pipeline run, keyed by name.
fn pipeline(seed: u64) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut frames: Vec<FeatureFrame> = Vec::new();
    for (i, sym) in ["AAA", "BBB"].iter().enumerate() {
        let params = SynthParams { symbol: sym.to_string(), ..SynthParams::default() };
        let events = synth_stream(seed + i as u64, 1_200.0, &params).unwrap();
        let mut raw = Vec::new();
        write_csv(&mut raw, &events).unwrap();
        let parsed = parse_csv(raw.as_slice(), None).unwrap();
        let session = Session::new(params.start_ns, params.start_ns + 1_200 * 1_000_000_000, DEFAULT_GRID_NS).unwrap();
        let bins = warm_start(resample(&parsed.events, &session).bins, 240);
        let frame = build_frame(sym, &bins, &FeatureSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_frame_csv(&mut buf, &frame).unwrap();
        files.insert(format!("frames/{sym}.csv"), buf);
        frames.push(frame);
    }
    let screen: Vec<_> = frames
        .iter()
        .map(|f| screen_features(f, 4, &ScreenParams::default()).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_rankings_csv(&mut buf, &screen).unwrap();
    files.insert("screen/rankings.csv".into(), buf);
    let mut buf = Vec::new();
    write_consensus_csv(&mut buf, &consensus(&screen, 0.6).unwrap()).unwrap();
    files.insert("screen/consensus.csv".into(), buf);
    let plan = PlanParams { embargo_bins: 80, ..PlanParams::default() };
    let reports: Vec<_> = frames
        .iter()
        .map(|f| run_experiment(f, &ModelSpec::default_suite(), &[1, 4, 8, 20], &plan, seed).unwrap())
        .collect();
    let report = EvalReport::merge(reports);
    for name in ["eval/report.csv", "eval/summary.csv", "eval/forecasts.csv"] {
        let mut buf = Vec::new();
        match name {
            "eval/report.csv" => write_report_csv(&mut buf, &report).unwrap(),
            "eval/summary.csv" => write_summary_csv(&mut buf, &report).unwrap(),
            _ => write_forecasts_csv(&mut buf, &report).unwrap(),
        }
        files.insert(name.into(), buf);
    }
    files
}

fn criterion_10() -> Outcome {
    let a = pipeline(2024);
    let b = pipeline(2024);
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    let bytes: usize = a.values().map(Vec::len).sum();
    outcome(
        differing.is_empty() && a.len() == b.len(),
        format!("{} files, {bytes} bytes per run; differing: {differing:?}", a.len()),
    )
}

fn main() {
    let t3 = table3();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "book matches full-rescan oracle", criterion_1()),
        (2, "LWI formula conformance", criterion_2()),
        (3, "one-hour grid has 14,400 bins", criterion_3()),
        (4, "no leakage", criterion_4()),
        (5, "estimator oracles", criterion_5()),
        (6, "ADF decisions and reference statistics", criterion_6()),
        (7, "qualitative R2 pattern by model and horizon", criterion_7(&t3)),
        (8, "cross-symbol consensus mechanics", criterion_8()),
        (9, "residual skew shrinks with aggregation", criterion_9(&t3)),
        (10, "end-to-end determinism", criterion_10()),
    ];
    let mut unexpected = 0;
    for (id, name, o) in &results {
        let known = KNOWN.iter().find(|(k, _)| k == id);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, known) {
            (false, Some((_, why))) if !o.detail.starts_with("UNEXPECTED") => format!(" [known: {why}]"),
            (false, _) => {
                unexpected += 1;
                String::new()
            }
            _ => String::new(),
        };
        println!("criterion {id:>2} {status}: {name}: {}{note}", o.detail);
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
