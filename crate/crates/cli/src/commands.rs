//! Subcommand bodies. Each computes everything first and writes outputs
//! last, so a failure never leaves a half-written run behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use lwi_core::eval::{
    run_experiment, skewness, write_forecasts_csv, write_report_csv, write_summary_csv, EvalReport,
};
use lwi_core::features::{build_frame, read_frame_ffr1, write_frame_csv, write_frame_ffr1, FeatureFrame};
use lwi_core::grid::{resample, warm_start, write_bin_dump, Session};
use lwi_core::mbo::{parse_csv, read_binary, synth_stream, write_csv, ParseOutcome, Symbol, SynthParams};
use lwi_core::stats::{acf_pacf, adf_test, consensus, screen_features, write_consensus_csv, write_rankings_csv};
use lwi_core::Error;
use rayon::prelude::*;

use crate::config::RunConfig;

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 1, message: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: 2, message: msg.into() }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self { code: 3, message: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(format!("io error: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::data(format!("csv error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Failure>) -> Outcome {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

fn frame_path(cfg: &RunConfig, symbol: &str) -> PathBuf {
    cfg.out.join("frames").join(format!("{symbol}.ffr"))
}

struct Built {
    symbol: String,
    parsed: ParseOutcome,
    book_errors: u64,
    bins: Vec<lwi_core::grid::GridBin>,
    frame: FeatureFrame,
}

fn read_events(cfg: &RunConfig, symbol: &str) -> Result<ParseOutcome, Failure> {
    let path = cfg.input_path(symbol);
    let file = File::open(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let sym = Symbol::new(symbol).expect("validated symbol");
    let reader = std::io::BufReader::new(file);
    let parsed = if path.extension().is_some_and(|e| e == "mbo") {
        read_binary(reader, sym)
    } else {
        parse_csv(reader, Some(&[sym]))
    };
    parsed.map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn build_one(cfg: &RunConfig, symbol: &str) -> Result<Built, Failure> {
    let parsed = read_events(cfg, symbol)?;
    let (bins, book_errors) = if parsed.events.is_empty() {
        warn!("{symbol}: no events in {}; writing an empty frame", cfg.input_path(symbol).display());
        (Vec::new(), 0)
    } else {
        let session = Session::new(cfg.session.start_ns, cfg.session.end_ns, cfg.grid_ns())?;
        let out = resample(&parsed.events, &session);
        if out.dropped_outside > 0 {
            warn!("{symbol}: {} events fall outside the session", out.dropped_outside);
        }
        (warm_start(out.bins, cfg.session.warm_bins), out.book_errors.total())
    };
    let frame = build_frame(symbol, &bins, &cfg.features)?;
    Ok(Built { symbol: symbol.to_string(), parsed, book_errors, bins, frame })
}

pub fn build(cfg: &RunConfig) -> Outcome {
    let built: Vec<Built> = cfg
        .symbols
        .par_iter()
        .map(|s| build_one(cfg, s))
        .collect::<Result<_, _>>()?;
    for b in &built {
        let dir = cfg.out.join("frames");
        write_file(&dir.join(format!("{}.ffr", b.symbol)), |w| Ok(write_frame_ffr1(w, &b.frame)?))?;
        write_file(&dir.join(format!("{}.csv", b.symbol)), |w| Ok(write_frame_csv(w, &b.frame)?))?;
        write_file(&cfg.out.join("bins").join(format!("{}.csv", b.symbol)), |w| {
            Ok(write_bin_dump(w, &b.bins)?)
        })?;
        println!(
            "{}: {} events, {} bad rows, {} book errors, {} rows ({} modelable)",
            b.symbol,
            b.parsed.events.len(),
            b.parsed.error_count(),
            b.book_errors,
            b.frame.n_rows(),
            b.frame.modelable_rows().len()
        );
    }
    Ok(())
}

fn load_frames(cfg: &RunConfig) -> Result<Vec<FeatureFrame>, Failure> {
    let missing: Vec<&str> = cfg
        .symbols
        .iter()
        .filter(|s| !frame_path(cfg, s).is_file())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Failure::data(format!(
            "no frames for {} under {}; run `lwi build` first",
            missing.join(", "),
            cfg.out.join("frames").display()
        )));
    }
    cfg.symbols
        .iter()
        .map(|s| {
            let path = frame_path(cfg, s);
            let file = File::open(&path)?;
            read_frame_ffr1(std::io::BufReader::new(file))
                .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn screen(cfg: &RunConfig) -> Outcome {
    let frames = load_frames(cfg)?;
    let mut params = cfg.screen.params.clone();
    params.gbt.seed = cfg.seed;
    let results = frames
        .par_iter()
        .map(|f| {
            screen_features(f, cfg.screen.horizon, &params)
                .map_err(|e| Failure::from(e).prefixed(&f.symbol))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = consensus(&results, cfg.screen.threshold)?;
    let dir = cfg.out.join("screen");
    write_file(&dir.join("rankings.csv"), |w| Ok(write_rankings_csv(w, &results)?))?;
    write_file(&dir.join("consensus.csv"), |w| Ok(write_consensus_csv(w, &table)?))?;
    let agreed = table.iter().filter(|r| r.consensus).count();
    println!("{} features ranked, {agreed} reach consensus", table.len());
    Ok(())
}

impl Failure {
    fn prefixed(self, symbol: &str) -> Self {
        Self { message: format!("{symbol}: {}", self.message), ..self }
    }
}

pub fn eval(cfg: &RunConfig) -> Outcome {
    let frames = load_frames(cfg)?;
    let mut reports = Vec::with_capacity(frames.len());
    for f in &frames {
        reports.push(run_experiment(f, &cfg.eval.models, &cfg.eval.horizons, &cfg.eval.plan, cfg.seed)?);
    }
    let report = EvalReport::merge(reports);
    for fail in &report.failures {
        warn!("{} {} k={}: {}", fail.symbol, fail.model, fail.horizon, fail.reason);
    }
    let dir = cfg.out.join("eval");
    write_file(&dir.join("report.csv"), |w| Ok(write_report_csv(w, &report)?))?;
    write_file(&dir.join("summary.csv"), |w| Ok(write_summary_csv(w, &report)?))?;
    write_file(&dir.join("forecasts.csv"), |w| Ok(write_forecasts_csv(w, &report)?))?;
    write_file(&dir.join("residual_skew.csv"), |w| write_residual_skew(w, &report))?;
    for ((symbol, model, k), r2) in report.mean_r2() {
        println!("{symbol} {model} k={k}: mean R2 {r2:.3}");
    }
    if !report.failures.is_empty() {
        println!("{} cells failed; see log", report.failures.len());
    }
    Ok(())
}

/// Skewness of pooled out-of-sample residuals per cell.
fn write_residual_skew<W: Write>(w: W, report: &EvalReport) -> Outcome {
    let mut cells: Vec<(&str, &str, u64)> = report
        .rows
        .iter()
        .map(|r| (r.symbol.as_str(), r.model.as_str(), r.horizon_ms))
        .collect();
    cells.dedup();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["symbol", "model", "horizon_ms", "n", "skewness"])?;
    for (symbol, model, ms) in cells {
        let resid = report.residuals(symbol, model, ms);
        wtr.write_record([
            symbol.to_string(),
            model.to_string(),
            ms.to_string(),
            resid.len().to_string(),
            skewness(&resid).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// LWI over the modelable rows, the series the models are fitted on.
fn lwi_series(frame: &FeatureFrame) -> Vec<f64> {
    let lwi = frame.lwi().unwrap_or(&[]);
    frame.select(lwi, &frame.modelable_rows())
}

pub fn diag(cfg: &RunConfig) -> Outcome {
    let frames = load_frames(cfg)?;
    let mut adf = csv::Writer::from_writer(Vec::new());
    adf.write_record([
        "symbol", "n_obs", "lags_used", "statistic", "cv_1pct", "cv_5pct", "cv_10pct", "reject_at_5pct", "error",
    ])?;
    let mut acf = csv::Writer::from_writer(Vec::new());
    acf.write_record(["symbol", "lag", "acf", "pacf", "conf_band"])?;
    for f in &frames {
        let series = lwi_series(f);
        match adf_test(&series, cfg.diag.adf_max_lags) {
            Ok(r) => {
                let cv = |l: &str| r.critical_values.get(l).map_or_else(String::new, |v| v.to_string());
                adf.write_record([
                    f.symbol.clone(),
                    r.n_obs.to_string(),
                    r.lags_used.to_string(),
                    r.statistic.to_string(),
                    cv("1%"),
                    cv("5%"),
                    cv("10%"),
                    r.reject_at_5pct.to_string(),
                    String::new(),
                ])?;
            }
            Err(e) => {
                warn!("{}: ADF failed: {e}", f.symbol);
                let mut row = vec![f.symbol.clone(), series.len().to_string()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(e.to_string());
                adf.write_record(row)?;
            }
        }
        match acf_pacf(&series, cfg.diag.acf_max_lag) {
            Ok(r) => {
                for lag in 0..r.acf.len() {
                    acf.write_record([
                        f.symbol.clone(),
                        lag.to_string(),
                        r.acf[lag].to_string(),
                        r.pacf[lag].to_string(),
                        r.conf_band.to_string(),
                    ])?;
                }
            }
            Err(e) => warn!("{}: ACF failed: {e}", f.symbol),
        }
    }
    let adf = adf.into_inner().map_err(|e| Failure::internal(e.to_string()))?;
    let acf = acf.into_inner().map_err(|e| Failure::internal(e.to_string()))?;
    let dir = cfg.out.join("diag");
    write_file(&dir.join("adf.csv"), |w| Ok(w.write_all(&adf)?))?;
    write_file(&dir.join("acf.csv"), |w| Ok(w.write_all(&acf)?))?;
    println!("diagnostics for {} symbols", frames.len());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Outcome {
    let duration_s = (cfg.session.end_ns - cfg.session.start_ns) as f64 / 1e9;
    let streams = cfg
        .symbols
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let params = SynthParams {
                symbol: s.clone(),
                start_ns: cfg.session.start_ns,
                ..cfg.synth.clone()
            };
            synth_stream(cfg.seed.wrapping_add(i as u64), duration_s, &params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (s, events) in cfg.symbols.iter().zip(&streams) {
        let path = cfg.out.join("synth").join(format!("{s}.csv"));
        write_file(&path, |w| Ok(write_csv(w, events)?))?;
        println!("{s}: {} events -> {}", events.len(), path.display());
    }
    Ok(())
}
