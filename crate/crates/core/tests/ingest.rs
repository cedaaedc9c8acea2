mod common;

use common::synth_events;
use lwi_core::book::{BookEngine, BookError};
use lwi_core::grid::{resample, Session, DEFAULT_GRID_NS};
use lwi_core::mbo::{
    parse_csv, read_binary, synth_stream, write_binary, write_csv, MboEvent, SynthParams, Symbol,
};

#[test]
fn ten_thousand_rows_round_trip_csv_and_binary() {
    let events = synth_events(5, 10_000);
    let mut text = Vec::new();
    write_csv(&mut text, &events).unwrap();
    let back = parse_csv(text.as_slice(), None).unwrap();
    assert!(back.errors.is_empty());
    assert_eq!(back.events, events);

    let mut bin = Vec::new();
    write_binary(&mut bin, &events).unwrap();
    let back = read_binary(bin.as_slice(), events[0].symbol).unwrap();
    assert!(back.errors.is_empty());
    assert_eq!(back.events, events);
}

#[test]
fn replay_never_references_unknown_orders() {
    for seed in [1, 2, 3] {
        let events = synth_stream(seed, 120.0, &SynthParams::default()).unwrap();
        let mut book = BookEngine::new();
        for ev in &events {
            match book.apply(ev) {
                Err(BookError::UnknownOrder(id)) => panic!("seed {seed}: unknown order {id}"),
                Err(e) => panic!("seed {seed}: {e:?}"),
                Ok(_) => {}
            }
            let l1 = book.snapshot();
            if let (Some(b), Some(a)) = (l1.best_bid_px, l1.best_ask_px) {
                assert!(b < a);
            }
        }
    }
}

/// Kolmogorov-Smirnov distance between the sample and an exponential law
/// with the sample's mean.
fn ks_exponential(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let rate = n / sample.iter().sum::<f64>();
    sample
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn unit_burst_multiplier_gives_exponential_gaps() {
    let params = SynthParams {
        burst_multiplier: 1.0,
        ..SynthParams::default()
    };
    let events = synth_stream(3, 60.0, &params).unwrap();
    let mut gaps: Vec<f64> = events
        .windows(2)
        .map(|w| (w[1].ts_event - w[0].ts_event) as f64)
        .collect();
    let d = ks_exponential(&mut gaps);
    let critical = 1.628 / (gaps.len() as f64).sqrt();
    assert!(d < critical, "KS distance {d} vs {critical}");
}

#[test]
fn bursts_are_visible_to_the_ks_oracle() {
    let params = SynthParams {
        burst_multiplier: 8.0,
        burst_rate: 0.2,
        ..SynthParams::default()
    };
    let events = synth_stream(3, 120.0, &params).unwrap();
    let mut gaps: Vec<f64> = events
        .windows(2)
        .map(|w| (w[1].ts_event - w[0].ts_event) as f64)
        .collect();
    let d = ks_exponential(&mut gaps);
    assert!(d > 1.628 / (gaps.len() as f64).sqrt());
}

fn l1_cancels_per_bin(events: &[MboEvent], start: u64, seconds: u64) -> Vec<u64> {
    let session = Session::new(start, start + seconds * 1_000_000_000, DEFAULT_GRID_NS).unwrap();
    resample(events, &session).bins.iter().map(|b| b.cancels_l1).collect()
}

#[test]
fn withdrawal_episodes_produce_cancel_spikes() {
    let params = SynthParams {
        withdrawal_rate: 0.05,
        ..SynthParams::default()
    };
    let events = synth_stream(9, 300.0, &params).unwrap();
    let mut cancels = l1_cancels_per_bin(&events, params.start_ns, 300);
    let max = *cancels.iter().max().unwrap();
    cancels.sort_unstable();
    let median = cancels[cancels.len() / 2];
    assert!(max > 3 * median, "max {max} median {median}");
}

#[test]
fn symbol_filter_and_unknown_symbol() {
    let events = synth_events(2, 500);
    let mut text = Vec::new();
    write_csv(&mut text, &events).unwrap();
    let other = [Symbol::new("OTHER").unwrap()];
    let out = parse_csv(text.as_slice(), Some(&other)).unwrap();
    assert!(out.events.is_empty());
    assert_eq!(out.filtered, 500);
}
