//! Seeded synthetic MBO streams: marked Poisson arrivals with log-normal
//! sizes, intensity bursts and top-of-book withdrawal episodes.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Action, MboEvent, Side, Symbol};
use crate::error::{Error, Result};

/// Generator knobs. Rates are per second of event time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub symbol: String,
    /// Timestamp of the first instant of the stream (ns since epoch).
    pub start_ns: u64,
    pub add_rate: f64,
    pub cancel_rate: f64,
    pub modify_rate: f64,
    pub exec_rate: f64,
    /// Intensity multiplier while a burst is active (1 disables bursts).
    pub burst_multiplier: f64,
    pub burst_rate: f64,
    pub burst_duration_s: f64,
    /// Arrival rate of withdrawal episodes (0 disables them).
    pub withdrawal_rate: f64,
    pub withdrawal_duration_s: f64,
    /// Share of events during an episode that cancel a top-of-book order.
    pub withdrawal_cancel_share: f64,
    pub ref_price: i64,
    pub tick: i64,
    /// Adds land within this many ticks of the opposite best quote.
    pub levels: u32,
    pub size_log_mean: f64,
    pub size_log_sd: f64,
    pub max_live_orders: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            symbol: "SYN".into(),
            start_ns: 1_753_898_400_000_000_000,
            add_rate: 120.0,
            cancel_rate: 90.0,
            modify_rate: 10.0,
            exec_rate: 20.0,
            burst_multiplier: 4.0,
            burst_rate: 0.05,
            burst_duration_s: 2.0,
            withdrawal_rate: 0.02,
            withdrawal_duration_s: 1.0,
            withdrawal_cancel_share: 0.7,
            ref_price: 50 * super::PRICE_SCALE,
            tick: 10_000_000,
            levels: 10,
            size_log_mean: 100f64.ln(),
            size_log_sd: 0.7,
            max_live_orders: 400,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("synth: {msg}")));
        let rates = [self.add_rate, self.cancel_rate, self.modify_rate, self.exec_rate];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("event rates must be finite and non-negative");
        }
        if self.add_rate <= 0.0 {
            return bad("add_rate must be positive");
        }
        if !(self.burst_multiplier.is_finite() && self.burst_multiplier >= 1.0) {
            return bad("burst_multiplier must be >= 1");
        }
        for (name, rate, dur) in [
            ("burst", self.burst_rate, self.burst_duration_s),
            ("withdrawal", self.withdrawal_rate, self.withdrawal_duration_s),
        ] {
            if !rate.is_finite() || rate < 0.0 {
                return bad(&format!("{name}_rate must be non-negative"));
            }
            if rate > 0.0 && !(dur.is_finite() && dur > 0.0) {
                return bad(&format!("{name}_duration_s must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.withdrawal_cancel_share) {
            return bad("withdrawal_cancel_share must lie in [0, 1]");
        }
        if self.tick <= 0 || self.levels == 0 {
            return bad("tick and levels must be positive");
        }
        if self.ref_price <= self.tick * (i64::from(self.levels) + 1) {
            return bad("ref_price too small for the price ladder");
        }
        if !(self.size_log_mean.is_finite() && self.size_log_sd.is_finite() && self.size_log_sd >= 0.0)
        {
            return bad("size distribution parameters must be finite");
        }
        if self.max_live_orders == 0 {
            return bad("max_live_orders must be positive");
        }
        Symbol::new(&self.symbol).ok_or_else(|| Error::Config("synth: symbol too long".into()))?;
        Ok(())
    }
}

/// Alternating on/off regime with exponential off-periods and fixed
/// on-periods.
struct Regime {
    active: bool,
    next_switch: f64,
    rate: f64,
    duration: f64,
}

impl Regime {
    fn new(rate: f64, duration: f64, rng: &mut ChaCha8Rng) -> Self {
        let next_switch = if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(rng)
        } else {
            f64::INFINITY
        };
        Self {
            active: false,
            next_switch,
            rate,
            duration,
        }
    }

    fn toggle(&mut self, rng: &mut ChaCha8Rng) {
        let now = self.next_switch;
        if self.active {
            self.active = false;
            self.next_switch = now + Exp::new(self.rate).expect("positive rate").sample(rng);
        } else {
            self.active = true;
            self.next_switch = now + self.duration;
        }
    }

    fn advance_to(&mut self, t: f64, rng: &mut ChaCha8Rng) {
        while self.next_switch <= t {
            self.toggle(rng);
        }
    }
}

#[derive(Clone, Copy)]
struct Resting {
    side: Side,
    price: i64,
    size: u32,
}

/// Minimal book the generator consults to keep its output valid.
#[derive(Default)]
struct ShadowBook {
    orders: HashMap<u64, Resting>,
    bids: BTreeMap<i64, Vec<u64>>,
    asks: BTreeMap<i64, Vec<u64>>,
    live: Vec<u64>,
    live_pos: HashMap<u64, usize>,
}

impl ShadowBook {
    fn levels(&mut self, side: Side) -> &mut BTreeMap<i64, Vec<u64>> {
        match side {
            Side::Bid => &mut self.bids,
            _ => &mut self.asks,
        }
    }

    fn best(&self, side: Side) -> Option<i64> {
        match side {
            Side::Bid => self.bids.last_key_value().map(|(p, _)| *p),
            _ => self.asks.first_key_value().map(|(p, _)| *p),
        }
    }

    fn insert(&mut self, id: u64, rec: Resting) {
        self.orders.insert(id, rec);
        self.levels(rec.side).entry(rec.price).or_default().push(id);
        self.live_pos.insert(id, self.live.len());
        self.live.push(id);
    }

    fn remove(&mut self, id: u64) -> Resting {
        let rec = self.orders.remove(&id).expect("live order");
        let levels = self.levels(rec.side);
        let queue = levels.get_mut(&rec.price).expect("occupied level");
        queue.retain(|&o| o != id);
        if queue.is_empty() {
            levels.remove(&rec.price);
        }
        let pos = self.live_pos.remove(&id).expect("indexed order");
        self.live.swap_remove(pos);
        if let Some(&moved) = self.live.get(pos) {
            self.live_pos.insert(moved, pos);
        }
        rec
    }

    fn top_order(&self, side: Side, rng: &mut ChaCha8Rng, front: bool) -> Option<u64> {
        let level = match side {
            Side::Bid => self.bids.last_key_value(),
            _ => self.asks.first_key_value(),
        }?;
        let queue = level.1;
        if front {
            queue.first().copied()
        } else {
            Some(queue[rng.random_range(0..queue.len())])
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Add,
    Cancel,
    Modify,
    Exec,
    TopCancel,
}

struct Generator<'a> {
    params: &'a SynthParams,
    symbol: Symbol,
    rng: ChaCha8Rng,
    sizes: LogNormal<f64>,
    book: ShadowBook,
    next_id: u64,
    sequence: u64,
    out: Vec<MboEvent>,
}

impl Generator<'_> {
    fn draw_size(&mut self) -> u32 {
        let s = self.sizes.sample(&mut self.rng).round();
        s.clamp(1.0, 1_000_000.0) as u32
    }

    fn pick_side(&mut self) -> Side {
        if self.rng.random_bool(0.5) {
            Side::Bid
        } else {
            Side::Ask
        }
    }

    fn add_price(&mut self, side: Side) -> i64 {
        let tick = self.params.tick;
        let depth = i64::from(self.rng.random_range(1..=self.params.levels));
        let price = match side {
            Side::Bid => {
                let anchor = self.book.best(Side::Ask).unwrap_or_else(|| {
                    self.book
                        .best(Side::Bid)
                        .map_or(self.params.ref_price + tick, |b| b + tick)
                });
                anchor - depth * tick
            }
            _ => {
                let anchor = self.book.best(Side::Bid).unwrap_or_else(|| {
                    self.book
                        .best(Side::Ask)
                        .map_or(self.params.ref_price, |a| a - tick)
                });
                anchor + depth * tick
            }
        };
        price.max(tick)
    }

    fn emit(&mut self, ts: u64, order_id: u64, price: i64, size: u32, side: Side, action: Action) {
        self.sequence += 1;
        self.out.push(MboEvent {
            ts_event: ts,
            order_id,
            symbol: self.symbol,
            price,
            size,
            side,
            action,
            sequence: self.sequence,
        });
    }

    fn random_live(&mut self) -> u64 {
        let i = self.rng.random_range(0..self.book.live.len());
        self.book.live[i]
    }

    fn step(&mut self, ts: u64, mut kind: Kind) {
        if self.book.live.is_empty() {
            kind = Kind::Add;
        } else if matches!(kind, Kind::Add) && self.book.live.len() >= self.params.max_live_orders {
            kind = Kind::Cancel;
        }
        match kind {
            Kind::Add => {
                let side = self.pick_side();
                let price = self.add_price(side);
                let size = self.draw_size();
                self.next_id += 1;
                let id = self.next_id;
                self.book.insert(id, Resting { side, price, size });
                self.emit(ts, id, price, size, side, Action::Add);
            }
            Kind::Cancel => {
                let id = self.random_live();
                let rec = self.book.orders[&id];
                if rec.size >= 2 && self.rng.random_bool(0.2) {
                    let cut = self.rng.random_range(1..rec.size);
                    self.book.orders.get_mut(&id).expect("live").size -= cut;
                    self.emit(ts, id, rec.price, cut, rec.side, Action::Cancel);
                } else {
                    self.book.remove(id);
                    self.emit(ts, id, rec.price, rec.size, rec.side, Action::Cancel);
                }
            }
            Kind::TopCancel => {
                let mut side = self.pick_side();
                if self.book.best(side).is_none() {
                    side = if side == Side::Bid { Side::Ask } else { Side::Bid };
                }
                let rng = &mut self.rng;
                let id = self.book.top_order(side, rng, false).expect("non-empty side");
                let rec = self.book.remove(id);
                self.emit(ts, id, rec.price, rec.size, rec.side, Action::Cancel);
            }
            Kind::Modify => {
                let id = self.random_live();
                let rec = self.book.orders[&id];
                if rec.size >= 2 && self.rng.random_bool(0.5) {
                    let new_size = self.rng.random_range(1..rec.size);
                    self.book.orders.get_mut(&id).expect("live").size = new_size;
                    self.emit(ts, id, rec.price, new_size, rec.side, Action::Modify);
                } else {
                    self.book.remove(id);
                    let price = self.add_price(rec.side);
                    let size = self.draw_size();
                    self.book.insert(
                        id,
                        Resting {
                            side: rec.side,
                            price,
                            size,
                        },
                    );
                    self.emit(ts, id, price, size, rec.side, Action::Modify);
                }
            }
            Kind::Exec => {
                let mut side = self.pick_side();
                if self.book.best(side).is_none() {
                    side = if side == Side::Bid { Side::Ask } else { Side::Bid };
                }
                let rng = &mut self.rng;
                let id = self.book.top_order(side, rng, true).expect("non-empty side");
                let rec = self.book.orders[&id];
                let qty = self.draw_size().min(rec.size);
                if qty == rec.size {
                    self.book.remove(id);
                } else {
                    self.book.orders.get_mut(&id).expect("live").size -= qty;
                }
                let action = if self.rng.random_bool(0.5) {
                    Action::Trade
                } else {
                    Action::Fill
                };
                self.emit(ts, id, rec.price, qty, rec.side, action);
            }
        }
    }
}

/// Generate a deterministic stream of `duration_s` seconds.
///
/// Every Cancel, Modify, Trade and Fill references an order that is live at
/// that point, and adds never cross the opposite best quote, so the stream
/// replays through [`crate::book::BookEngine`] without errors.
pub fn synth_stream(seed: u64, duration_s: f64, params: &SynthParams) -> Result<Vec<MboEvent>> {
    params.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Config("synth: duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bursts = Regime::new(params.burst_rate, params.burst_duration_s, &mut rng);
    let mut episodes = Regime::new(params.withdrawal_rate, params.withdrawal_duration_s, &mut rng);
    let weights = [
        params.add_rate,
        params.cancel_rate,
        params.modify_rate,
        params.exec_rate,
    ];
    let base_rate: f64 = weights.iter().sum();
    let mut gen = Generator {
        params,
        symbol: Symbol::new(&params.symbol).expect("validated symbol"),
        rng,
        sizes: LogNormal::new(params.size_log_mean, params.size_log_sd).expect("validated"),
        book: ShadowBook::default(),
        next_id: 0,
        sequence: 0,
        out: Vec::with_capacity((base_rate * duration_s * 1.2) as usize),
    };

    let mut t = 0.0f64;
    loop {
        let rate = if bursts.active {
            base_rate * params.burst_multiplier
        } else {
            base_rate
        };
        let dt = Exp::new(rate).expect("positive rate").sample(&mut gen.rng);
        if t + dt >= bursts.next_switch {
            // Memoryless restart at the regime boundary.
            t = bursts.next_switch;
            if t >= duration_s {
                break;
            }
            bursts.toggle(&mut gen.rng);
            continue;
        }
        t += dt;
        if t >= duration_s {
            break;
        }
        episodes.advance_to(t, &mut gen.rng);
        let kind = if episodes.active && gen.rng.random_bool(params.withdrawal_cancel_share) {
            Kind::TopCancel
        } else {
            let mut u = gen.rng.random::<f64>() * base_rate;
            let mut pick = Kind::Exec;
            for (w, k) in weights.iter().zip([Kind::Add, Kind::Cancel, Kind::Modify, Kind::Exec]) {
                if u < *w {
                    pick = k;
                    break;
                }
                u -= w;
            }
            pick
        };
        let ts = params.start_ns + (t * 1e9) as u64;
        gen.step(ts, kind);
    }
    Ok(gen.out)
}
