#![allow(dead_code)]

use lwi_core::book::BookL1;
use lwi_core::mbo::{synth_stream, Action, MboEvent, Side, SynthParams, Symbol};

/// Full-rescan book: a flat list of live orders, with L1 recomputed by
/// scanning every order.
#[derive(Default)]
pub struct OracleBook {
    orders: Vec<(u64, Side, i64, u32)>,
}

impl OracleBook {
    fn find(&self, id: u64) -> Option<usize> {
        self.orders.iter().position(|o| o.0 == id)
    }

    fn best(&self, side: Side) -> Option<i64> {
        let prices = self.orders.iter().filter(|o| o.1 == side).map(|o| o.2);
        match side {
            Side::Bid => prices.max(),
            _ => prices.min(),
        }
    }

    fn crosses(&self, side: Side, price: i64) -> bool {
        match side {
            Side::Bid => self.best(Side::Ask).is_some_and(|a| price >= a),
            _ => self.best(Side::Bid).is_some_and(|b| price <= b),
        }
    }

    pub fn l1(&self) -> BookL1 {
        let bb = self.best(Side::Bid);
        let ba = self.best(Side::Ask);
        let depth = |side: Side, px: Option<i64>| {
            self.orders
                .iter()
                .filter(|o| o.1 == side && Some(o.2) == px)
                .map(|o| u64::from(o.3))
                .sum()
        };
        BookL1 {
            best_bid_px: bb,
            best_ask_px: ba,
            bid_depth_l1: depth(Side::Bid, bb),
            ask_depth_l1: depth(Side::Ask, ba),
        }
    }

    fn reduce(&mut self, i: usize, qty: u32) {
        if qty == 0 || qty >= self.orders[i].3 {
            self.orders.swap_remove(i);
        } else {
            self.orders[i].3 -= qty;
        }
    }

    /// Apply an event; `false` when the event is rejected.
    pub fn apply(&mut self, ev: &MboEvent) -> bool {
        match ev.action {
            Action::Add => {
                if ev.size == 0 || ev.price <= 0 || ev.side == Side::None {
                    return false;
                }
                if self.find(ev.order_id).is_some() || self.crosses(ev.side, ev.price) {
                    return false;
                }
                self.orders.push((ev.order_id, ev.side, ev.price, ev.size));
                true
            }
            Action::Cancel => match self.find(ev.order_id) {
                Some(i) => {
                    self.reduce(i, ev.size);
                    true
                }
                None => false,
            },
            Action::Modify => {
                let Some(i) = self.find(ev.order_id) else {
                    return false;
                };
                let side = self.orders[i].1;
                if ev.size > 0 && (ev.price <= 0 || self.crosses(side, ev.price)) {
                    return false;
                }
                self.orders.swap_remove(i);
                if ev.size > 0 {
                    self.orders.push((ev.order_id, side, ev.price, ev.size));
                }
                true
            }
            Action::Trade | Action::Fill => match self.find(ev.order_id) {
                Some(i) => {
                    if ev.size > 0 {
                        self.reduce(i, ev.size);
                    }
                    true
                }
                None => ev.action == Action::Trade,
            },
            Action::ClearBook => {
                self.orders.clear();
                true
            }
            Action::None => true,
        }
    }
}

/// The first `n` events of a seeded synthetic stream with default
/// parameters.
pub fn synth_events(seed: u64, n: usize) -> Vec<MboEvent> {
    let params = SynthParams::default();
    let mut duration = n as f64 / 200.0;
    loop {
        let mut ev = synth_stream(seed, duration, &params).unwrap();
        if ev.len() >= n {
            ev.truncate(n);
            return ev;
        }
        duration *= 1.5;
    }
}

pub fn event(action: Action, side: Side, id: u64, price: i64, size: u32) -> MboEvent {
    MboEvent {
        ts_event: 0,
        order_id: id,
        symbol: Symbol::new("T").unwrap(),
        price,
        size,
        side,
        action,
        sequence: 0,
    }
}
