//! Limit-order-book state machine: per-order index plus per-price
//! aggregates, producing top-of-book snapshots and per-event flow deltas.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mbo::{Action, MboEvent, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderRec {
    pub price: i64,
    pub size: u32,
    pub side: Side,
}

/// Top-of-book state. Depths are aggregate resting size at the best prices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookL1 {
    pub best_bid_px: Option<i64>,
    pub best_ask_px: Option<i64>,
    pub bid_depth_l1: u64,
    pub ask_depth_l1: u64,
}

impl BookL1 {
    pub fn depth_l1(&self) -> u64 {
        self.bid_depth_l1 + self.ask_depth_l1
    }

    pub fn spread(&self) -> Option<i64> {
        Some(self.best_ask_px? - self.best_bid_px?)
    }

    /// Mid price in 1e-9 currency units.
    pub fn mid_px(&self) -> Option<f64> {
        Some((self.best_bid_px? as f64 + self.best_ask_px? as f64) / 2.0)
    }
}

/// Liquidity change at the best quote caused by one event, classified
/// against the best price of the event's side before the event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowDelta {
    pub adds_l1: u64,
    pub cancels_l1: u64,
    pub exec_l1: u64,
    pub side: Side,
}

impl FlowDelta {
    pub fn none(side: Side) -> Self {
        Self {
            adds_l1: 0,
            cancels_l1: 0,
            exec_l1: 0,
            side,
        }
    }

    /// Signed order-flow contribution: bid adds and ask removals push up,
    /// ask adds and bid removals push down.
    pub fn ofi(&self) -> i64 {
        let supply = self.adds_l1 as i64;
        let removal = (self.cancels_l1 + self.exec_l1) as i64;
        match self.side {
            Side::Bid => supply - removal,
            Side::Ask => removal - supply,
            Side::None => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BookError {
    UnknownOrder(u64),
    DuplicateOrder(u64),
    WouldCross { side: Side, price: i64 },
    InvalidEvent(&'static str),
}

impl fmt::Display for BookError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BookError::UnknownOrder(id) => write!(f, "unknown order id {id}"),
            BookError::DuplicateOrder(id) => write!(f, "duplicate live order id {id}"),
            BookError::WouldCross { side, price } => {
                write!(f, "{side:?} at {price} would cross the book")
            }
            BookError::InvalidEvent(msg) => write!(f, "invalid event: {msg}"),
        }
    }
}

impl std::error::Error for BookError {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BookErrorCounts {
    pub unknown_order: u64,
    pub duplicate_order: u64,
    pub would_cross: u64,
    pub invalid: u64,
}

impl BookErrorCounts {
    pub fn total(&self) -> u64 {
        self.unknown_order + self.duplicate_order + self.would_cross + self.invalid
    }
}

/// One symbol's book. Mutation is single-threaded; snapshots are copies.
#[derive(Clone, Debug, Default)]
pub struct BookEngine {
    orders: HashMap<u64, OrderRec>,
    bids: BTreeMap<i64, u64>,
    asks: BTreeMap<i64, u64>,
    errors: BookErrorCounts,
}

impl BookEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> BookL1 {
        let bid = self.bids.last_key_value();
        let ask = self.asks.first_key_value();
        BookL1 {
            best_bid_px: bid.map(|(p, _)| *p),
            best_ask_px: ask.map(|(p, _)| *p),
            bid_depth_l1: bid.map_or(0, |(_, d)| *d),
            ask_depth_l1: ask.map_or(0, |(_, d)| *d),
        }
    }

    pub fn error_counts(&self) -> BookErrorCounts {
        self.errors
    }

    pub fn live_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self, id: u64) -> Option<&OrderRec> {
        self.orders.get(&id)
    }

    /// Aggregate resting size at one price level.
    pub fn level_size(&self, side: Side, price: i64) -> u64 {
        let levels = match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
            Side::None => return 0,
        };
        levels.get(&price).copied().unwrap_or(0)
    }

    fn best(&self, side: Side) -> Option<i64> {
        match side {
            Side::Bid => self.bids.last_key_value().map(|(p, _)| *p),
            Side::Ask => self.asks.first_key_value().map(|(p, _)| *p),
            Side::None => None,
        }
    }

    /// True when `price` on `side` would be at or better than the current
    /// best of that side (or the side is empty).
    fn at_or_inside_best(&self, side: Side, price: i64) -> bool {
        match (side, self.best(side)) {
            (_, None) => true,
            (Side::Bid, Some(b)) => price >= b,
            (Side::Ask, Some(a)) => price <= a,
            (Side::None, _) => false,
        }
    }

    fn crosses(&self, side: Side, price: i64) -> bool {
        match side {
            Side::Bid => self.best(Side::Ask).is_some_and(|a| price >= a),
            Side::Ask => self.best(Side::Bid).is_some_and(|b| price <= b),
            Side::None => false,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<i64, u64> {
        match side {
            Side::Bid => &mut self.bids,
            _ => &mut self.asks,
        }
    }

    fn level_add(&mut self, side: Side, price: i64, qty: u64) {
        *self.levels_mut(side).entry(price).or_insert(0) += qty;
    }

    fn level_remove(&mut self, side: Side, price: i64, qty: u64) {
        let levels = self.levels_mut(side);
        let slot = levels.get_mut(&price).expect("occupied level for resident order");
        *slot -= qty;
        if *slot == 0 {
            levels.remove(&price);
        }
    }

    /// Remove up to `qty` from a resident order; `None` removes it entirely.
    fn reduce(&mut self, id: u64, qty: Option<u32>) -> (OrderRec, u64) {
        let rec = self.orders[&id];
        let take = match qty {
            Some(q) if q > 0 && q < rec.size => q,
            _ => rec.size,
        };
        self.level_remove(rec.side, rec.price, u64::from(take));
        if take == rec.size {
            self.orders.remove(&id);
        } else {
            self.orders.get_mut(&id).expect("resident").size -= take;
        }
        (rec, u64::from(take))
    }

    fn fail(&mut self, err: BookError) -> Result<FlowDelta, BookError> {
        match err {
            BookError::UnknownOrder(_) => self.errors.unknown_order += 1,
            BookError::DuplicateOrder(_) => self.errors.duplicate_order += 1,
            BookError::WouldCross { .. } => self.errors.would_cross += 1,
            BookError::InvalidEvent(_) => self.errors.invalid += 1,
        }
        Err(err)
    }

    /// Apply one event. On error the book is unchanged and the error is
    /// counted.
    ///
    /// Cancels with size 0 or at least the resident size remove the order;
    /// smaller sizes are partial cancels. Modify replaces the resting
    /// (price, size) and is classified by its net effect at the best quote.
    /// Trade and Fill both execute against the referenced resting order; a
    /// Trade whose id is not resident (e.g. 0) is ignored. ClearBook empties
    /// both sides without recording flow.
    pub fn apply(&mut self, ev: &MboEvent) -> Result<FlowDelta, BookError> {
        match ev.action {
            Action::Add => {
                if ev.size == 0 || ev.price <= 0 || ev.side == Side::None {
                    return self.fail(BookError::InvalidEvent("add violates event invariants"));
                }
                if self.orders.contains_key(&ev.order_id) {
                    return self.fail(BookError::DuplicateOrder(ev.order_id));
                }
                if self.crosses(ev.side, ev.price) {
                    return self.fail(BookError::WouldCross {
                        side: ev.side,
                        price: ev.price,
                    });
                }
                let at_l1 = self.at_or_inside_best(ev.side, ev.price);
                self.orders.insert(
                    ev.order_id,
                    OrderRec {
                        price: ev.price,
                        size: ev.size,
                        side: ev.side,
                    },
                );
                self.level_add(ev.side, ev.price, u64::from(ev.size));
                let mut delta = FlowDelta::none(ev.side);
                if at_l1 {
                    delta.adds_l1 = u64::from(ev.size);
                }
                Ok(delta)
            }
            Action::Cancel => {
                let Some(rec) = self.orders.get(&ev.order_id).copied() else {
                    return self.fail(BookError::UnknownOrder(ev.order_id));
                };
                let at_l1 = self.best(rec.side) == Some(rec.price);
                let (_, removed) = self.reduce(ev.order_id, Some(ev.size));
                let mut delta = FlowDelta::none(rec.side);
                if at_l1 {
                    delta.cancels_l1 = removed;
                }
                Ok(delta)
            }
            Action::Modify => {
                let Some(old) = self.orders.get(&ev.order_id).copied() else {
                    return self.fail(BookError::UnknownOrder(ev.order_id));
                };
                if ev.size > 0 && ev.price <= 0 {
                    return self.fail(BookError::InvalidEvent("modify to non-positive price"));
                }
                if ev.size > 0 && self.crosses(old.side, ev.price) {
                    return self.fail(BookError::WouldCross {
                        side: old.side,
                        price: ev.price,
                    });
                }
                let pre_best = self.best(old.side);
                let old_l1 = if pre_best == Some(old.price) {
                    u64::from(old.size)
                } else {
                    0
                };
                let new_l1 = if ev.size == 0 {
                    0
                } else if match (old.side, pre_best) {
                    (Side::Bid, Some(b)) => ev.price >= b,
                    (Side::Ask, Some(a)) => ev.price <= a,
                    _ => true,
                } {
                    u64::from(ev.size)
                } else {
                    0
                };
                self.reduce(ev.order_id, None);
                if ev.size > 0 {
                    self.orders.insert(
                        ev.order_id,
                        OrderRec {
                            price: ev.price,
                            size: ev.size,
                            side: old.side,
                        },
                    );
                    self.level_add(old.side, ev.price, u64::from(ev.size));
                }
                let mut delta = FlowDelta::none(old.side);
                if new_l1 > old_l1 {
                    delta.adds_l1 = new_l1 - old_l1;
                } else {
                    delta.cancels_l1 = old_l1 - new_l1;
                }
                Ok(delta)
            }
            Action::Trade | Action::Fill => {
                let Some(rec) = self.orders.get(&ev.order_id).copied() else {
                    if ev.action == Action::Trade {
                        return Ok(FlowDelta::none(ev.side));
                    }
                    return self.fail(BookError::UnknownOrder(ev.order_id));
                };
                if ev.size == 0 {
                    return Ok(FlowDelta::none(rec.side));
                }
                let at_l1 = self.best(rec.side) == Some(rec.price);
                let (_, removed) = self.reduce(ev.order_id, Some(ev.size));
                let mut delta = FlowDelta::none(rec.side);
                if at_l1 {
                    delta.exec_l1 = removed;
                }
                Ok(delta)
            }
            Action::ClearBook => {
                self.orders.clear();
                self.bids.clear();
                self.asks.clear();
                Ok(FlowDelta::none(ev.side))
            }
            Action::None => Ok(FlowDelta::none(ev.side)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbo::Symbol;

    fn ev(action: Action, side: Side, id: u64, price: i64, size: u32) -> MboEvent {
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

    #[test]
    fn empty_book_snapshot() {
        let book = BookEngine::new();
        let s = book.snapshot();
        assert_eq!(s.best_bid_px, None);
        assert_eq!(s.best_ask_px, None);
        assert_eq!(s.bid_depth_l1, 0);
        assert_eq!(s.ask_depth_l1, 0);
    }

    #[test]
    fn add_then_cancel() {
        let mut book = BookEngine::new();
        let d = book.apply(&ev(Action::Add, Side::Bid, 1, 100, 50)).unwrap();
        assert_eq!(d.adds_l1, 50);
        let s = book.snapshot();
        assert_eq!((s.best_bid_px, s.bid_depth_l1), (Some(100), 50));
        let d = book.apply(&ev(Action::Cancel, Side::Bid, 1, 100, 50)).unwrap();
        assert_eq!(d.cancels_l1, 50);
        assert_eq!(d.adds_l1, 0);
        assert_eq!(book.snapshot(), BookL1::default());
    }

    #[test]
    fn same_price_aggregates() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Bid, 1, 100, 50)).unwrap();
        book.apply(&ev(Action::Add, Side::Bid, 2, 100, 30)).unwrap();
        assert_eq!(book.snapshot().bid_depth_l1, 80);
    }

    #[test]
    fn better_price_becomes_l1() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Bid, 1, 100, 50)).unwrap();
        let d = book.apply(&ev(Action::Add, Side::Bid, 2, 101, 10)).unwrap();
        assert_eq!(d.adds_l1, 10);
        let s = book.snapshot();
        assert_eq!((s.best_bid_px, s.bid_depth_l1), (Some(101), 10));
        // A deeper add is not top-of-book flow.
        let d = book.apply(&ev(Action::Add, Side::Bid, 3, 99, 10)).unwrap();
        assert_eq!(d.adds_l1, 0);
    }

    #[test]
    fn unknown_and_duplicate_ids_leave_state_unchanged() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Ask, 1, 105, 5)).unwrap();
        let before = book.snapshot();
        assert_eq!(
            book.apply(&ev(Action::Cancel, Side::Ask, 9, 105, 5)),
            Err(BookError::UnknownOrder(9))
        );
        assert_eq!(
            book.apply(&ev(Action::Add, Side::Ask, 1, 106, 5)),
            Err(BookError::DuplicateOrder(1))
        );
        assert!(book.apply(&ev(Action::Fill, Side::Ask, 9, 105, 5)).is_err());
        assert_eq!(book.snapshot(), before);
        assert_eq!(book.error_counts().unknown_order, 2);
        assert_eq!(book.error_counts().duplicate_order, 1);
    }

    #[test]
    fn crossing_add_is_rejected() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Ask, 1, 105, 5)).unwrap();
        assert!(matches!(
            book.apply(&ev(Action::Add, Side::Bid, 2, 105, 5)),
            Err(BookError::WouldCross { .. })
        ));
        assert_eq!(book.live_orders(), 1);
    }

    #[test]
    fn executions_are_not_cancels() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Ask, 1, 105, 50)).unwrap();
        let d = book.apply(&ev(Action::Fill, Side::Ask, 1, 105, 20)).unwrap();
        assert_eq!((d.exec_l1, d.cancels_l1), (20, 0));
        let d = book.apply(&ev(Action::Trade, Side::Ask, 1, 105, 30)).unwrap();
        assert_eq!(d.exec_l1, 30);
        assert_eq!(book.live_orders(), 0);
        // Trade without a resting id is informational only.
        let d = book.apply(&ev(Action::Trade, Side::Bid, 0, 105, 30)).unwrap();
        assert_eq!(d, FlowDelta::none(Side::Bid));
    }

    #[test]
    fn partial_cancel_and_modify_classification() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Bid, 1, 100, 50)).unwrap();
        book.apply(&ev(Action::Add, Side::Bid, 2, 99, 40)).unwrap();
        let d = book.apply(&ev(Action::Cancel, Side::Bid, 1, 100, 20)).unwrap();
        assert_eq!(d.cancels_l1, 20);
        assert_eq!(book.snapshot().bid_depth_l1, 30);
        // Shrink at L1: net cancel.
        let d = book.apply(&ev(Action::Modify, Side::Bid, 1, 100, 10)).unwrap();
        assert_eq!((d.adds_l1, d.cancels_l1), (0, 20));
        // Move the deep order inside: net add.
        let d = book.apply(&ev(Action::Modify, Side::Bid, 2, 101, 40)).unwrap();
        assert_eq!((d.adds_l1, d.cancels_l1), (40, 0));
        let s = book.snapshot();
        assert_eq!((s.best_bid_px, s.bid_depth_l1), (Some(101), 40));
        // Move the old best away from the top: net cancel of its full size.
        let d = book.apply(&ev(Action::Modify, Side::Bid, 2, 98, 40)).unwrap();
        assert_eq!(d.cancels_l1, 40);
        assert_eq!(book.snapshot().best_bid_px, Some(100));
    }

    #[test]
    fn clear_book_empties_both_sides() {
        let mut book = BookEngine::new();
        book.apply(&ev(Action::Add, Side::Bid, 1, 100, 50)).unwrap();
        book.apply(&ev(Action::Add, Side::Ask, 2, 101, 50)).unwrap();
        let d = book.apply(&ev(Action::ClearBook, Side::None, 0, 0, 0)).unwrap();
        assert_eq!(d.ofi(), 0);
        assert_eq!(book.snapshot(), BookL1::default());
        assert_eq!(book.live_orders(), 0);
    }

    #[test]
    fn ofi_signs() {
        let bid_add = FlowDelta {
            adds_l1: 100,
            ..FlowDelta::none(Side::Bid)
        };
        let ask_cancel = FlowDelta {
            cancels_l1: 30,
            ..FlowDelta::none(Side::Ask)
        };
        let bid_exec = FlowDelta {
            exec_l1: 7,
            ..FlowDelta::none(Side::Bid)
        };
        assert_eq!(bid_add.ofi(), 100);
        assert_eq!(ask_cancel.ofi(), 30);
        assert_eq!(bid_exec.ofi(), -7);
    }
}
