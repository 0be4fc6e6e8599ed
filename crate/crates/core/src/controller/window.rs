//! Bandwidth windows for in-flight optical operations.
//!
//! A window admits `bits` per `period`. It behaves as a token bucket whose
//! depth is the window size: an operation may start while the outstanding
//! backlog leaves room for it, and an operation larger than the whole window
//! (a full cache-line read against a narrow read window) waits for an empty
//! window and then occupies it for `size / bits` periods. Accounting is kept
//! in `ps * bits` so that no rounding creeps into long runs.

use crate::engine::Picos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateWindow {
    bits: u64,
    period: Picos,
    busy_until_scaled: u128,
}

impl RateWindow {
    pub fn new(bits: u64, period: Picos) -> Self {
        assert!(bits > 0 && period > 0, "window must be non-empty");
        Self { bits, period, busy_until_scaled: 0 }
    }

    pub fn window_bits(&self) -> u64 {
        self.bits
    }

    pub fn period(&self) -> Picos {
        self.period
    }

    fn allowed_backlog(&self, size: u64) -> u64 {
        self.bits.max(size) - size
    }

    /// Earliest instant at which an operation of `size` bits may start.
    pub fn earliest_start(&self, size: u64) -> Picos {
        let limit = self.allowed_backlog(size) as u128 * self.period as u128;
        let Some(excess) = self.busy_until_scaled.checked_sub(limit) else {
            return 0;
        };
        excess.div_ceil(self.bits as u128) as Picos
    }

    pub fn can_start(&self, now: Picos, size: u64) -> bool {
        self.earliest_start(size) <= now
    }

    pub fn reserve(&mut self, now: Picos, size: u64) {
        debug_assert!(self.can_start(now, size));
        let base = self.busy_until_scaled.max(now as u128 * self.bits as u128);
        self.busy_until_scaled = base + size as u128 * self.period as u128;
    }

    /// Bits admitted but not yet drained at `now`.
    pub fn backlog_bits(&self, now: Picos) -> f64 {
        let drained = now as u128 * self.bits as u128;
        self.busy_until_scaled.saturating_sub(drained) as f64 / self.period as f64
    }
}
