//! Holding buffer for lines whose array rows were amorphized by a read.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldingEntry {
    pub id: u64,
    pub address: u64,
    pub data: Vec<u8>,
    /// Op id of the writeback restoring this entry, once issued.
    pub writeback: Option<u64>,
}

/// Entries are kept oldest first. Slots are reserved when a read issues so a
/// completing read always has somewhere to park its data.
#[derive(Debug, Clone)]
pub struct HoldingBuffer {
    capacity: usize,
    entries: VecDeque<HoldingEntry>,
    reserved: usize,
    high_water: usize,
    next_id: u64,
}

impl HoldingBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: VecDeque::new(), reserved: 0, high_water: 0, next_id: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reserved(&self) -> usize {
        self.reserved
    }

    pub fn high_water(&self) -> usize {
        self.high_water
    }

    pub fn entries(&self) -> impl Iterator<Item = &HoldingEntry> {
        self.entries.iter()
    }

    pub fn lookup(&self, address: u64) -> Option<&[u8]> {
        self.entries
            .iter()
            .find(|e| e.address == address)
            .map(|e| e.data.as_slice())
    }

    /// Drops the entry for `address`; returns whether one was present.
    pub fn invalidate(&mut self, address: u64) -> bool {
        match self.entries.iter().position(|e| e.address == address) {
            Some(i) => {
                self.entries.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn has_room(&self) -> bool {
        self.entries.len() + self.reserved < self.capacity
    }

    pub fn reserve(&mut self) {
        assert!(self.has_room(), "holding buffer over-reserved");
        self.reserved += 1;
    }

    pub fn release(&mut self) {
        self.reserved -= 1;
    }

    /// Fills a previously reserved slot.
    pub fn insert(&mut self, address: u64, data: Vec<u8>) {
        debug_assert!(self.lookup(address).is_none());
        self.reserved -= 1;
        self.next_id += 1;
        self.entries.push_back(HoldingEntry { id: self.next_id, address, data, writeback: None });
        self.high_water = self.high_water.max(self.entries.len());
        debug_assert!(self.entries.len() + self.reserved <= self.capacity);
    }

    /// Oldest entry with no writeback in flight.
    pub fn next_writeback(&self) -> Option<&HoldingEntry> {
        self.entries.iter().find(|e| e.writeback.is_none())
    }

    pub fn mark_writeback(&mut self, entry_id: u64, op: u64) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.id == entry_id) {
            e.writeback = Some(op);
        }
    }

    /// Removes the entry once its row is restored. Returns false if the entry
    /// had already been invalidated by a newer write.
    pub fn finish_writeback(&mut self, entry_id: u64) -> bool {
        match self.entries.iter().position(|e| e.id == entry_id) {
            Some(i) => {
                self.entries.remove(i);
                true
            }
            None => false,
        }
    }
}
