use std::collections::BTreeMap;

use super::SimTime;

/// Handle for a scheduled event; ordering key of the calendar.
///
/// Events pop by time, then by `rank` (lower first), then in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub time: SimTime,
    pub rank: u8,
    seq: u64,
}

/// Future-event list with cancellation.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    pending: BTreeMap<EventKey, E>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            pending: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn schedule(&mut self, time: SimTime, rank: u8, event: E) -> EventKey {
        let key = EventKey {
            time,
            rank,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.pending.insert(key, event);
        key
    }

    /// Removes a pending event; returns it if it had not fired yet.
    pub fn cancel(&mut self, key: EventKey) -> Option<E> {
        self.pending.remove(&key)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.first_key_value().map(|(k, _)| k.time)
    }

    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        self.pending.pop_first().map(|(k, e)| (k.time, e))
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}
