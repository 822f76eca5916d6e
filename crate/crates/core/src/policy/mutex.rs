use std::collections::BTreeMap;

/// Per-object write ledger: one writer per (object, slot).
///
/// A slot is `tick / granularity`; granularity 1 means one write per object
/// per tick.
#[derive(Debug, Clone)]
pub struct MutexGuard {
    granularity: i64,
    holders: BTreeMap<(String, i64), u64>,
}

impl Default for MutexGuard {
    fn default() -> Self {
        Self::new(1)
    }
}

impl MutexGuard {
    pub fn new(granularity: i64) -> Self {
        MutexGuard {
            granularity: granularity.max(1),
            holders: BTreeMap::new(),
        }
    }

    pub fn granularity(&self) -> i64 {
        self.granularity
    }

    /// Grants the first claimant of (object, slot) and refuses the rest.
    /// Re-acquiring with the holder's own id succeeds.
    pub fn acquire_write_mutex(&mut self, object_id: &str, tick: i64, behavior_id: u64) -> bool {
        let slot = tick.div_euclid(self.granularity);
        let holder = *self
            .holders
            .entry((object_id.to_string(), slot))
            .or_insert(behavior_id);
        holder == behavior_id
    }

    pub fn holder(&self, object_id: &str, tick: i64) -> Option<u64> {
        self.holders
            .get(&(object_id.to_string(), tick.div_euclid(self.granularity)))
            .copied()
    }
}
