use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
struct Slot<V> {
    value: V,
    hits: u64,
    last_used: u64,
}

/// Bounded map evicting the least-frequently-used entry, oldest use first on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct LfuCache<K: Ord + Clone, V> {
    capacity: usize,
    slots: BTreeMap<K, Slot<V>>,
    tick: u64,
}

impl<K: Ord + Clone, V> LfuCache<K, V> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        Self {
            capacity,
            slots: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn contains(&self, key: &K) -> bool {
        self.slots.contains_key(key)
    }

    /// Looks up `key`, counting a hit.
    pub fn get(&mut self, key: &K) -> Option<&V> {
        self.tick += 1;
        let tick = self.tick;
        self.slots.get_mut(key).map(|s| {
            s.hits += 1;
            s.last_used = tick;
            &s.value
        })
    }

    /// Looks up `key` without touching the counters.
    pub fn peek(&self, key: &K) -> Option<&V> {
        self.slots.get(key).map(|s| &s.value)
    }

    pub fn hits(&self, key: &K) -> Option<u64> {
        self.slots.get(key).map(|s| s.hits)
    }

    /// Inserts or replaces `key`. Returns the evicted entry when the cache was full.
    pub fn insert(&mut self, key: K, value: V) -> Option<(K, V)> {
        self.tick += 1;
        if let Some(slot) = self.slots.get_mut(&key) {
            slot.value = value;
            slot.last_used = self.tick;
            return None;
        }
        let evicted = if self.slots.len() >= self.capacity {
            let victim = self
                .slots
                .iter()
                .min_by_key(|(_, s)| (s.hits, s.last_used))
                .map(|(k, _)| k.clone())
                .expect("full cache is non-empty");
            self.slots.remove(&victim).map(|s| (victim, s.value))
        } else {
            None
        };
        self.slots.insert(
            key,
            Slot {
                value,
                hits: 0,
                last_used: self.tick,
            },
        );
        evicted
    }

    pub fn remove(&mut self, key: &K) -> Option<V> {
        self.slots.remove(key).map(|s| s.value)
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.slots.keys()
    }
}
