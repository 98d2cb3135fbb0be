//! Set-associative storage with one NRU bit per way and an optional
//! retired bit that protects proven entries from eviction.

/// One way of a set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Way<P> {
    pub valid: bool,
    pub tag: u16,
    pub nru: bool,
    pub retired: bool,
    pub payload: P,
}

impl<P: Default> Default for Way<P> {
    fn default() -> Self {
        Self {
            valid: false,
            tag: 0,
            nru: false,
            retired: false,
            payload: P::default(),
        }
    }
}

/// Victim ranking: invalid ways first, then (when retire-aware) ways whose
/// retired bit is clear, then the rest. Within a rank the first way with a
/// clear NRU bit wins, falling back to the lowest way index.
#[derive(Debug, Clone)]
pub struct SetAssoc<P> {
    sets: usize,
    ways: usize,
    slots: Vec<Way<P>>,
    retire_aware: bool,
}

impl<P: Clone + Default> SetAssoc<P> {
    pub fn new(entries: usize, ways: usize, retire_aware: bool) -> Self {
        assert!(ways >= 1, "ways must be at least 1");
        assert!(
            entries >= ways && entries % ways == 0,
            "{entries} entries do not split into {ways}-way sets"
        );
        Self {
            sets: entries / ways,
            ways,
            slots: vec![Way::default(); entries],
            retire_aware,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn set(&self, set: usize) -> &[Way<P>] {
        &self.slots[set * self.ways..(set + 1) * self.ways]
    }

    pub fn way_mut(&mut self, set: usize, way: usize) -> &mut Way<P> {
        &mut self.slots[set * self.ways + way]
    }

    pub fn find(&self, set: usize, mut hit: impl FnMut(&Way<P>) -> bool) -> Option<usize> {
        self.set(set).iter().position(|w| w.valid && hit(w))
    }

    /// Marks `way` recently used. When that leaves every NRU bit in the set
    /// set, all other bits are cleared.
    pub fn touch(&mut self, set: usize, way: usize) {
        let ways = self.ways;
        let base = set * ways;
        self.slots[base + way].nru = true;
        if self.slots[base..base + ways].iter().all(|w| w.nru) {
            for (i, w) in self.slots[base..base + ways].iter_mut().enumerate() {
                w.nru = i == way;
            }
        }
    }

    pub fn victim(&self, set: usize) -> usize {
        let ways = self.set(set);
        if let Some(i) = ways.iter().position(|w| !w.valid) {
            return i;
        }
        let pick = |keep: &dyn Fn(&Way<P>) -> bool| -> Option<usize> {
            ways.iter()
                .position(|w| keep(w) && !w.nru)
                .or_else(|| ways.iter().position(|w| keep(w)))
        };
        if self.retire_aware {
            if let Some(i) = pick(&|w| !w.retired) {
                return i;
            }
        }
        pick(&|_| true).expect("a full set has at least one way")
    }

    /// Fills the victim way of `set` and returns its index.
    pub fn allocate(&mut self, set: usize, tag: u16, payload: P) -> usize {
        let way = self.victim(set);
        *self.way_mut(set, way) = Way {
            valid: true,
            tag,
            nru: false,
            retired: false,
            payload,
        };
        self.touch(set, way);
        way
    }

    pub fn occupancy(&self) -> usize {
        self.slots.iter().filter(|w| w.valid).count()
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }
}

/// Index and 10-bit partial tag of `key` for a table with `sets` sets.
pub fn index_tag(key: u64, sets: usize) -> (usize, u16) {
    let sets = sets as u64;
    ((key % sets) as usize, ((key / sets) & TAG_MASK) as u16)
}

pub const TAG_BITS: u32 = 10;
const TAG_MASK: u64 = (1 << TAG_BITS) - 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_invalid_ways_first() {
        let mut t: SetAssoc<u32> = SetAssoc::new(4, 4, false);
        for i in 0..4 {
            assert_eq!(t.allocate(0, i as u16, i), i as usize);
        }
        assert_eq!(t.occupancy(), 4);
    }

    #[test]
    fn nru_saturation_clears_others() {
        let mut t: SetAssoc<u32> = SetAssoc::new(4, 4, false);
        for i in 0..4 {
            t.allocate(0, i, 0);
        }
        // Touching the last way saturated the set and reset the others.
        let bits: Vec<bool> = t.set(0).iter().map(|w| w.nru).collect();
        assert_eq!(bits, [false, false, false, true]);
        assert_eq!(t.victim(0), 0);
        t.touch(0, 0);
        assert_eq!(t.victim(0), 1);
    }

    #[test]
    fn retired_ways_survive_while_unproven_exist() {
        let mut t: SetAssoc<u32> = SetAssoc::new(4, 4, true);
        for i in 0..4 {
            t.allocate(0, i, 0);
        }
        for w in [0, 1, 3] {
            t.way_mut(0, w).retired = true;
        }
        assert_eq!(t.victim(0), 2);
    }

    #[test]
    fn index_and_tag_split() {
        assert_eq!(index_tag(0x1234, 128), (0x34, 0x24));
        assert_eq!(index_tag(1000, 192), (1000 % 192, (1000 / 192) as u16));
        // Tag keeps only 10 bits.
        assert_eq!(index_tag(128 * 1024 + 5, 128), (5, 0));
    }

    #[test]
    #[should_panic]
    fn rejects_uneven_geometry() {
        let _ = SetAssoc::<u8>::new(10, 4, false);
    }
}
