use serde::{Deserialize, Serialize};

use crate::shadow::LINE_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Demand,
    Prefetch,
    WrongPathPrefetch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    /// The line is (or will be) resident from `fill_completes_at` on.
    Miss {
        fill_completes_at: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HitMiss {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct L1iCounters {
    pub demand: HitMiss,
    pub prefetch: HitMiss,
    pub wrong_path_prefetch: HitMiss,
    /// Lines allocated by wrong-path prefetches.
    pub wrong_path_fills: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    valid: bool,
    tag: u64,
    last_use: u64,
    ready_at: u64,
}

/// Instruction cache with true LRU and a fixed fill latency.
///
/// A miss allocates immediately; the line becomes usable `miss_latency`
/// cycles later. Accesses to a line still being filled report a miss that
/// completes with the outstanding fill.
#[derive(Debug, Clone)]
pub struct L1iCache {
    sets: usize,
    ways: usize,
    lines: Vec<Line>,
    miss_latency: u64,
    clock: u64,
    pub counters: L1iCounters,
}

impl L1iCache {
    pub fn new(size_bytes: usize, ways: usize, miss_latency: u64) -> Self {
        let line_count = size_bytes / LINE_BYTES;
        assert!(
            ways >= 1 && line_count >= ways && line_count % ways == 0,
            "bad L1-I geometry"
        );
        Self {
            sets: line_count / ways,
            ways,
            lines: vec![Line::default(); line_count],
            miss_latency,
            clock: 0,
            counters: L1iCounters::default(),
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    fn split(&self, line_addr: u64) -> (usize, u64) {
        let n = line_addr / LINE_BYTES as u64;
        ((n % self.sets as u64) as usize, n / self.sets as u64)
    }

    fn find(&self, set: usize, tag: u64) -> Option<usize> {
        self.lines[set * self.ways..(set + 1) * self.ways]
            .iter()
            .position(|l| l.valid && l.tag == tag)
    }

    /// Whether the line is allocated (filled or filling), without side effects.
    pub fn contains(&self, line_addr: u64) -> bool {
        let (set, tag) = self.split(line_addr);
        self.find(set, tag).is_some()
    }

    /// Whether the line is allocated and its fill has completed by `now`.
    pub fn resident(&self, line_addr: u64, now: u64) -> bool {
        let (set, tag) = self.split(line_addr);
        self.find(set, tag)
            .is_some_and(|w| self.lines[set * self.ways + w].ready_at <= now)
    }

    pub fn access(&mut self, line_addr: u64, kind: AccessKind, now: u64) -> Access {
        assert_eq!(
            line_addr % LINE_BYTES as u64,
            0,
            "unaligned L1-I access {line_addr:#x}"
        );
        self.clock += 1;
        let (set, tag) = self.split(line_addr);
        let base = set * self.ways;
        let result = match self.find(set, tag) {
            Some(w) => {
                let line = &mut self.lines[base + w];
                line.last_use = self.clock;
                if line.ready_at <= now {
                    Access::Hit
                } else {
                    Access::Miss {
                        fill_completes_at: line.ready_at,
                    }
                }
            }
            None => {
                let ways = &self.lines[base..base + self.ways];
                let victim = ways.iter().position(|l| !l.valid).unwrap_or_else(|| {
                    (0..self.ways)
                        .min_by_key(|&w| ways[w].last_use)
                        .expect("ways >= 1")
                });
                let ready_at = now + self.miss_latency;
                self.lines[base + victim] = Line {
                    valid: true,
                    tag,
                    last_use: self.clock,
                    ready_at,
                };
                if kind == AccessKind::WrongPathPrefetch {
                    self.counters.wrong_path_fills += 1;
                }
                Access::Miss {
                    fill_completes_at: ready_at,
                }
            }
        };
        let slot = match kind {
            AccessKind::Demand => &mut self.counters.demand,
            AccessKind::Prefetch => &mut self.counters.prefetch,
            AccessKind::WrongPathPrefetch => &mut self.counters.wrong_path_prefetch,
        };
        match result {
            Access::Hit => slot.hits += 1,
            Access::Miss { .. } => slot.misses += 1,
        }
        result
    }
}
