use std::collections::HashSet;

use proptest::prelude::*;
use skia_core::memory::{Access, AccessKind, L1iCache};

const LATENCY: u64 = 7;

fn kind() -> impl Strategy<Value = AccessKind> {
    prop_oneof![
        Just(AccessKind::Demand),
        Just(AccessKind::Prefetch),
        Just(AccessKind::WrongPathPrefetch),
    ]
}

/// (line number, kind, cycles since the previous access)
fn ops() -> impl Strategy<Value = Vec<(u64, AccessKind, u64)>> {
    prop::collection::vec((0u64..24, kind(), 0u64..4), 200..1000)
}

/// Per set, lines from least to most recently used with their ready time.
struct Model {
    sets: Vec<Vec<(u64, u64)>>,
    ways: usize,
}

impl Model {
    fn access(&mut self, line: u64, now: u64) -> Access {
        let n = self.sets.len() as u64;
        let set = &mut self.sets[(line % n) as usize];
        if let Some(i) = set.iter().position(|&(l, _)| l == line) {
            let e = set.remove(i);
            set.push(e);
            return if e.1 <= now {
                Access::Hit
            } else {
                Access::Miss {
                    fill_completes_at: e.1,
                }
            };
        }
        if set.len() == self.ways {
            set.remove(0);
        }
        set.push((line, now + LATENCY));
        Access::Miss {
            fill_completes_at: now + LATENCY,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lru_matches_model(ops in ops()) {
        // 512 bytes, 2 ways: 4 sets.
        let mut c = L1iCache::new(512, 2, LATENCY);
        let mut m = Model { sets: vec![Vec::new(); 4], ways: 2 };
        let mut now = 0;
        let mut seen = HashSet::new();
        let mut counts = [0u64; 3];
        for (line, kind, dt) in ops {
            now += dt;
            let got = c.access(line * 64, kind, now);
            prop_assert_eq!(got, m.access(line, now));
            if got == Access::Hit {
                prop_assert!(seen.contains(&line), "line {line} hit before any access");
            }
            seen.insert(line);
            counts[kind as usize] += 1;
        }
        let k = c.counters;
        prop_assert_eq!(k.demand.hits + k.demand.misses, counts[AccessKind::Demand as usize]);
        prop_assert_eq!(k.prefetch.hits + k.prefetch.misses, counts[AccessKind::Prefetch as usize]);
        prop_assert_eq!(
            k.wrong_path_prefetch.hits + k.wrong_path_prefetch.misses,
            counts[AccessKind::WrongPathPrefetch as usize]
        );
    }
}
