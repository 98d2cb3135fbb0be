//! Replacement state of the tagged tables against a brute-force model.

use proptest::prelude::*;
use skia_core::predictors::table::SetAssoc;
use skia_core::predictors::{Btb, BtbType, USbb};
use skia_core::shadow::{Region, ShadowBranch, ShadowKind};

const WAYS: usize = 4;

#[derive(Debug, Clone, Copy)]
enum Op {
    Access(u16),
    Retire(u16),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    // Eight keys over four ways keeps the set under pressure.
    let op = prop_oneof![
        3 => (0u16..8).prop_map(Op::Access),
        1 => (0u16..8).prop_map(Op::Retire),
    ];
    prop::collection::vec(op, 1..60)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Slot {
    valid: bool,
    key: u16,
    used: bool,
    retired: bool,
}

#[derive(Debug, Clone)]
struct Model {
    slots: Vec<Slot>,
    retire_aware: bool,
}

impl Model {
    fn new(ways: usize, retire_aware: bool) -> Self {
        Self {
            slots: vec![Slot::default(); ways],
            retire_aware,
        }
    }

    fn position(&self, key: u16) -> Option<usize> {
        self.slots.iter().position(|s| s.valid && s.key == key)
    }

    fn touch(&mut self, w: usize) {
        self.slots[w].used = true;
        if self.slots.iter().all(|s| s.used) {
            for (i, s) in self.slots.iter_mut().enumerate() {
                s.used = i == w;
            }
        }
    }

    /// Every candidate way ranked, best first; ties go to the lower index.
    fn victim(&self) -> usize {
        let rank = |s: &Slot| {
            let class = if !s.valid {
                0
            } else if self.retire_aware && !s.retired {
                1
            } else {
                2
            };
            (class, s.valid && s.used)
        };
        (0..self.slots.len())
            .min_by_key(|&i| rank(&self.slots[i]))
            .unwrap()
    }

    /// Returns whether the key hit.
    fn access(&mut self, key: u16) -> bool {
        if let Some(w) = self.position(key) {
            self.touch(w);
            return true;
        }
        let w = self.victim();
        self.slots[w] = Slot {
            valid: true,
            key,
            used: false,
            retired: false,
        };
        self.touch(w);
        false
    }

    fn retire(&mut self, key: u16) {
        if let Some(w) = self.position(key) {
            self.slots[w].retired = true;
        }
    }
}

fn snapshot(t: &SetAssoc<()>) -> Vec<Slot> {
    t.set(0)
        .iter()
        .map(|w| Slot {
            valid: w.valid,
            key: if w.valid { w.tag } else { 0 },
            used: w.nru,
            retired: w.retired,
        })
        .collect()
}

fn model_snapshot(m: &Model) -> Vec<Slot> {
    m.slots
        .iter()
        .map(|s| Slot {
            key: if s.valid { s.key } else { 0 },
            ..*s
        })
        .collect()
}

fn jmp(pc: u64) -> ShadowBranch {
    ShadowBranch {
        kind: ShadowKind::Uncond,
        pc,
        target: Some(pc + 0x100),
        line_offset: 0,
        origin: Region::Tail,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn table_matches_model_and_contracts(ops in ops(), retire_aware in any::<bool>()) {
        let mut t: SetAssoc<()> = SetAssoc::new(WAYS, WAYS, retire_aware);
        let mut m = Model::new(WAYS, retire_aware);
        let mut evicted = false;
        let mut last_valid = 0;
        for op in ops {
            match op {
                Op::Access(key) => {
                    let before = snapshot(&t);
                    match t.find(0, |w| w.tag == key) {
                        Some(w) => t.touch(0, w),
                        None => {
                            let full = before.iter().all(|s| s.valid);
                            let w = t.allocate(0, key, ());
                            if full {
                                evicted = true;
                                let v = before[w];
                                if retire_aware && v.retired {
                                    prop_assert!(before.iter().all(|s| s.retired), "evicted a retired way over an unretired one");
                                }
                                let same_rank = |s: &Slot| !retire_aware || s.retired == v.retired;
                                if v.used {
                                    prop_assert!(!before.iter().any(|s| same_rank(s) && !s.used), "evicted a used way over an unused one");
                                }
                            } else {
                                prop_assert!(!before[w].valid, "evicted while an invalid way was free");
                            }
                        }
                    }
                    let after = snapshot(&t);
                    let w = t.find(0, |x| x.tag == key).unwrap();
                    prop_assert!(after[w].used);
                    let saturated = before.iter().enumerate().all(|(i, s)| i == w || s.used);
                    if saturated {
                        prop_assert_eq!(after.iter().filter(|s| s.used).count(), 1);
                    }
                    m.access(key);
                }
                Op::Retire(key) => {
                    if let Some(w) = t.find(0, |x| x.tag == key) {
                        t.way_mut(0, w).retired = true;
                    }
                    m.retire(key);
                }
            }
            prop_assert_eq!(snapshot(&t), model_snapshot(&m));
            let valid = t.occupancy();
            prop_assert!(valid <= t.capacity());
            if !evicted {
                prop_assert!(valid >= last_valid);
            }
            last_valid = valid;
        }
    }

    #[test]
    fn btb_matches_model(ops in ops()) {
        let mut btb = Btb::new(WAYS, WAYS);
        let mut m = Model::new(WAYS, false);
        for op in ops {
            let Op::Access(key) = op else { continue };
            let pc = key as u64;
            let hit = btb.lookup(pc).is_some();
            if !hit {
                btb.insert(pc, BtbType::DirectUncond, pc + 1);
            }
            prop_assert_eq!(hit, m.access(key));
            for k in 0..8u16 {
                prop_assert_eq!(btb.probe(k as u64).is_some(), m.position(k).is_some());
            }
        }
    }

    #[test]
    fn usbb_matches_model(ops in ops()) {
        let mut u = USbb::new(WAYS, WAYS);
        let mut m = Model::new(WAYS, true);
        for op in ops {
            match op {
                Op::Access(key) => {
                    let pc = key as u64;
                    let hit = u.lookup(pc).is_some();
                    if !hit {
                        u.insert(&jmp(pc));
                    }
                    prop_assert_eq!(hit, m.access(key));
                }
                Op::Retire(key) => {
                    prop_assert_eq!(u.mark_retired(key as u64), m.position(key).is_some());
                    m.retire(key);
                }
            }
            prop_assert_eq!(u.occupancy(), m.slots.iter().filter(|s| s.valid).count());
        }
    }
}
