use serde::{Deserialize, Serialize};

use super::table::{index_tag, SetAssoc};
use super::{EntryLayout, Field};
use crate::isa::BranchClass;

/// The 2-bit type field of a BTB entry.
///
/// Indirect jumps are stored as `DirectUncond` and indirect calls as `Call`,
/// both with their last-seen target. `Other` marks returns, whose target
/// comes from the return address stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BtbType {
    #[default]
    DirectCond,
    DirectUncond,
    Call,
    Other,
}

impl BtbType {
    pub fn from_class(class: BranchClass) -> Option<Self> {
        match class {
            BranchClass::NonBranch => None,
            BranchClass::DirectCond => Some(BtbType::DirectCond),
            BranchClass::DirectUncond | BranchClass::IndirectUncond => Some(BtbType::DirectUncond),
            BranchClass::Call | BranchClass::IndirectCall => Some(BtbType::Call),
            BranchClass::Return => Some(BtbType::Other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BtbEntry {
    pub kind: BtbType,
    pub target: u64,
}

pub const BTB_LAYOUT: EntryLayout = EntryLayout {
    name: "BTB",
    fields: &[
        Field {
            name: "tag",
            bits: 10,
        },
        Field {
            name: "valid",
            bits: 1,
        },
        Field {
            name: "nru",
            bits: 1,
        },
        Field {
            name: "branch_type",
            bits: 2,
        },
        Field {
            name: "target",
            bits: 64,
        },
    ],
};

/// Branch target buffer indexed by `pc mod sets` with a 10-bit partial tag.
#[derive(Debug, Clone)]
pub struct Btb {
    table: SetAssoc<BtbEntry>,
}

impl Btb {
    pub fn new(entries: usize, ways: usize) -> Self {
        Self {
            table: SetAssoc::new(entries, ways, false),
        }
    }

    fn locate(&self, pc: u64) -> (usize, u16, Option<usize>) {
        let (set, tag) = index_tag(pc, self.table.sets());
        (set, tag, self.table.find(set, |w| w.tag == tag))
    }

    /// Lookup that updates replacement state on a hit.
    pub fn lookup(&mut self, pc: u64) -> Option<BtbEntry> {
        let (set, _, way) = self.locate(pc);
        let way = way?;
        self.table.touch(set, way);
        Some(self.table.set(set)[way].payload)
    }

    /// Lookup without side effects.
    pub fn probe(&self, pc: u64) -> Option<BtbEntry> {
        let (set, _, way) = self.locate(pc);
        way.map(|w| self.table.set(set)[w].payload)
    }

    pub fn insert(&mut self, pc: u64, kind: BtbType, target: u64) {
        let (set, tag, way) = self.locate(pc);
        let entry = BtbEntry { kind, target };
        match way {
            Some(w) => {
                self.table.way_mut(set, w).payload = entry;
                self.table.touch(set, w);
            }
            None => {
                self.table.allocate(set, tag, entry);
            }
        }
    }

    pub fn occupancy(&self) -> usize {
        self.table.occupancy()
    }

    pub fn capacity(&self) -> usize {
        self.table.capacity()
    }

    pub fn ways(&self) -> usize {
        self.table.ways()
    }
}
