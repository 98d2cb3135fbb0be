//! Shadow branch buffers.
//!
//! The U-SBB holds direct unconditional jumps and calls keyed by PC. The
//! R-SBB holds returns keyed by cache line, with the 6-bit line offset
//! stored in the entry so several returns of one line occupy separate ways.
//! Both evict unretired entries before entries whose prediction has
//! committed.

use serde::{Deserialize, Serialize};

use super::table::{index_tag, SetAssoc};
use super::{EntryLayout, Field};
use crate::shadow::{ShadowBranch, ShadowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SbbSource {
    USbb,
    RSbb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbbPrediction {
    pub source: SbbSource,
    pub kind: ShadowKind,
    /// `None` for returns.
    pub target: Option<u64>,
    /// Full PC of the shadow branch that filled the entry. Simulator
    /// bookkeeping only; not part of the entry layout.
    pub filled_by: u64,
}

pub const USBB_LAYOUT: EntryLayout = EntryLayout {
    name: "U-SBB",
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
            name: "retired",
            bits: 1,
        },
        Field {
            name: "is_call",
            bits: 1,
        },
        Field {
            name: "target",
            bits: 64,
        },
    ],
};

pub const RSBB_LAYOUT: EntryLayout = EntryLayout {
    name: "R-SBB",
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
            name: "retired",
            bits: 1,
        },
        Field {
            name: "offset",
            bits: 6,
        },
        Field {
            name: "spare",
            bits: 1,
        },
    ],
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct UPayload {
    target: u64,
    is_call: bool,
    filled_by: u64,
}

#[derive(Debug, Clone)]
pub struct USbb {
    table: SetAssoc<UPayload>,
}

impl USbb {
    pub fn new(entries: usize, ways: usize) -> Self {
        Self {
            table: SetAssoc::new(entries, ways, true),
        }
    }

    fn locate(&self, pc: u64) -> (usize, u16, Option<usize>) {
        let (set, tag) = index_tag(pc, self.table.sets());
        (set, tag, self.table.find(set, |w| w.tag == tag))
    }

    pub fn lookup(&mut self, pc: u64) -> Option<SbbPrediction> {
        let (set, _, way) = self.locate(pc);
        let way = way?;
        self.table.touch(set, way);
        let p = self.table.set(set)[way].payload;
        Some(SbbPrediction {
            source: SbbSource::USbb,
            kind: if p.is_call {
                ShadowKind::Call
            } else {
                ShadowKind::Uncond
            },
            target: Some(p.target),
            filled_by: p.filled_by,
        })
    }

    /// # Panics
    ///
    /// Panics if `sb` is a return.
    pub fn insert(&mut self, sb: &ShadowBranch) {
        assert!(
            matches!(sb.kind, ShadowKind::Uncond | ShadowKind::Call),
            "U-SBB holds jumps and calls, got {:?}",
            sb.kind
        );
        let payload = UPayload {
            target: sb.target.expect("direct shadow branch without target"),
            is_call: sb.kind == ShadowKind::Call,
            filled_by: sb.pc,
        };
        let (set, tag, way) = self.locate(sb.pc);
        match way {
            Some(w) => {
                let slot = self.table.way_mut(set, w);
                if (slot.payload.target, slot.payload.is_call) != (payload.target, payload.is_call)
                {
                    slot.retired = false;
                }
                slot.payload = payload;
                self.table.touch(set, w);
            }
            None => {
                self.table.allocate(set, tag, payload);
            }
        }
    }

    pub fn mark_retired(&mut self, pc: u64) -> bool {
        let (set, _, way) = self.locate(pc);
        match way {
            Some(w) => {
                self.table.way_mut(set, w).retired = true;
                true
            }
            None => false,
        }
    }

    pub fn invalidate(&mut self, pc: u64) {
        let (set, _, way) = self.locate(pc);
        if let Some(w) = way {
            self.table.way_mut(set, w).valid = false;
        }
    }

    pub fn occupancy(&self) -> usize {
        self.table.occupancy()
    }

    pub fn capacity(&self) -> usize {
        self.table.capacity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct RPayload {
    offset: u8,
    filled_by: u64,
}

#[derive(Debug, Clone)]
pub struct RSbb {
    table: SetAssoc<RPayload>,
}

impl RSbb {
    pub fn new(entries: usize, ways: usize) -> Self {
        Self {
            table: SetAssoc::new(entries, ways, true),
        }
    }

    fn locate(&self, pc: u64) -> (usize, u16, Option<usize>) {
        let (set, tag) = index_tag(pc >> 6, self.table.sets());
        let offset = (pc & 63) as u8;
        (
            set,
            tag,
            self.table
                .find(set, |w| w.tag == tag && w.payload.offset == offset),
        )
    }

    pub fn lookup(&mut self, pc: u64) -> Option<SbbPrediction> {
        let (set, _, way) = self.locate(pc);
        let way = way?;
        self.table.touch(set, way);
        let filled_by = self.table.set(set)[way].payload.filled_by;
        Some(SbbPrediction {
            source: SbbSource::RSbb,
            kind: ShadowKind::Return,
            target: None,
            filled_by,
        })
    }

    /// # Panics
    ///
    /// Panics if `sb` is not a return.
    pub fn insert(&mut self, sb: &ShadowBranch) {
        assert_eq!(sb.kind, ShadowKind::Return, "R-SBB holds returns only");
        let (set, tag, way) = self.locate(sb.pc);
        let payload = RPayload {
            offset: (sb.pc & 63) as u8,
            filled_by: sb.pc,
        };
        match way {
            Some(w) => {
                self.table.way_mut(set, w).payload = payload;
                self.table.touch(set, w);
            }
            None => {
                self.table.allocate(set, tag, payload);
            }
        }
    }

    pub fn mark_retired(&mut self, pc: u64) -> bool {
        let (set, _, way) = self.locate(pc);
        match way {
            Some(w) => {
                self.table.way_mut(set, w).retired = true;
                true
            }
            None => false,
        }
    }

    pub fn invalidate(&mut self, pc: u64) {
        let (set, _, way) = self.locate(pc);
        if let Some(w) = way {
            self.table.way_mut(set, w).valid = false;
        }
    }

    pub fn occupancy(&self) -> usize {
        self.table.occupancy()
    }

    pub fn capacity(&self) -> usize {
        self.table.capacity()
    }
}

/// Both shadow branch buffers, looked up together.
#[derive(Debug, Clone)]
pub struct Sbb {
    pub u: USbb,
    pub r: RSbb,
}

impl Sbb {
    pub fn new(usbb_entries: usize, rsbb_entries: usize, ways: usize) -> Self {
        Self {
            u: USbb::new(usbb_entries, ways),
            r: RSbb::new(rsbb_entries, ways),
        }
    }

    /// U-SBB takes precedence when both buffers hit.
    pub fn lookup(&mut self, pc: u64) -> Option<SbbPrediction> {
        self.u.lookup(pc).or_else(|| self.r.lookup(pc))
    }

    /// Routes a shadow branch to the buffer for its kind.
    pub fn insert(&mut self, sb: &ShadowBranch) -> SbbSource {
        match sb.kind {
            ShadowKind::Return => {
                self.r.insert(sb);
                SbbSource::RSbb
            }
            _ => {
                self.u.insert(sb);
                SbbSource::USbb
            }
        }
    }

    pub fn mark_retired(&mut self, pc: u64, source: SbbSource) -> bool {
        match source {
            SbbSource::USbb => self.u.mark_retired(pc),
            SbbSource::RSbb => self.r.mark_retired(pc),
        }
    }

    pub fn invalidate(&mut self, pc: u64, source: SbbSource) {
        match source {
            SbbSource::USbb => self.u.invalidate(pc),
            SbbSource::RSbb => self.r.invalidate(pc),
        }
    }
}
