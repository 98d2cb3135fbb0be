use serde::{Deserialize, Serialize};

use crate::isa::BranchClass;
use crate::memory::L1iCounters;
use crate::shadow::ShadowKind;

/// One counter per branch class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub non_branch: u64,
    pub direct_cond: u64,
    pub direct_uncond: u64,
    pub call: u64,
    #[serde(rename = "return")]
    pub ret: u64,
    pub indirect_uncond: u64,
    pub indirect_call: u64,
}

impl ClassCounts {
    pub fn slot(&mut self, class: BranchClass) -> &mut u64 {
        match class {
            BranchClass::NonBranch => &mut self.non_branch,
            BranchClass::DirectCond => &mut self.direct_cond,
            BranchClass::DirectUncond => &mut self.direct_uncond,
            BranchClass::Call => &mut self.call,
            BranchClass::Return => &mut self.ret,
            BranchClass::IndirectUncond => &mut self.indirect_uncond,
            BranchClass::IndirectCall => &mut self.indirect_call,
        }
    }

    pub fn get(&self, class: BranchClass) -> u64 {
        let mut c = *self;
        *c.slot(class)
    }

    pub fn total(&self) -> u64 {
        BranchClass::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    pub uncond: u64,
    pub call: u64,
    #[serde(rename = "return")]
    pub ret: u64,
}

impl KindCounts {
    pub fn add(&mut self, kind: ShadowKind) {
        match kind {
            ShadowKind::Uncond => self.uncond += 1,
            ShadowKind::Call => self.call += 1,
            ShadowKind::Return => self.ret += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.uncond + self.call + self.ret
    }
}

/// BTB misses: taken committed branches that neither the BTB nor the SBB
/// identified with the right target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BtbMissStats {
    pub total: u64,
    pub l1i_resident: u64,
    pub l1i_nonresident: u64,
    pub by_class: ClassCounts,
    /// Position relative to the line's previous committed visit.
    pub head: u64,
    pub tail: u64,
    pub other: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SbbStats {
    pub insertions: u64,
    pub head_insertions: KindCounts,
    pub tail_insertions: KindCounts,
    /// Inserted branches that do not start at a true instruction boundary.
    pub bogus_insertions: u64,
    pub hits: u64,
    pub hits_committed: u64,
    /// Wrong predictions from entries filled by bogus branches.
    pub bogus_supplied: u64,
    /// Wrong predictions from entries filled by real branches, through
    /// partial-tag aliasing.
    pub wrong_supplied: u64,
    pub invalidations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub retired: u64,
    pub cycles: u64,
    pub decoder_idle_cycles: u64,
    pub wrong_path_decoded: u64,
    pub taken_branches: u64,
    pub l1i: L1iCounters,
    pub btb_lookups: u64,
    pub btb_lookup_misses: u64,
    pub btb_misses: BtbMissStats,
    pub sbb: SbbStats,
    pub resteers_decode: u64,
    pub resteers_execute: u64,
}

impl Stats {
    /// Checks the partition identities every run must satisfy.
    pub fn check_identities(&self) -> Result<(), String> {
        let m = &self.btb_misses;
        if m.l1i_resident + m.l1i_nonresident != m.total {
            return Err(format!(
                "residency split {} + {} != {}",
                m.l1i_resident, m.l1i_nonresident, m.total
            ));
        }
        if m.by_class.total() != m.total {
            return Err(format!("class split {} != {}", m.by_class.total(), m.total));
        }
        if m.head + m.tail + m.other != m.total {
            return Err(format!(
                "region split {} + {} + {} != {}",
                m.head, m.tail, m.other, m.total
            ));
        }
        let s = &self.sbb;
        if s.head_insertions.total() + s.tail_insertions.total() != s.insertions {
            return Err("SBB insertions != head + tail".into());
        }
        if s.hits_committed > s.hits {
            return Err("more committed SBB hits than hits".into());
        }
        Ok(())
    }
}
