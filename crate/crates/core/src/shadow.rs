//! Shadow branch decoding.
//!
//! A fetched cache line carries bytes the executed path never decodes: the
//! head region before the entry point and the tail region after a taken
//! exit. This module recovers supported branches (direct jumps, calls and
//! returns) from those regions.
//!
//! The tail region has a known first instruction boundary and is decoded
//! linearly. The head region does not: the line may start in the middle of an
//! instruction. Head decoding therefore records the decoded length at every
//! byte ([`compute_length_vector`]), keeps the start bytes whose length chain
//! lands exactly on the entry offset ([`enumerate_valid_paths`]) and picks one
//! of them according to an [`IndexPolicy`] ([`select_start_index`]).

use serde::{Deserialize, Serialize};

use crate::isa::{self, decode_at, BranchClass, IsaKind};

pub const LINE_BYTES: usize = 64;

/// Default cap on the number of valid head paths before a line is discarded.
pub const DEFAULT_MAX_VALID_PATHS: usize = 6;

/// A cache line as seen by the shadow decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheLineView {
    pub base_addr: u64,
    pub bytes: [u8; LINE_BYTES],
    /// Offset of the branch target that brought the line into use.
    pub entry_offset: u8,
    /// First byte after the taken exit branch, if the line has one.
    pub tail_start: Option<u8>,
}

impl CacheLineView {
    pub fn new(
        base_addr: u64,
        bytes: [u8; LINE_BYTES],
        entry_offset: u8,
        tail_start: Option<u8>,
    ) -> Self {
        assert_eq!(
            base_addr % LINE_BYTES as u64,
            0,
            "line base {base_addr:#x} is not 64-byte aligned"
        );
        assert!(
            (entry_offset as usize) < LINE_BYTES,
            "entry offset {entry_offset} out of range"
        );
        if let Some(t) = tail_start {
            assert!(t as usize <= LINE_BYTES, "tail start {t} out of range");
        }
        Self {
            base_addr,
            bytes,
            entry_offset,
            tail_start,
        }
    }
}

/// Decoded instruction length at each head byte, 0 where nothing decodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthVector(pub Vec<u8>);

impl LengthVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShadowKind {
    Uncond,
    Call,
    Return,
}

impl ShadowKind {
    pub fn from_class(class: BranchClass) -> Option<Self> {
        match class {
            BranchClass::DirectUncond => Some(ShadowKind::Uncond),
            BranchClass::Call => Some(ShadowKind::Call),
            BranchClass::Return => Some(ShadowKind::Return),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShadowKind::Uncond => "uncond",
            ShadowKind::Call => "call",
            ShadowKind::Return => "return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Head,
    Tail,
}

/// A supported branch discovered in a shadow region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShadowBranch {
    pub kind: ShadowKind,
    pub pc: u64,
    /// Absolute target; `None` for returns.
    pub target: Option<u64>,
    pub line_offset: u8,
    pub origin: Region,
}

/// How the head decoder picks among several valid start bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexPolicy {
    #[default]
    FirstIndex,
    ZeroIndex,
    MergeIndex,
}

impl IndexPolicy {
    pub const ALL: [IndexPolicy; 3] = [
        IndexPolicy::FirstIndex,
        IndexPolicy::ZeroIndex,
        IndexPolicy::MergeIndex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexPolicy::FirstIndex => "first",
            IndexPolicy::ZeroIndex => "zero",
            IndexPolicy::MergeIndex => "merge",
        }
    }
}

/// Length of the instruction decoded at every byte of the head region.
///
/// Instructions may extend past the entry offset; they keep their true
/// length and are rejected later during path validation.
pub fn compute_length_vector(line: &CacheLineView, isa: IsaKind) -> LengthVector {
    assert!(line.entry_offset >= 1, "head region is empty");
    LengthVector(
        (0..line.entry_offset as usize)
            .map(|i| decode_at(&line.bytes, i, isa).map_or(0, |d| d.len))
            .collect(),
    )
}

/// Start bytes whose length chain lands exactly on `entry_offset`, ascending.
///
/// Walks right to left so each start reuses the verdict of the byte it
/// jumps to; this equals the naive per-start walk.
pub fn enumerate_valid_paths(lv: &LengthVector, entry_offset: usize) -> Vec<usize> {
    assert!(entry_offset >= 1, "head region is empty");
    assert!(lv.len() >= entry_offset);
    let mut reaches = vec![false; entry_offset + 1];
    reaches[entry_offset] = true;
    for s in (0..entry_offset).rev() {
        let step = lv.get(s) as usize;
        reaches[s] = step > 0 && s + step <= entry_offset && reaches[s + step];
    }
    (0..entry_offset).filter(|&s| reaches[s]).collect()
}

/// Byte offsets visited by the walk from `start`, ending before `entry_offset`.
pub fn walk(lv: &LengthVector, start: usize, entry_offset: usize) -> Vec<usize> {
    let mut path = Vec::new();
    let mut p = start;
    while p < entry_offset {
        path.push(p);
        let step = lv.get(p) as usize;
        if step == 0 {
            break;
        }
        p += step;
    }
    path
}

/// Chooses the head decode start, or `None` to discard the line.
///
/// `MergeIndex` is the smallest byte visited by every valid walk. A line
/// with more than `max_valid_paths` valid starts is discarded whatever the
/// policy.
pub fn select_start_index(
    valid: &[usize],
    lv: &LengthVector,
    policy: IndexPolicy,
    max_valid_paths: usize,
) -> Option<usize> {
    if valid.is_empty() || valid.len() > max_valid_paths {
        return None;
    }
    match policy {
        IndexPolicy::FirstIndex => valid.first().copied(),
        IndexPolicy::ZeroIndex => (valid[0] == 0).then_some(0),
        IndexPolicy::MergeIndex => {
            let entry = lv.len();
            // A byte shared by all walks lies on the shortest one.
            let last = walk(lv, *valid.last().unwrap(), entry);
            let others: Vec<Vec<usize>> = valid.iter().map(|&s| walk(lv, s, entry)).collect();
            last.into_iter()
                .find(|i| others.iter().all(|w| w.binary_search(i).is_ok()))
        }
    }
}

/// Everything the head decoder computed for one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadDecode {
    pub lengths: LengthVector,
    pub valid_starts: Vec<usize>,
    pub selected: Option<usize>,
    pub branches: Vec<ShadowBranch>,
}

pub fn analyze_head(
    line: &CacheLineView,
    isa: IsaKind,
    policy: IndexPolicy,
    max_valid_paths: usize,
) -> HeadDecode {
    let entry = line.entry_offset as usize;
    let lengths = compute_length_vector(line, isa);
    let valid_starts = enumerate_valid_paths(&lengths, entry);
    let selected = select_start_index(&valid_starts, &lengths, policy, max_valid_paths);
    let branches = match selected {
        Some(start) => walk(&lengths, start, entry)
            .into_iter()
            .filter_map(|off| shadow_branch_at(line, off, isa, Region::Head))
            .collect(),
        None => Vec::new(),
    };
    HeadDecode {
        lengths,
        valid_starts,
        selected,
        branches,
    }
}

/// Supported branches on the selected head path; empty when the line has no
/// head region or no start is selected.
pub fn decode_head(
    line: &CacheLineView,
    isa: IsaKind,
    policy: IndexPolicy,
    max_valid_paths: usize,
) -> Vec<ShadowBranch> {
    if line.entry_offset == 0 {
        return Vec::new();
    }
    analyze_head(line, isa, policy, max_valid_paths).branches
}

/// Linear decode from `tail_start` to the end of the line.
///
/// Stops at the first decode failure or at an instruction that would cross
/// byte 63.
pub fn decode_tail(line: &CacheLineView, isa: IsaKind) -> Vec<ShadowBranch> {
    let Some(start) = line.tail_start else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut p = start as usize;
    while p < LINE_BYTES {
        // Decoding within the line slice already rejects instructions that
        // would run past the last byte.
        let Some(d) = decode_at(&line.bytes, p, isa) else {
            break;
        };
        if let Some(sb) = shadow_branch_at(line, p, isa, Region::Tail) {
            out.push(sb);
        }
        p += d.len as usize;
    }
    out
}

fn shadow_branch_at(
    line: &CacheLineView,
    offset: usize,
    isa: IsaKind,
    origin: Region,
) -> Option<ShadowBranch> {
    let d = decode_at(&line.bytes, offset, isa)?;
    let kind = ShadowKind::from_class(d.class)?;
    let pc = line.base_addr + offset as u64;
    let target = d.rel_disp.map(|_| isa::branch_target(pc, &d));
    Some(ShadowBranch {
        kind,
        pc,
        target,
        line_offset: offset as u8,
        origin,
    })
}
