//! Single-instruction decoding at arbitrary byte offsets.
//!
//! Two encodings are supported. [`IsaKind::Svl`] is a small synthetic
//! variable-length ISA whose first byte fully determines length and class,
//! which makes boundary ambiguity exactly enumerable. [`IsaKind::X86Subset`]
//! is a documented slice of 32-bit x86 (see [`x86`]).
//!
//! Decoding never errors: an unknown opcode and a truncated encoding both
//! yield `None`.

use serde::{Deserialize, Serialize};

pub mod svl;
pub mod x86;

/// Longest encoding either ISA can produce.
pub const MAX_INSTR_LEN: usize = 15;

/// Control-flow class of a decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchClass {
    NonBranch,
    DirectCond,
    DirectUncond,
    Call,
    Return,
    IndirectUncond,
    IndirectCall,
}

impl BranchClass {
    pub const ALL: [BranchClass; 7] = [
        BranchClass::NonBranch,
        BranchClass::DirectCond,
        BranchClass::DirectUncond,
        BranchClass::Call,
        BranchClass::Return,
        BranchClass::IndirectUncond,
        BranchClass::IndirectCall,
    ];

    /// Wire code used by the trace format.
    pub fn code(self) -> u8 {
        match self {
            BranchClass::NonBranch => 0,
            BranchClass::DirectCond => 1,
            BranchClass::DirectUncond => 2,
            BranchClass::Call => 3,
            BranchClass::Return => 4,
            BranchClass::IndirectUncond => 5,
            BranchClass::IndirectCall => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_branch(self) -> bool {
        self != BranchClass::NonBranch
    }

    /// Classes whose target is encoded as a PC-relative displacement.
    pub fn is_direct(self) -> bool {
        matches!(
            self,
            BranchClass::DirectCond | BranchClass::DirectUncond | BranchClass::Call
        )
    }

    pub fn is_call(self) -> bool {
        matches!(self, BranchClass::Call | BranchClass::IndirectCall)
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchClass::NonBranch => "non_branch",
            BranchClass::DirectCond => "direct_cond",
            BranchClass::DirectUncond => "direct_uncond",
            BranchClass::Call => "call",
            BranchClass::Return => "return",
            BranchClass::IndirectUncond => "indirect_uncond",
            BranchClass::IndirectCall => "indirect_call",
        }
    }
}

/// Result of decoding one instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodedInstr {
    /// Encoded length in bytes, `1..=15`.
    pub len: u8,
    pub class: BranchClass,
    /// Present exactly for the direct classes.
    pub rel_disp: Option<i64>,
}

impl DecodedInstr {
    pub fn non_branch(len: u8) -> Self {
        Self {
            len,
            class: BranchClass::NonBranch,
            rel_disp: None,
        }
    }

    pub fn direct(len: u8, class: BranchClass, disp: i64) -> Self {
        debug_assert!(class.is_direct());
        Self {
            len,
            class,
            rel_disp: Some(disp),
        }
    }

    pub fn indirect(len: u8, class: BranchClass) -> Self {
        debug_assert!(!class.is_direct());
        Self {
            len,
            class,
            rel_disp: None,
        }
    }
}

/// Instruction set used for a whole simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum IsaKind {
    #[default]
    #[serde(rename = "svl")]
    Svl,
    #[serde(rename = "x86")]
    X86Subset,
}

impl IsaKind {
    /// A byte that never starts a valid instruction; used to pad partially
    /// mapped cache lines.
    pub fn filler_byte(self) -> u8 {
        match self {
            IsaKind::Svl => svl::INVALID_FILLER,
            IsaKind::X86Subset => x86::INVALID_FILLER,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IsaKind::Svl => "svl",
            IsaKind::X86Subset => "x86",
        }
    }
}

impl std::str::FromStr for IsaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svl" => Ok(IsaKind::Svl),
            "x86" | "x86-subset" => Ok(IsaKind::X86Subset),
            other => Err(format!("unknown isa `{other}` (expected svl or x86)")),
        }
    }
}

/// Decodes the instruction starting at `offset`.
///
/// Returns `None` if the opcode is not recognized or the encoding does not
/// fit entirely inside `bytes`.
pub fn decode_at(bytes: &[u8], offset: usize, isa: IsaKind) -> Option<DecodedInstr> {
    let window = bytes.get(offset..)?;
    if window.is_empty() {
        return None;
    }
    match isa {
        IsaKind::Svl => svl::decode(window),
        IsaKind::X86Subset => x86::decode(window),
    }
}

/// Absolute target of a direct branch decoded at `pc`.
///
/// # Panics
///
/// Panics if `instr` has no relative displacement.
pub fn branch_target(pc: u64, instr: &DecodedInstr) -> u64 {
    let disp = instr
        .rel_disp
        .unwrap_or_else(|| panic!("branch_target called for {:?}", instr.class));
    pc.wrapping_add(instr.len as u64).wrapping_add(disp as u64)
}

/// Whether the shadow branch buffers can hold this class.
pub fn is_sbb_supported(class: BranchClass) -> bool {
    matches!(
        class,
        BranchClass::DirectUncond | BranchClass::Call | BranchClass::Return
    )
}
