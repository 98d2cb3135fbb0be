//! Synthetic variable-length ISA.
//!
//! The first byte selects everything:
//!
//! | first byte  | class          | length        | displacement      |
//! |-------------|----------------|---------------|-------------------|
//! | `00..=6F`   | NonBranch      | `1 + (b & 7)` | -                 |
//! | `70..=8F`   | DirectCond     | 3             | signed 16-bit LE  |
//! | `90..=AF`   | DirectUncond   | 5             | signed 32-bit LE  |
//! | `B0..=CF`   | Call           | 5             | signed 32-bit LE  |
//! | `D0..=DF`   | IndirectUncond | 2             | -                 |
//! | `E0..=EF`   | Return         | 1             | -                 |
//! | `F0..=FF`   | invalid        | -             | -                 |

use super::{BranchClass, DecodedInstr};

pub const INVALID_FILLER: u8 = 0xFF;

/// Length and class selected by a first byte, ignoring truncation.
pub fn classify_opcode(b: u8) -> Option<(u8, BranchClass)> {
    match b {
        0x00..=0x6F => Some((1 + (b & 7), BranchClass::NonBranch)),
        0x70..=0x8F => Some((3, BranchClass::DirectCond)),
        0x90..=0xAF => Some((5, BranchClass::DirectUncond)),
        0xB0..=0xCF => Some((5, BranchClass::Call)),
        0xD0..=0xDF => Some((2, BranchClass::IndirectUncond)),
        0xE0..=0xEF => Some((1, BranchClass::Return)),
        0xF0..=0xFF => None,
    }
}

pub(super) fn decode(bytes: &[u8]) -> Option<DecodedInstr> {
    let (len, class) = classify_opcode(bytes[0])?;
    let body = bytes.get(..len as usize)?;
    Some(match class {
        BranchClass::DirectCond => {
            let disp = i16::from_le_bytes([body[1], body[2]]);
            DecodedInstr::direct(len, class, disp as i64)
        }
        BranchClass::DirectUncond | BranchClass::Call => {
            let disp = i32::from_le_bytes([body[1], body[2], body[3], body[4]]);
            DecodedInstr::direct(len, class, disp as i64)
        }
        BranchClass::NonBranch => DecodedInstr::non_branch(len),
        _ => DecodedInstr::indirect(len, class),
    })
}

/// Encoders used by the workload generator and tests.
pub mod encode {
    /// Non-branch of `len` bytes (1..=8). `payload` fills the trailing bytes.
    pub fn non_branch(len: u8, opcode_hi: u8, payload: u8) -> Vec<u8> {
        assert!((1..=8).contains(&len));
        assert!(opcode_hi <= 0x0D, "opcode_hi selects a 0x00..=0x6F block");
        let first = (opcode_hi << 3) | (len - 1);
        let mut out = vec![first];
        out.extend(std::iter::repeat(payload).take(len as usize - 1));
        out
    }

    pub fn cond(disp: i16) -> Vec<u8> {
        let mut out = vec![0x70];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    pub fn jmp(disp: i32) -> Vec<u8> {
        let mut out = vec![0x90];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    pub fn call(disp: i32) -> Vec<u8> {
        let mut out = vec![0xB0];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    pub fn indirect_jmp() -> Vec<u8> {
        vec![0xD0, 0x00]
    }

    pub fn ret() -> Vec<u8> {
        vec![0xE0]
    }
}
