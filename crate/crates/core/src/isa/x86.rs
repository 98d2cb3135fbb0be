//! Length/class decoder for a subset of 32-bit x86.
//!
//! Recognized encodings (anything else fails to decode):
//!
//! * legacy prefixes `66 67 F0 F2 F3 2E 36 3E 26 64 65`, any number, subject
//!   to the 15-byte limit
//! * one byte: `40..=4F` (inc/dec), `50..=5F`, `90`, `C3`, `F5`, `F8..=FD`
//! * ModRM forms: `31`, `88..=8B`, `80..=83 /r ib|iz`, `C6 /0 ib`, `C7 /0 iz`,
//!   `FF /0 /1 /2 /4 /6`, `0F 1F /0`
//! * immediates: `68 iz`, `6A ib`, `B0..=B7 ib`, `B8..=BF iz`, `C2 iw`
//! * relative branches: `70..=7F rel8`, `EB rel8`, `E8`/`E9 relz`,
//!   `0F 80..=8F relz`
//!
//! `iz`/`relz` are 32 bits wide, 16 bits under an operand-size (`66`)
//! prefix. The address-size (`67`) prefix switches ModRM to 16-bit
//! addressing. Bytes `40..=4F` are single-byte instructions, never REX.

use super::{BranchClass, DecodedInstr, MAX_INSTR_LEN};

/// Byte that never starts an instruction in this subset.
pub const INVALID_FILLER: u8 = 0xD6;

const LEGACY_PREFIXES: [u8; 11] = [
    0x66, 0x67, 0xF0, 0xF2, 0xF3, 0x2E, 0x36, 0x3E, 0x26, 0x64, 0x65,
];

pub fn is_prefix(b: u8) -> bool {
    LEGACY_PREFIXES.contains(&b)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Option<u8> {
        if self.pos >= MAX_INSTR_LEN {
            return None;
        }
        let b = *self.bytes.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos + n;
        if end > MAX_INSTR_LEN {
            return None;
        }
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn signed(&mut self, n: usize) -> Option<i64> {
        let s = self.take(n)?;
        Some(match n {
            1 => s[0] as i8 as i64,
            2 => i16::from_le_bytes([s[0], s[1]]) as i64,
            4 => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as i64,
            _ => unreachable!(),
        })
    }
}

/// Consumes a ModRM byte plus its SIB/displacement; returns the reg field.
fn modrm(cur: &mut Cursor<'_>, addr16: bool) -> Option<u8> {
    let m = cur.next()?;
    let mode = m >> 6;
    let reg = (m >> 3) & 7;
    let rm = m & 7;
    if mode == 3 {
        return Some(reg);
    }
    let disp = if addr16 {
        match mode {
            0 if rm == 6 => 2,
            0 => 0,
            1 => 1,
            _ => 2,
        }
    } else {
        let mut disp = match mode {
            0 if rm == 5 => 4,
            0 => 0,
            1 => 1,
            _ => 4,
        };
        if rm == 4 {
            let sib = cur.next()?;
            if mode == 0 && sib & 7 == 5 {
                disp = 4;
            }
        }
        disp
    };
    cur.take(disp)?;
    Some(reg)
}

pub(super) fn decode(bytes: &[u8]) -> Option<DecodedInstr> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut opsize16 = false;
    let mut addr16 = false;
    let opcode = loop {
        let b = cur.next()?;
        match b {
            0x66 => opsize16 = true,
            0x67 => addr16 = true,
            _ if is_prefix(b) => {}
            _ => break b,
        }
    };
    let z = if opsize16 { 2 } else { 4 };
    let mut class = BranchClass::NonBranch;
    let mut disp = None;
    match opcode {
        0x40..=0x5F | 0x90 | 0xF5 | 0xF8..=0xFD => {}
        0xC3 => class = BranchClass::Return,
        0xC2 => {
            cur.take(2)?;
            class = BranchClass::Return;
        }
        0x31 | 0x88..=0x8B => {
            modrm(&mut cur, addr16)?;
        }
        0x80 | 0x82 | 0x83 => {
            modrm(&mut cur, addr16)?;
            cur.take(1)?;
        }
        0x81 => {
            modrm(&mut cur, addr16)?;
            cur.take(z)?;
        }
        0xC6 | 0xC7 => {
            if modrm(&mut cur, addr16)? != 0 {
                return None;
            }
            cur.take(if opcode == 0xC6 { 1 } else { z })?;
        }
        0xFF => match modrm(&mut cur, addr16)? {
            0 | 1 | 6 => {}
            2 => class = BranchClass::IndirectCall,
            4 => class = BranchClass::IndirectUncond,
            _ => return None,
        },
        0x68 => {
            cur.take(z)?;
        }
        0x6A | 0xB0..=0xB7 => {
            cur.take(1)?;
        }
        0xB8..=0xBF => {
            cur.take(z)?;
        }
        0x70..=0x7F => {
            class = BranchClass::DirectCond;
            disp = Some(cur.signed(1)?);
        }
        0xEB => {
            class = BranchClass::DirectUncond;
            disp = Some(cur.signed(1)?);
        }
        0xE8 | 0xE9 => {
            class = if opcode == 0xE8 {
                BranchClass::Call
            } else {
                BranchClass::DirectUncond
            };
            disp = Some(cur.signed(z)?);
        }
        0x0F => match cur.next()? {
            0x80..=0x8F => {
                class = BranchClass::DirectCond;
                disp = Some(cur.signed(z)?);
            }
            0x1F => {
                if modrm(&mut cur, addr16)? != 0 {
                    return None;
                }
            }
            _ => return None,
        },
        _ => return None,
    }
    Some(DecodedInstr {
        len: cur.pos as u8,
        class,
        rel_disp: disp,
    })
}

/// Encoders used by the workload generator and tests.
pub mod encode {
    /// Register-to-register `mov`; `dst`/`src` are register numbers 0..8.
    pub fn mov_rr(dst: u8, src: u8) -> Vec<u8> {
        vec![0x89, 0xC0 | ((src & 7) << 3) | (dst & 7)]
    }

    pub fn xor_rr(dst: u8, src: u8) -> Vec<u8> {
        vec![0x31, 0xC0 | ((src & 7) << 3) | (dst & 7)]
    }

    pub fn mov_ri(reg: u8, imm: u32) -> Vec<u8> {
        let mut out = vec![0xB8 + (reg & 7)];
        out.extend_from_slice(&imm.to_le_bytes());
        out
    }

    /// `mov [base + disp8], src`.
    pub fn store_disp8(base: u8, src: u8, disp: i8) -> Vec<u8> {
        assert!(base & 7 != 4, "esp base needs a SIB byte");
        vec![0x89, 0x40 | ((src & 7) << 3) | (base & 7), disp as u8]
    }

    /// `add r/m32, imm8` on a register.
    pub fn add_ri8(reg: u8, imm: i8) -> Vec<u8> {
        vec![0x83, 0xC0 | (reg & 7), imm as u8]
    }

    pub fn push(reg: u8) -> Vec<u8> {
        vec![0x50 + (reg & 7)]
    }

    pub fn pop(reg: u8) -> Vec<u8> {
        vec![0x58 + (reg & 7)]
    }

    pub fn nop() -> Vec<u8> {
        vec![0x90]
    }

    /// Multi-byte `nop dword [eax + disp8]`.
    pub fn nop4() -> Vec<u8> {
        vec![0x0F, 0x1F, 0x40, 0x00]
    }

    pub fn jcc8(cc: u8, disp: i8) -> Vec<u8> {
        vec![0x70 | (cc & 0xF), disp as u8]
    }

    pub fn jcc32(cc: u8, disp: i32) -> Vec<u8> {
        let mut out = vec![0x0F, 0x80 | (cc & 0xF)];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    pub fn jmp8(disp: i8) -> Vec<u8> {
        vec![0xEB, disp as u8]
    }

    pub fn jmp32(disp: i32) -> Vec<u8> {
        let mut out = vec![0xE9];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    pub fn call32(disp: i32) -> Vec<u8> {
        let mut out = vec![0xE8];
        out.extend_from_slice(&disp.to_le_bytes());
        out
    }

    /// `jmp reg`.
    pub fn jmp_indirect(reg: u8) -> Vec<u8> {
        vec![0xFF, 0xE0 | (reg & 7)]
    }

    pub fn ret() -> Vec<u8> {
        vec![0xC3]
    }
}
