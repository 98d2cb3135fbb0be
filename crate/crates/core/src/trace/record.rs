//! Binary committed-instruction trace.
//!
//! Layout, little-endian: magic `SBTR`, `u32` version (1), `u64` record
//! count, then packed 19-byte records `pc: u64, target: u64, len: u8,
//! class: u8, flags: u8`. Flag bit 0 is "taken".

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::isa::{BranchClass, MAX_INSTR_LEN};

pub const MAGIC: [u8; 4] = *b"SBTR";
pub const VERSION: u32 = 1;
pub const RECORD_BYTES: usize = 19;
const HEADER_BYTES: usize = 16;
const FLAG_TAKEN: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub pc: u64,
    /// Branch target, 0 for non-branches.
    pub target: u64,
    pub len: u8,
    pub class: BranchClass,
    pub taken: bool,
}

impl TraceRecord {
    pub fn non_branch(pc: u64, len: u8) -> Self {
        Self {
            pc,
            target: 0,
            len,
            class: BranchClass::NonBranch,
            taken: false,
        }
    }

    pub fn branch(pc: u64, len: u8, class: BranchClass, target: u64, taken: bool) -> Self {
        Self {
            pc,
            target,
            len,
            class,
            taken,
        }
    }

    pub fn fall_through(&self) -> u64 {
        self.pc.wrapping_add(self.len as u64)
    }

    /// Address of the next committed instruction.
    pub fn next_pc(&self) -> u64 {
        if self.taken {
            self.target
        } else {
            self.fall_through()
        }
    }

    /// Checks the per-record invariants of the format.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.len == 0 || self.len as usize > MAX_INSTR_LEN {
            return Err(format!("length {} outside 1..=15", self.len));
        }
        if self.class == BranchClass::NonBranch && (self.taken || self.target != 0) {
            return Err("non-branch with taken flag or target".into());
        }
        Ok(())
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.pc.to_le_bytes());
        out.extend_from_slice(&self.target.to_le_bytes());
        out.push(self.len);
        out.push(self.class.code());
        out.push(if self.taken { FLAG_TAKEN } else { 0 });
    }

    fn decode(index: u64, b: &[u8]) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedRecord { index, reason };
        let class = BranchClass::from_code(b[17])
            .ok_or_else(|| malformed(format!("class code {}", b[17])))?;
        if b[18] & !FLAG_TAKEN != 0 {
            return Err(malformed(format!("unknown flag bits {:#04x}", b[18])));
        }
        let rec = TraceRecord {
            pc: u64::from_le_bytes(b[0..8].try_into().unwrap()),
            target: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            len: b[16],
            class,
            taken: b[18] & FLAG_TAKEN != 0,
        };
        rec.check().map_err(malformed)?;
        Ok(rec)
    }
}

pub fn to_bytes(records: &[TraceRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + records.len() * RECORD_BYTES);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        r.encode(&mut out);
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Vec<TraceRecord>> {
    if bytes.len() < 4 {
        let mut m = [0u8; 4];
        m[..bytes.len()].copy_from_slice(bytes);
        return Err(Error::BadMagic(m));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < HEADER_BYTES {
        return Err(Error::TruncatedRecord {
            expected: 0,
            got: 0,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_BYTES..];
    let complete = (body.len() / RECORD_BYTES) as u64;
    if complete < count {
        return Err(Error::TruncatedRecord {
            expected: count,
            got: complete,
        });
    }
    body.chunks_exact(RECORD_BYTES)
        .take(count as usize)
        .enumerate()
        .map(|(i, chunk)| TraceRecord::decode(i as u64, chunk))
        .collect()
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_bytes(records))
        .map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<TraceRecord> {
        vec![
            TraceRecord::non_branch(0x1000, 3),
            TraceRecord::branch(0x1003, 5, BranchClass::Call, 0x2000, true),
            TraceRecord::branch(0x2000, 1, BranchClass::Return, 0x1008, true),
        ]
    }

    #[test]
    fn three_records_round_trip() {
        let recs = sample();
        let bytes = to_bytes(&recs);
        assert_eq!(bytes.len(), 16 + 3 * 19);
        assert_eq!(from_bytes(&bytes).unwrap(), recs);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sbtrace");
        write_trace(&path, &sample()).unwrap();
        assert_eq!(read_trace(&path).unwrap(), sample());
    }

    #[test]
    fn empty_trace() {
        let bytes = to_bytes(&[]);
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[8..16], &0u64.to_le_bytes());
        assert!(from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = to_bytes(&sample());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(from_bytes(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = to_bytes(&sample());
        bytes[4] = 2;
        assert!(matches!(from_bytes(&bytes), Err(Error::VersionMismatch(2))));
    }

    #[test]
    fn truncated() {
        let bytes = to_bytes(&sample());
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(
            from_bytes(cut),
            Err(Error::TruncatedRecord {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn malformed_record() {
        let mut bytes = to_bytes(&sample());
        bytes[16 + 17] = 9;
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::MalformedRecord { index: 0, .. })
        ));
    }

    fn arb_record() -> impl Strategy<Value = TraceRecord> {
        (any::<u64>(), any::<u64>(), 1u8..=15, 0u8..7, any::<bool>()).prop_map(
            |(pc, target, len, class, taken)| {
                let class = BranchClass::from_code(class).unwrap();
                if class == BranchClass::NonBranch {
                    TraceRecord::non_branch(pc, len)
                } else {
                    TraceRecord::branch(pc, len, class, target, taken)
                }
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip(recs in proptest::collection::vec(arb_record(), 0..64)) {
            prop_assert_eq!(from_bytes(&to_bytes(&recs)).unwrap(), recs);
        }
    }
}
