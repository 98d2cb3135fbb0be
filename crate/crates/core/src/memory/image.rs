use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isa::{decode_at, DecodedInstr, IsaKind, MAX_INSTR_LEN};
use crate::shadow::LINE_BYTES;

/// Sparse byte address space built from non-overlapping segments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeImage {
    segments: BTreeMap<u64, Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct ImageFile {
    segments: Vec<SegmentFile>,
}

#[derive(Serialize, Deserialize)]
struct SegmentFile {
    base: String,
    bytes_hex: String,
}

impl CodeImage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_segment(&mut self, base: u64, bytes: Vec<u8>) -> Result<()> {
        if bytes.is_empty() {
            return Err(Error::Image(format!("empty segment at {base:#x}")));
        }
        let end = base
            .checked_add(bytes.len() as u64)
            .ok_or_else(|| Error::Image(format!("segment at {base:#x} wraps the address space")))?;
        if let Some((&b, s)) = self.segments.range(..end).next_back() {
            if b + s.len() as u64 > base {
                return Err(Error::Image(format!(
                    "segment at {base:#x} overlaps segment at {b:#x}"
                )));
            }
        }
        self.segments.insert(base, bytes);
        Ok(())
    }

    pub fn segments(&self) -> impl Iterator<Item = (u64, &[u8])> {
        self.segments.iter().map(|(&b, s)| (b, s.as_slice()))
    }

    fn segment_of(&self, addr: u64) -> Option<(u64, &[u8])> {
        let (&base, seg) = self.segments.range(..=addr).next_back()?;
        (addr - base < seg.len() as u64).then_some((base, seg.as_slice()))
    }

    pub fn byte_at(&self, addr: u64) -> Option<u8> {
        self.segment_of(addr).map(|(b, s)| s[(addr - b) as usize])
    }

    /// Up to `max` contiguous bytes starting at `addr`, within one segment.
    pub fn window(&self, addr: u64, max: usize) -> Option<&[u8]> {
        let (base, seg) = self.segment_of(addr)?;
        let start = (addr - base) as usize;
        Some(&seg[start..seg.len().min(start + max)])
    }

    /// Decodes the instruction at `pc`.
    pub fn decode(&self, pc: u64, isa: IsaKind) -> Option<DecodedInstr> {
        decode_at(self.window(pc, MAX_INSTR_LEN)?, 0, isa)
    }

    /// The 64 bytes of a line; unmapped bytes read as `filler`.
    pub fn read_line(&self, line_addr: u64, filler: u8) -> Result<[u8; LINE_BYTES]> {
        assert_eq!(
            line_addr % LINE_BYTES as u64,
            0,
            "line address {line_addr:#x} is not aligned"
        );
        let mut out = [filler; LINE_BYTES];
        let mut mapped = false;
        for (i, slot) in out.iter_mut().enumerate() {
            if let Some(b) = self.byte_at(line_addr + i as u64) {
                *slot = b;
                mapped = true;
            }
        }
        if mapped {
            Ok(out)
        } else {
            Err(Error::UnmappedLine(line_addr))
        }
    }

    /// Instruction layout found by decoding every segment linearly from its
    /// base. Exact for images made only of contiguous code.
    pub fn linear_sweep(&self, isa: IsaKind) -> HashMap<u64, DecodedInstr> {
        let mut out = HashMap::new();
        for (base, seg) in self.segments() {
            let mut off = 0usize;
            while off < seg.len() {
                let Some(d) = decode_at(seg, off, isa) else {
                    break;
                };
                out.insert(base + off as u64, d);
                off += d.len as usize;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = ImageFile {
            segments: self
                .segments()
                .map(|(b, s)| SegmentFile {
                    base: format!("{b:#x}"),
                    bytes_hex: hex::encode(s),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("image serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ImageFile = serde_json::from_str(text)?;
        let mut image = CodeImage::new();
        for seg in file.segments {
            let digits = seg
                .base
                .strip_prefix("0x")
                .or_else(|| seg.base.strip_prefix("0X"));
            let base = digits
                .and_then(|d| u64::from_str_radix(d, 16).ok())
                .ok_or_else(|| Error::Image(format!("bad segment base `{}`", seg.base)))?;
            let bytes = hex::decode(&seg.bytes_hex)
                .map_err(|e| Error::Image(format!("segment {}: {e}", seg.base)))?;
            image.add_segment(base, bytes)?;
        }
        Ok(image)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
