//! Code image and L1 instruction cache.

mod image;
mod l1i;

pub use image::CodeImage;
pub use l1i::{Access, AccessKind, HitMiss, L1iCache, L1iCounters};

/// Address of the 64-byte line containing `addr`.
pub fn line_of(addr: u64) -> u64 {
    addr & !(crate::shadow::LINE_BYTES as u64 - 1)
}
