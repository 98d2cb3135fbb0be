//! Branch prediction structures: BTB, the two shadow branch buffers, a
//! return address stack and a conditional direction predictor.

mod btb;
mod direction;
mod ras;
mod sbb;
pub mod table;

use serde::Serialize;

pub use btb::{Btb, BtbEntry, BtbType, BTB_LAYOUT};
pub use direction::{DirectionConfig, DirectionPredictor, Gshare};
pub use ras::Ras;
pub use sbb::{RSbb, Sbb, SbbPrediction, SbbSource, USbb, RSBB_LAYOUT, USBB_LAYOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub name: &'static str,
    pub bits: u32,
}

/// Bit layout of one entry of a tagged structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryLayout {
    pub name: &'static str,
    pub fields: &'static [Field],
}

impl EntryLayout {
    pub fn bits(&self) -> u32 {
        self.fields.iter().map(|f| f.bits).sum()
    }
}

/// Storage cost of one configured structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureAudit {
    pub name: &'static str,
    pub entries: usize,
    pub ways: usize,
    pub sets: usize,
    pub bits_per_entry: u32,
    pub total_bits: u64,
}

impl StructureAudit {
    pub fn new(layout: &EntryLayout, entries: usize, ways: usize) -> Self {
        let bits_per_entry = layout.bits();
        Self {
            name: layout.name,
            entries,
            ways,
            sets: entries / ways,
            bits_per_entry,
            total_bits: entries as u64 * bits_per_entry as u64,
        }
    }

    pub fn bytes(&self) -> f64 {
        self.total_bits as f64 / 8.0
    }

    pub fn kib(&self) -> f64 {
        self.bytes() / 1024.0
    }
}

/// Stable text report of per-structure storage.
pub fn format_audit(audits: &[StructureAudit]) -> String {
    let mut out = String::new();
    for a in audits {
        out.push_str(&format!(
            "{:<6} entries={:<5} ways={} sets={:<5} bits/entry={} total_bits={} size={:.4} KB\n",
            a.name,
            a.entries,
            a.ways,
            a.sets,
            a.bits_per_entry,
            a.total_bits,
            a.kib()
        ));
    }
    let sbb_bits: u64 = audits
        .iter()
        .filter(|a| a.name != "BTB")
        .map(|a| a.total_bits)
        .sum();
    out.push_str(&format!(
        "SBB total: {:.4} KB\n",
        sbb_bits as f64 / 8.0 / 1024.0
    ));
    out
}

/// BTB entries that fit in the same storage as a BTB of `btb_entries` plus
/// the given shadow buffers, rounded down to whole sets.
pub fn iso_storage_btb_entries(
    btb_entries: usize,
    usbb_entries: usize,
    rsbb_entries: usize,
    ways: usize,
) -> usize {
    let extra_bits = usbb_entries as u64 * USBB_LAYOUT.bits() as u64
        + rsbb_entries as u64 * RSBB_LAYOUT.bits() as u64;
    let extra = (extra_bits / BTB_LAYOUT.bits() as u64) as usize;
    btb_entries + extra / ways * ways
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_widths() {
        assert_eq!(BTB_LAYOUT.bits(), 78);
        assert_eq!(USBB_LAYOUT.bits(), 78);
        assert_eq!(RSBB_LAYOUT.bits(), 20);
    }

    #[test]
    fn default_sizes() {
        assert_eq!(StructureAudit::new(&BTB_LAYOUT, 8192, 4).kib(), 78.0);
        assert_eq!(StructureAudit::new(&USBB_LAYOUT, 768, 4).kib(), 7.3125);
        let r = StructureAudit::new(&RSBB_LAYOUT, 2024, 4);
        assert_eq!(r.sets, 506);
        assert!((r.kib() - 4.94).abs() <= 0.01);
    }

    #[test]
    fn iso_storage() {
        // 100384 bits of SBB storage buys 1286 BTB entries, 1284 in whole 4-way sets.
        assert_eq!(iso_storage_btb_entries(512, 768, 2024, 4), 512 + 1284);
    }
}
