use serde::{Deserialize, Serialize};

use super::config::{SbdMode, SimConfig};
use super::metrics::{compute_metrics, ClassMpki};
use crate::error::Result;
use crate::memory::CodeImage;
use crate::trace::TraceRecord;

/// Where BTB misses fall in a run without shadow decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpportunityReport {
    pub retired: u64,
    pub btb_misses: u64,
    pub btb_miss_mpki: f64,
    pub l1i_resident_mpki: f64,
    pub l1i_nonresident_mpki: f64,
    pub l1i_resident_share: f64,
    pub class_mpki: ClassMpki,
    pub head_misses: u64,
    pub tail_misses: u64,
    pub other_misses: u64,
    pub head_share: f64,
    pub tail_share: f64,
}

fn share(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        part as f64 / total as f64
    }
}

pub fn analyze(
    image: &CodeImage,
    records: &[TraceRecord],
    cfg: &SimConfig,
) -> Result<OpportunityReport> {
    let cfg = SimConfig {
        sbd_mode: SbdMode::Off,
        ..cfg.clone()
    };
    let stats = super::run(image, records, &cfg)?;
    let m = compute_metrics(&stats)?;
    let b = &stats.btb_misses;
    Ok(OpportunityReport {
        retired: stats.retired,
        btb_misses: b.total,
        btb_miss_mpki: m.btb_miss_mpki,
        l1i_resident_mpki: m.btb_miss_l1i_resident_mpki,
        l1i_nonresident_mpki: m.btb_miss_l1i_nonresident_mpki,
        l1i_resident_share: share(b.l1i_resident, b.total),
        class_mpki: m.btb_miss_class_mpki,
        head_misses: b.head,
        tail_misses: b.tail,
        other_misses: b.other,
        head_share: share(b.head, b.total),
        tail_share: share(b.tail, b.total),
    })
}

impl OpportunityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
