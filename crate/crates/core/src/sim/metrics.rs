use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::stats::Stats;
use crate::error::{Error, Result};
use crate::isa::BranchClass;

pub fn mpki(count: u64, retired: u64) -> f64 {
    count as f64 * 1000.0 / retired as f64
}

/// Percentage by which `new` improves on `base`; positive means fewer.
pub fn reduction_pct(base: f64, new: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (base - new) / base * 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMpki {
    pub direct_cond: f64,
    pub direct_uncond: f64,
    pub call: f64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub indirect_uncond: f64,
    pub indirect_call: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub ipc: f64,
    pub btb_miss_mpki: f64,
    pub btb_miss_l1i_resident_mpki: f64,
    pub btb_miss_l1i_nonresident_mpki: f64,
    pub btb_miss_class_mpki: ClassMpki,
    pub resteer_decode_mpki: f64,
    pub resteer_execute_mpki: f64,
    pub l1i_demand_miss_mpki: f64,
    pub decoder_idle_fraction: f64,
}

pub fn compute_metrics(stats: &Stats) -> Result<Metrics> {
    let n = stats.retired;
    if n == 0 {
        return Err(Error::NothingRetired);
    }
    let m = &stats.btb_misses;
    let class = |c: BranchClass| mpki(m.by_class.get(c), n);
    Ok(Metrics {
        ipc: n as f64 / stats.cycles.max(1) as f64,
        btb_miss_mpki: mpki(m.total, n),
        btb_miss_l1i_resident_mpki: mpki(m.l1i_resident, n),
        btb_miss_l1i_nonresident_mpki: mpki(m.l1i_nonresident, n),
        btb_miss_class_mpki: ClassMpki {
            direct_cond: class(BranchClass::DirectCond),
            direct_uncond: class(BranchClass::DirectUncond),
            call: class(BranchClass::Call),
            ret: class(BranchClass::Return),
            indirect_uncond: class(BranchClass::IndirectUncond),
            indirect_call: class(BranchClass::IndirectCall),
        },
        resteer_decode_mpki: mpki(stats.resteers_decode, n),
        resteer_execute_mpki: mpki(stats.resteers_execute, n),
        l1i_demand_miss_mpki: mpki(stats.l1i.demand.misses, n),
        decoder_idle_fraction: stats.decoder_idle_cycles as f64 / stats.cycles.max(1) as f64,
    })
}

/// One simulated configuration with its counters and derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub config: SimConfig,
    pub stats: Stats,
    pub metrics: Metrics,
}

pub const CSV_HEADER: &str = "label,isa,sbd_mode,btb_entries,usbb_entries,rsbb_entries,retired,cycles,ipc,\
decoder_idle_cycles,btb_misses,btb_miss_mpki,btb_miss_l1i_resident_mpki,btb_miss_l1i_nonresident_mpki,\
cond_mpki,uncond_mpki,call_mpki,return_mpki,indirect_mpki,btb_miss_head,btb_miss_tail,btb_miss_other,\
sbb_insertions,sbb_head_insertions,sbb_tail_insertions,sbb_bogus_insertions,sbb_hits,sbb_hits_committed,\
sbb_bogus_supplied,sbb_wrong_supplied,resteers_decode,resteers_execute,l1i_demand_misses,l1i_prefetch_misses,l1i_wrong_path_fills";

impl RunReport {
    pub fn new(label: impl Into<String>, config: &SimConfig, stats: Stats) -> Result<Self> {
        let metrics = compute_metrics(&stats)?;
        Ok(Self {
            label: label.into(),
            config: config.clone(),
            stats,
            metrics,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_row(&self) -> String {
        let (c, s, m) = (&self.config, &self.stats, &self.metrics);
        let cm = &m.btb_miss_class_mpki;
        let label = if self.label.contains([',', '"', '\n']) {
            format!("\"{}\"", self.label.replace('"', "\"\""))
        } else {
            self.label.clone()
        };
        [
            label,
            c.isa.name().to_string(),
            c.sbd_mode.name().to_string(),
            c.btb_entries.to_string(),
            c.usbb_entries.to_string(),
            c.rsbb_entries.to_string(),
            s.retired.to_string(),
            s.cycles.to_string(),
            format!("{:.6}", m.ipc),
            s.decoder_idle_cycles.to_string(),
            s.btb_misses.total.to_string(),
            format!("{:.6}", m.btb_miss_mpki),
            format!("{:.6}", m.btb_miss_l1i_resident_mpki),
            format!("{:.6}", m.btb_miss_l1i_nonresident_mpki),
            format!("{:.6}", cm.direct_cond),
            format!("{:.6}", cm.direct_uncond),
            format!("{:.6}", cm.call),
            format!("{:.6}", cm.ret),
            format!("{:.6}", cm.indirect_uncond + cm.indirect_call),
            s.btb_misses.head.to_string(),
            s.btb_misses.tail.to_string(),
            s.btb_misses.other.to_string(),
            s.sbb.insertions.to_string(),
            s.sbb.head_insertions.total().to_string(),
            s.sbb.tail_insertions.total().to_string(),
            s.sbb.bogus_insertions.to_string(),
            s.sbb.hits.to_string(),
            s.sbb.hits_committed.to_string(),
            s.sbb.bogus_supplied.to_string(),
            s.sbb.wrong_supplied.to_string(),
            s.resteers_decode.to_string(),
            s.resteers_execute.to_string(),
            s.l1i.demand.misses.to_string(),
            s.l1i.prefetch.misses.to_string(),
            s.l1i.wrong_path_fills.to_string(),
        ]
        .join(",")
    }
}

pub fn to_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(misses: u64, retired: u64) -> Stats {
        let mut s = Stats {
            retired,
            cycles: retired,
            ..Stats::default()
        };
        s.btb_misses.total = misses;
        s.btb_misses.l1i_resident = misses / 3;
        s.btb_misses.l1i_nonresident = misses - misses / 3;
        s.btb_misses.by_class.call = misses;
        s.btb_misses.other = misses;
        s
    }

    #[test]
    fn mpki_definition() {
        let m = compute_metrics(&stats(10, 1000)).unwrap();
        assert_eq!(m.btb_miss_mpki, 10.0);
    }

    #[test]
    fn paired_reduction() {
        assert_eq!(reduction_pct(20.0, 10.0), 50.0);
        assert_eq!(reduction_pct(0.0, 0.0), 0.0);
    }

    #[test]
    fn residency_partition() {
        for (misses, retired) in [(7, 333), (1, 3), (1000, 7777)] {
            let m = compute_metrics(&stats(misses, retired)).unwrap();
            let sum = m.btb_miss_l1i_resident_mpki + m.btb_miss_l1i_nonresident_mpki;
            assert!((sum - m.btb_miss_mpki).abs() <= 1e-9);
        }
    }

    #[test]
    fn nothing_retired_is_an_error() {
        assert!(matches!(
            compute_metrics(&Stats::default()),
            Err(Error::NothingRetired)
        ));
    }

    #[test]
    fn csv_shape() {
        let r = RunReport::new("a,b", &SimConfig::default(), stats(4, 100)).unwrap();
        let csv = to_csv(&[r.clone(), r]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("\"a,b\",svl,off,8192,768,2024,100,"));
        let cols = CSV_HEADER.split(',').count();
        assert_eq!(
            lines[1].replacen("\"a,b\"", "x", 1).split(',').count(),
            cols
        );
    }
}
