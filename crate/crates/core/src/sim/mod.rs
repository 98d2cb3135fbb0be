//! Trace-driven decoupled front-end simulator.

mod analyze;
mod config;
mod frontend;
mod metrics;
mod stats;

pub use analyze::{analyze, OpportunityReport};
pub use config::{SbdMode, SimConfig};
pub use frontend::run;
pub use metrics::{
    compute_metrics, mpki, reduction_pct, to_csv, ClassMpki, Metrics, RunReport, CSV_HEADER,
};
pub use stats::{BtbMissStats, ClassCounts, KindCounts, SbbStats, Stats};
