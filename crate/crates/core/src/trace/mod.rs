//! Committed-instruction traces: file format, validation and generation.

mod generator;
mod record;
mod validate;

pub use generator::{generate_synthetic, BranchMix, GenParams, PRESETS};
pub use record::{
    from_bytes, read_trace, to_bytes, write_trace, TraceRecord, MAGIC, RECORD_BYTES, VERSION,
};
pub use validate::{validate_trace, Violation, ViolationKind};
