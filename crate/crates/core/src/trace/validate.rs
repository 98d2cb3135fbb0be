use std::fmt;

use super::TraceRecord;
use crate::isa::{branch_target, BranchClass, IsaKind};
use crate::memory::CodeImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Malformed(String),
    Undecodable,
    LengthMismatch {
        recorded: u8,
        decoded: u8,
    },
    ClassMismatch {
        recorded: BranchClass,
        decoded: BranchClass,
    },
    TargetMismatch {
        recorded: u64,
        decoded: u64,
    },
    ControlFlow {
        expected: u64,
        found: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}: ", self.index)?;
        match &self.kind {
            ViolationKind::Malformed(r) => write!(f, "malformed ({r})"),
            ViolationKind::Undecodable => write!(f, "bytes at pc do not decode"),
            ViolationKind::LengthMismatch { recorded, decoded } => {
                write!(f, "recorded length {recorded}, decoded {decoded}")
            }
            ViolationKind::ClassMismatch { recorded, decoded } => {
                write!(
                    f,
                    "recorded class {}, decoded {}",
                    recorded.name(),
                    decoded.name()
                )
            }
            ViolationKind::TargetMismatch { recorded, decoded } => {
                write!(f, "recorded target {recorded:#x}, decoded {decoded:#x}")
            }
            ViolationKind::ControlFlow { expected, found } => {
                write!(f, "successor pc {found:#x}, expected {expected:#x}")
            }
        }
    }
}

/// Checks every record against the image and its successor.
pub fn validate_trace(image: &CodeImage, records: &[TraceRecord], isa: IsaKind) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |index, kind| out.push(Violation { index, kind });
    for (i, r) in records.iter().enumerate() {
        if let Err(reason) = r.check() {
            push(i, ViolationKind::Malformed(reason));
        }
        match image.decode(r.pc, isa) {
            None => push(i, ViolationKind::Undecodable),
            Some(d) => {
                if d.len != r.len {
                    push(
                        i,
                        ViolationKind::LengthMismatch {
                            recorded: r.len,
                            decoded: d.len,
                        },
                    );
                }
                if d.class != r.class {
                    push(
                        i,
                        ViolationKind::ClassMismatch {
                            recorded: r.class,
                            decoded: d.class,
                        },
                    );
                } else if d.class.is_direct() && r.target != 0 {
                    let t = branch_target(r.pc, &d);
                    if t != r.target {
                        push(
                            i,
                            ViolationKind::TargetMismatch {
                                recorded: r.target,
                                decoded: t,
                            },
                        );
                    }
                }
            }
        }
        if let Some(next) = records.get(i + 1) {
            let expected = r.next_pc();
            if next.pc != expected {
                push(
                    i,
                    ViolationKind::ControlFlow {
                        expected,
                        found: next.pc,
                    },
                );
            }
        }
    }
    out
}
