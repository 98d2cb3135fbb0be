use std::fmt::Write;

use skia_core::isa::IsaKind;
use skia_core::shadow::{
    analyze_head, decode_tail, CacheLineView, IndexPolicy, ShadowBranch, LINE_BYTES,
};

fn branch_lines(out: &mut String, branches: &[ShadowBranch]) {
    if branches.is_empty() {
        out.push_str("    none\n");
    }
    for b in branches {
        let target = b.target.map_or("ras".to_string(), |t| format!("{t:#x}"));
        writeln!(
            out,
            "    +{:02} {:#x} {} target {}",
            b.line_offset,
            b.pc,
            b.kind.name(),
            target
        )
        .unwrap();
    }
}

fn list(v: impl IntoIterator<Item = impl ToString>) -> String {
    let items: Vec<String> = v.into_iter().map(|x| x.to_string()).collect();
    if items.is_empty() {
        "none".into()
    } else {
        items.join(" ")
    }
}

/// Text dump used by `decode-line`.
pub fn decode_line_text(
    line_addr: u64,
    bytes: [u8; LINE_BYTES],
    entry_offset: u8,
    tail_start: Option<u8>,
    isa: IsaKind,
    max_valid_paths: usize,
) -> String {
    let mut out = String::new();
    let tail = tail_start.map_or("none".to_string(), |t| t.to_string());
    writeln!(
        out,
        "line {line_addr:#x} isa {} entry_offset {entry_offset} tail_start {tail}",
        isa.name()
    )
    .unwrap();
    out.push_str("bytes\n");
    for (row, chunk) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
        writeln!(out, "  {:02x}: {}", row * 16, hex.join(" ")).unwrap();
    }

    out.push_str("head\n");
    let view = CacheLineView::new(line_addr, bytes, entry_offset, tail_start);
    if entry_offset == 0 {
        out.push_str("  no head region\n");
    } else {
        let first = analyze_head(&view, isa, IndexPolicy::FirstIndex, max_valid_paths);
        writeln!(out, "  length_vector {}", list(&first.lengths.0)).unwrap();
        writeln!(out, "  valid_starts {}", list(&first.valid_starts)).unwrap();
        if first.valid_starts.len() > max_valid_paths {
            writeln!(
                out,
                "  discarded: {} valid starts exceed the limit of {max_valid_paths}",
                first.valid_starts.len()
            )
            .unwrap();
        }
        let decodes: Vec<_> = IndexPolicy::ALL
            .iter()
            .map(|&p| (p, analyze_head(&view, isa, p, max_valid_paths)))
            .collect();
        for (p, d) in &decodes {
            let idx = d.selected.map_or("none".to_string(), |i| i.to_string());
            writeln!(out, "  {}_index {idx}", p.name()).unwrap();
        }
        for (p, d) in &decodes {
            writeln!(out, "  branches ({}_index)", p.name()).unwrap();
            branch_lines(&mut out, &d.branches);
        }
    }

    out.push_str("tail\n");
    match tail_start {
        None => out.push_str("  no tail region\n"),
        Some(t) => {
            writeln!(out, "  from +{t:02}").unwrap();
            branch_lines(&mut out, &decode_tail(&view, isa));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_line() -> [u8; LINE_BYTES] {
        let mut b = [0x90; LINE_BYTES];
        b[..8].copy_from_slice(&[0x45, 0x6A, 0x31, 0xE9, 0xF9, 0x03, 0x00, 0x00]);
        b
    }

    #[test]
    fn policies_and_branch_listed() {
        let t = decode_line_text(0x40_0000, worked_line(), 8, None, IsaKind::X86Subset, 6);
        assert!(t.contains("  valid_starts 0 1 3\n"), "{t}");
        assert!(t.contains("  first_index 0\n"));
        assert!(t.contains("  merge_index 3\n"));
        assert!(t.contains("+03 0x400003 uncond target 0x400401"));
        assert!(t.ends_with("tail\n  no tail region\n"));
    }

    #[test]
    fn entry_zero_has_no_head() {
        let t = decode_line_text(0x40_0000, worked_line(), 0, Some(8), IsaKind::X86Subset, 6);
        assert!(t.contains("head\n  no head region\n"));
        assert!(t.contains("tail\n  from +08\n    none\n"));
    }

    #[test]
    fn cap_reports_discard() {
        let t = decode_line_text(0x40_0000, worked_line(), 8, None, IsaKind::X86Subset, 2);
        assert!(t.contains("discarded: 3 valid starts exceed the limit of 2"));
        assert!(t.contains("  first_index none\n"));
    }
}
