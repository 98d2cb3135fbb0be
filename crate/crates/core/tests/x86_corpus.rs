//! Decoder agreement with the frozen capstone-labelled corpus.

use skia_core::isa::{decode_at, BranchClass, IsaKind};

const CORPUS: &str = include_str!("data/x86_corpus.txt");

fn class_by_name(name: &str) -> BranchClass {
    *BranchClass::ALL
        .iter()
        .find(|c| c.name() == name)
        .unwrap_or_else(|| panic!("unknown class {name}"))
}

#[test]
fn corpus_agrees_with_reference_disassembler() {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for line in CORPUS.lines().filter(|l| !l.trim().is_empty()) {
        let mut f = line.split_whitespace();
        let bytes = hex::decode(f.next().unwrap()).unwrap();
        let len: u8 = f.next().unwrap().parse().unwrap();
        let class = class_by_name(f.next().unwrap());
        checked += 1;
        match decode_at(&bytes, 0, IsaKind::X86Subset) {
            Some(d) if d.len == len && d.class == class => {}
            got => mismatches.push(format!("{line}: got {got:?}")),
        }
    }
    assert!(checked >= 1000, "corpus has only {checked} instructions");
    assert!(
        mismatches.is_empty(),
        "{} mismatches: {:?}",
        mismatches.len(),
        &mismatches[..mismatches.len().min(10)]
    );
}

#[test]
fn corpus_covers_every_branch_class() {
    for class in BranchClass::ALL {
        assert!(
            CORPUS
                .lines()
                .any(|l| l.ends_with(&format!(" {}", class.name()))),
            "no {} in corpus",
            class.name()
        );
    }
}
