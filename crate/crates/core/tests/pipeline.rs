//! Generator and simulator properties on generated workloads.

use std::collections::HashSet;

use proptest::prelude::*;
use skia_core::isa::{BranchClass, IsaKind};
use skia_core::shadow::{analyze_head, CacheLineView, LINE_BYTES};
use skia_core::sim::{run, RunReport, SbdMode, SimConfig};
use skia_core::trace::{generate_synthetic, validate_trace, BranchMix, GenParams, TraceRecord};

fn shares(records: &[TraceRecord]) -> [f64; 7] {
    let mut counts = [0u64; 7];
    for r in records.iter().filter(|r| r.class.is_branch()) {
        counts[r.class.code() as usize] += 1;
    }
    let total: u64 = counts.iter().sum();
    counts.map(|c| c as f64 / total as f64)
}

#[test]
fn dynamic_mix_tracks_weights() {
    for (isa, mix, ipf, hot_fraction, colocation) in [
        (
            IsaKind::Svl,
            BranchMix {
                cond: 0.4,
                uncond: 0.2,
                call: 0.4,
            },
            24,
            0.25,
            3,
        ),
        (
            IsaKind::X86Subset,
            BranchMix {
                cond: 0.3,
                uncond: 0.1,
                call: 0.6,
            },
            16,
            0.5,
            3,
        ),
        (
            IsaKind::Svl,
            BranchMix {
                cond: 0.7,
                uncond: 0.2,
                call: 0.1,
            },
            40,
            0.5,
            1,
        ),
    ] {
        let p = GenParams {
            instructions: 200_000,
            instrs_per_function: ipf,
            hot_fraction,
            colocation,
            branch_mix: mix,
            ..GenParams::preset("hot-cold", isa).unwrap()
        };
        let (_, recs) = generate_synthetic(&p).unwrap();
        let got = shares(&recs);
        let want = mix.expected_shares();
        for c in BranchClass::ALL {
            let i = c.code() as usize;
            assert!(
                (got[i] - want[i]).abs() <= 0.02,
                "{mix:?} {}: got {:.4}, want {:.4}",
                c.name(),
                got[i],
                want[i]
            );
        }
    }
}

#[test]
fn unreachable_mix_is_rejected() {
    let p = GenParams {
        branch_mix: BranchMix {
            cond: 0.7,
            uncond: 0.2,
            call: 0.1,
        },
        ..GenParams::preset("hot-cold", IsaKind::Svl).unwrap()
    };
    let err = generate_synthetic(&p).unwrap_err().to_string();
    assert!(err.contains("unreachable"), "{err}");
}

fn scaled(isa: IsaKind, sbd_mode: SbdMode) -> SimConfig {
    SimConfig {
        isa,
        btb_entries: 512,
        usbb_entries: 48,
        rsbb_entries: 128,
        sbd_mode,
        ..SimConfig::default()
    }
}

fn params() -> impl Strategy<Value = GenParams> {
    (
        prop_oneof![Just(IsaKind::Svl), Just(IsaKind::X86Subset)],
        prop::sample::select(&["hot-cold", "return-heavy"][..]),
        400usize..1600,
        any::<u64>(),
        0.0f64..0.6,
        any::<bool>(),
    )
        .prop_map(|(isa, preset, functions, seed, cond_taken, packed)| {
            let base = GenParams::preset(preset, isa).unwrap();
            GenParams {
                functions,
                seed,
                cond_taken,
                instructions: 6_000,
                no_line_crossing: isa == IsaKind::Svl || !packed,
                ..base
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_runs_keep_the_accounting_identities(p in params()) {
        let (img, recs) = generate_synthetic(&p).unwrap();
        prop_assert!(validate_trace(&img, &recs, p.isa).is_empty());
        for mode in SbdMode::ALL {
            let cfg = scaled(p.isa, mode);
            let stats = run(&img, &recs, &cfg).unwrap();
            prop_assert_eq!(stats.retired, recs.len() as u64);
            prop_assert!(stats.check_identities().is_ok());
            if mode == SbdMode::Off {
                prop_assert_eq!(stats.sbb, Default::default());
            }
            let again = run(&img, &recs, &cfg).unwrap();
            let a = RunReport::new("x", &cfg, stats).unwrap();
            let b = RunReport::new("x", &cfg, again).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
        }
    }
}

#[test]
fn svl_head_paths_follow_the_true_layout() {
    let p = GenParams {
        instructions: 60_000,
        ..GenParams::preset("hot-cold", IsaKind::Svl).unwrap()
    };
    let (img, recs) = generate_synthetic(&p).unwrap();
    let truth = img.linear_sweep(IsaKind::Svl);
    let mut checked = HashSet::new();
    for w in recs.windows(2) {
        if !w[0].taken {
            continue;
        }
        let pc = w[1].pc;
        let line = pc & !(LINE_BYTES as u64 - 1);
        let entry = (pc - line) as u8;
        if entry == 0 || !checked.insert(pc) {
            continue;
        }
        let bytes = img.read_line(line, IsaKind::Svl.filler_byte()).unwrap();
        let view = CacheLineView::new(line, bytes, entry, None);
        let d = analyze_head(&view, IsaKind::Svl, Default::default(), 6);
        if let Some(start) = d.selected {
            let walk = skia_core::shadow::walk(&d.lengths, start, entry as usize);
            for off in walk {
                assert!(
                    truth.contains_key(&(line + off as u64)),
                    "bogus head path at {:#x}",
                    line + off as u64
                );
            }
        }
    }
    assert!(checked.len() > 100);

    let off = run(&img, &recs, &scaled(IsaKind::Svl, SbdMode::Off)).unwrap();
    let both = run(&img, &recs, &scaled(IsaKind::Svl, SbdMode::Both)).unwrap();
    assert_eq!(both.sbb.bogus_insertions, 0);
    assert_eq!(both.sbb.bogus_supplied, 0);
    assert!(both.resteers_decode <= off.resteers_decode);
    assert!(both.btb_misses.total < off.btb_misses.total);
}

#[test]
fn no_shadow_preset_offers_nothing() {
    for isa in [IsaKind::Svl, IsaKind::X86Subset] {
        let p = GenParams {
            instructions: 50_000,
            ..GenParams::preset("no-shadow", isa).unwrap()
        };
        let (img, recs) = generate_synthetic(&p).unwrap();
        let both = run(&img, &recs, &scaled(isa, SbdMode::Both)).unwrap();
        assert_eq!(both.sbb.insertions, 0, "{}", isa.name());
        let report = skia_core::sim::analyze(&img, &recs, &scaled(isa, SbdMode::Off)).unwrap();
        assert!(report.btb_misses > 0);
        assert_eq!(report.head_misses + report.tail_misses, 0);
    }
}
