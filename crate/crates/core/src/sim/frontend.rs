//! Cycle loop of the decoupled front end.
//!
//! Each cycle runs, in order: resteer resolution, due shadow decodes,
//! decode/commit, address generation (one FTQ entry), and fetch (one FTQ
//! entry). The trace is the ground truth for the correct path; the wrong
//! path is synthesized from predictor state and the code image.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use super::config::SimConfig;
use super::stats::Stats;
use crate::error::{Error, Result};
use crate::isa::BranchClass;
use crate::memory::{line_of, Access, AccessKind, CodeImage, L1iCache};
use crate::predictors::{Btb, BtbType, DirectionPredictor, Ras, Sbb, SbbSource};
use crate::shadow::{decode_head, decode_tail, CacheLineView, Region, ShadowKind, LINE_BYTES};
use crate::trace::TraceRecord;

/// Cycles without a commit after which the run is declared stuck.
const WATCHDOG_CYCLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    None,
    Btb,
    /// `bogus` when the entry was filled by a branch that does not exist.
    Sbb {
        buffer: SbbSource,
        bogus: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PredKind {
    FallThrough,
    Cond,
    Uncond,
    Call,
    Return,
}

#[derive(Debug, Clone, Copy)]
struct Prediction {
    kind: PredKind,
    taken: bool,
    /// `None` for a taken prediction without a usable target.
    target: Option<u64>,
    source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cause {
    Decode,
    Execute,
}

#[derive(Debug, Clone)]
struct Mispredict {
    cause: Cause,
    /// Return stack as it should be after the mispredicted instruction.
    ras: Ras,
}

#[derive(Debug, Clone, Copy)]
struct OnPathInfo {
    source: Source,
    /// Taken and identified by the BTB or SBB with the right kind and target.
    covered: bool,
    sbb_correct: bool,
    l1i_resident: bool,
}

#[derive(Debug, Clone)]
struct FtqEntry {
    on_path: bool,
    /// First record index for on-path entries.
    first: usize,
    count: usize,
    info: Vec<OnPathInfo>,
    mispredict: Option<Box<Mispredict>>,
    lines: Vec<u64>,
    /// Cycle from which decode may consume the entry.
    ready: Option<u64>,
    decoded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IagState {
    OnPath(usize),
    WrongPath(u64),
    Halted,
    Done,
}

#[derive(Debug, Clone)]
struct PendingResteer {
    at: u64,
    next: usize,
    ras: Ras,
    next_is_target: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SbdJob {
    Head { entry_offset: u8 },
    Tail { tail_start: u8 },
}

#[derive(Debug, Clone, Copy)]
struct LineVisit {
    entry: u8,
    tail_start: Option<u8>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    image: &'a CodeImage,
    records: &'a [TraceRecord],
    btb: Btb,
    sbb: Sbb,
    ras: Ras,
    dir: DirectionPredictor,
    l1i: L1iCache,
    ftq: VecDeque<FtqEntry>,
    iag: IagState,
    iag_ready_at: u64,
    next_is_target: bool,
    fetch_busy_until: u64,
    pending: Option<PendingResteer>,
    sbd_events: BinaryHeap<Reverse<(u64, u64, u64, SbdJob)>>,
    sbd_seq: u64,
    boundaries: HashSet<u64>,
    committed: usize,
    visit: Option<(u64, LineVisit)>,
    visits: HashMap<u64, LineVisit>,
    now: u64,
    stats: Stats,
}

/// Simulates `records` and returns the run's counters.
pub fn run(image: &CodeImage, records: &[TraceRecord], cfg: &SimConfig) -> Result<Stats> {
    cfg.validate()?;
    check_consistency(image, records, cfg)?;
    let mut e = Engine::new(image, records, cfg);
    e.run()?;
    e.stats
        .check_identities()
        .map_err(|reason| Error::Simulation { pc: 0, reason })?;
    Ok(e.stats)
}

fn check_consistency(image: &CodeImage, records: &[TraceRecord], cfg: &SimConfig) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let fail = |reason: String| Err(Error::TraceMismatch { pc: r.pc, reason });
        if let Err(reason) = r.check() {
            return fail(format!("record {i}: {reason}"));
        }
        match image.decode(r.pc, cfg.isa) {
            None => return fail(format!("record {i}: image bytes do not decode")),
            Some(d) if d.len != r.len || d.class != r.class => {
                return fail(format!(
                    "record {i}: trace says {} of {} bytes, image decodes {} of {} bytes",
                    r.class.name(),
                    r.len,
                    d.class.name(),
                    d.len
                ))
            }
            Some(_) => {}
        }
        if let Some(next) = records.get(i + 1) {
            if next.pc != r.next_pc() {
                return fail(format!(
                    "record {i}: successor at {:#x}, expected {:#x}",
                    next.pc,
                    r.next_pc()
                ));
            }
        }
    }
    Ok(())
}

fn ras_effect(ras: &mut Ras, kind: PredKind, return_to: u64) {
    match kind {
        PredKind::Call => ras.push(return_to),
        PredKind::Return => {
            ras.pop();
        }
        _ => {}
    }
}

fn actual_kind(class: BranchClass) -> PredKind {
    match class {
        BranchClass::NonBranch => PredKind::FallThrough,
        BranchClass::DirectCond => PredKind::Cond,
        BranchClass::DirectUncond | BranchClass::IndirectUncond => PredKind::Uncond,
        BranchClass::Call | BranchClass::IndirectCall => PredKind::Call,
        BranchClass::Return => PredKind::Return,
    }
}

fn lines_between(start: u64, end: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut l = line_of(start);
    while l < end {
        out.push(l);
        l += LINE_BYTES as u64;
    }
    out
}

impl<'a> Engine<'a> {
    fn new(image: &'a CodeImage, records: &'a [TraceRecord], cfg: &'a SimConfig) -> Self {
        let boundaries = if cfg.sbd_mode == super::SbdMode::Off {
            HashSet::new()
        } else {
            image.linear_sweep(cfg.isa).into_keys().collect()
        };
        Self {
            cfg,
            image,
            records,
            btb: Btb::new(cfg.btb_entries, cfg.ways),
            sbb: Sbb::new(cfg.usbb_entries, cfg.rsbb_entries, cfg.ways),
            ras: Ras::new(cfg.ras_depth),
            dir: DirectionPredictor::new(cfg.direction_predictor),
            l1i: L1iCache::new(cfg.l1i_size, cfg.l1i_ways, cfg.l1i_miss_latency),
            ftq: VecDeque::with_capacity(cfg.ftq_entries),
            iag: if records.is_empty() {
                IagState::Done
            } else {
                IagState::OnPath(0)
            },
            iag_ready_at: 0,
            next_is_target: false,
            fetch_busy_until: 0,
            pending: None,
            sbd_events: BinaryHeap::new(),
            sbd_seq: 0,
            boundaries,
            committed: 0,
            visit: None,
            visits: HashMap::new(),
            now: 0,
            stats: Stats::default(),
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut last_progress = 0;
        while self.committed < self.records.len() {
            self.resolve_resteer();
            self.shadow_decode();
            let before = self.committed;
            self.decode();
            self.address_generation();
            self.fetch();
            if self.committed != before {
                last_progress = self.now;
            } else if self.now - last_progress > WATCHDOG_CYCLES {
                let pc = self.records[self.committed].pc;
                return Err(Error::Simulation {
                    pc,
                    reason: "front end made no progress".into(),
                });
            }
            self.now += 1;
        }
        self.stats.retired = self.committed as u64;
        self.stats.cycles = self.now;
        self.stats.l1i = self.l1i.counters;
        Ok(())
    }

    fn resolve_resteer(&mut self) {
        if !self.pending.as_ref().is_some_and(|p| p.at <= self.now) {
            return;
        }
        let p = self.pending.take().unwrap();
        self.ftq.clear();
        self.fetch_busy_until = self.now;
        self.ras = p.ras;
        self.next_is_target = p.next_is_target;
        self.iag = if p.next < self.records.len() {
            IagState::OnPath(p.next)
        } else {
            IagState::Done
        };
        self.iag_ready_at = self.now;
    }

    fn shadow_decode(&mut self) {
        while let Some(&Reverse((at, _, line, job))) = self.sbd_events.peek() {
            if at > self.now {
                break;
            }
            self.sbd_events.pop();
            let Ok(bytes) = self.image.read_line(line, self.cfg.isa.filler_byte()) else {
                continue;
            };
            let found = match job {
                SbdJob::Head { entry_offset } => {
                    let view = CacheLineView::new(line, bytes, entry_offset, None);
                    decode_head(
                        &view,
                        self.cfg.isa,
                        self.cfg.index_policy,
                        self.cfg.max_valid_paths,
                    )
                }
                SbdJob::Tail { tail_start } => {
                    let view = CacheLineView::new(line, bytes, 0, Some(tail_start));
                    decode_tail(&view, self.cfg.isa)
                }
            };
            for sb in found {
                self.sbb.insert(&sb);
                let s = &mut self.stats.sbb;
                s.insertions += 1;
                match sb.origin {
                    Region::Head => s.head_insertions.add(sb.kind),
                    Region::Tail => s.tail_insertions.add(sb.kind),
                }
                if !self.boundaries.contains(&sb.pc) {
                    s.bogus_insertions += 1;
                }
            }
        }
    }

    fn schedule(&mut self, at: u64, line: u64, job: SbdJob) {
        self.sbd_seq += 1;
        self.sbd_events
            .push(Reverse((at + self.cfg.sbd_delay, self.sbd_seq, line, job)));
    }

    fn decode(&mut self) {
        let mut budget = self.cfg.decode_width;
        let mut consumed = 0;
        while budget > 0 {
            let Some(head) = self.ftq.front_mut() else {
                break;
            };
            if head.ready.map_or(true, |t| t > self.now) {
                break;
            }
            let n = budget.min(head.count - head.decoded);
            let (on_path, first, done_before) = (head.on_path, head.first, head.decoded);
            head.decoded += n;
            budget -= n;
            consumed += n;
            if on_path {
                for k in done_before..done_before + n {
                    let info = self.ftq[0].info[k];
                    self.commit(first + k, info);
                }
            } else {
                self.stats.wrong_path_decoded += n as u64;
            }
            if self.ftq[0].decoded < self.ftq[0].count {
                break;
            }
            let entry = self.ftq.pop_front().unwrap();
            if let Some(m) = entry.mispredict {
                self.trigger_resteer(entry.first + entry.count - 1, *m);
                break;
            }
        }
        if consumed == 0 {
            self.stats.decoder_idle_cycles += 1;
        }
    }

    fn trigger_resteer(&mut self, idx: usize, m: Mispredict) {
        let r = &self.records[idx];
        let at = match m.cause {
            Cause::Decode => {
                self.stats.resteers_decode += 1;
                self.ftq.clear();
                self.iag = IagState::Halted;
                self.now + self.cfg.decode_resteer_repair
            }
            Cause::Execute => {
                self.stats.resteers_execute += 1;
                self.now + self.cfg.execute_resteer_penalty
            }
        };
        self.pending = Some(PendingResteer {
            at,
            next: idx + 1,
            ras: m.ras,
            next_is_target: r.taken,
        });
    }

    fn commit(&mut self, idx: usize, info: OnPathInfo) {
        let r = self.records[idx];
        self.committed += 1;
        if r.class == BranchClass::DirectCond {
            self.dir.update(r.pc, r.taken);
        }
        if r.taken {
            self.stats.taken_branches += 1;
            if let Some(kind) = BtbType::from_class(r.class) {
                self.btb.insert(r.pc, kind, r.target);
            }
        }
        if let Source::Sbb { buffer: src, bogus } = info.source {
            if info.sbb_correct {
                self.stats.sbb.hits_committed += 1;
                self.sbb.mark_retired(r.pc, src);
            } else {
                if bogus {
                    self.stats.sbb.bogus_supplied += 1;
                } else {
                    self.stats.sbb.wrong_supplied += 1;
                }
                if self.cfg.invalidate_on_bogus {
                    self.stats.sbb.invalidations += 1;
                    self.sbb.invalidate(r.pc, src);
                }
            }
        }

        let line = line_of(r.pc);
        let offset = (r.pc - line) as u8;
        match self.visit {
            Some((l, _)) if l == line => {}
            _ => {
                let entered_by_jump = idx > 0 && self.records[idx - 1].taken;
                let entry = if entered_by_jump || idx == 0 {
                    offset
                } else {
                    0
                };
                self.visit = Some((
                    line,
                    LineVisit {
                        entry,
                        tail_start: None,
                    },
                ));
            }
        }
        if r.taken && !info.covered {
            let m = &mut self.stats.btb_misses;
            m.total += 1;
            *m.by_class.slot(r.class) += 1;
            if info.l1i_resident {
                m.l1i_resident += 1;
            } else {
                m.l1i_nonresident += 1;
            }
            match self.visits.get(&line) {
                Some(v) if offset < v.entry => m.head += 1,
                Some(LineVisit {
                    tail_start: Some(t),
                    ..
                }) if offset >= *t => m.tail += 1,
                _ => m.other += 1,
            }
        }
        let end = r.fall_through();
        let leaves = r.taken || line_of(end) != line || idx + 1 == self.records.len();
        if leaves {
            let (_, mut v) = self.visit.take().unwrap();
            if r.taken {
                v.tail_start = Some((end - line).min(LINE_BYTES as u64) as u8);
            }
            self.visits.insert(line, v);
        }
    }

    fn predict(&mut self, pc: u64, actual_taken: Option<bool>, on_path: bool) -> Prediction {
        if on_path {
            self.stats.btb_lookups += 1;
        }
        if let Some(e) = self.btb.lookup(pc) {
            let (kind, taken, target) = match e.kind {
                BtbType::DirectCond => (
                    PredKind::Cond,
                    self.dir.predict(pc, actual_taken),
                    Some(e.target),
                ),
                BtbType::DirectUncond => (PredKind::Uncond, true, Some(e.target)),
                BtbType::Call => (PredKind::Call, true, Some(e.target)),
                BtbType::Other => (
                    PredKind::Return,
                    true,
                    Some(self.ras.peek().unwrap_or(e.target)),
                ),
            };
            return Prediction {
                kind,
                taken,
                target,
                source: Source::Btb,
            };
        }
        if on_path {
            self.stats.btb_lookup_misses += 1;
        }
        if self.cfg.sbd_mode != super::SbdMode::Off {
            if let Some(p) = self.sbb.lookup(pc) {
                self.stats.sbb.hits += 1;
                let (kind, target) = match p.kind {
                    ShadowKind::Uncond => (PredKind::Uncond, p.target),
                    ShadowKind::Call => (PredKind::Call, p.target),
                    ShadowKind::Return => (PredKind::Return, self.ras.peek()),
                };
                return Prediction {
                    kind,
                    taken: true,
                    target,
                    source: Source::Sbb {
                        buffer: p.source,
                        bogus: !self.boundaries.contains(&p.filled_by),
                    },
                };
            }
        }
        Prediction {
            kind: PredKind::FallThrough,
            taken: false,
            target: None,
            source: Source::None,
        }
    }

    fn address_generation(&mut self) {
        if self.now < self.iag_ready_at || self.ftq.len() >= self.cfg.ftq_entries {
            return;
        }
        let entry = match self.iag {
            IagState::OnPath(idx) => self.form_on_path(idx),
            IagState::WrongPath(pc) => self.form_wrong_path(pc),
            IagState::Halted | IagState::Done => None,
        };
        let Some((entry, start, exit)) = entry else {
            return;
        };
        let is_target = self.next_is_target;
        self.next_is_target = exit.is_some();
        self.insert_entry(entry, start, is_target, exit);
    }

    /// Prefetches the entry's lines, schedules shadow decodes and queues it.
    fn insert_entry(&mut self, entry: FtqEntry, start: u64, is_target: bool, exit: Option<u64>) {
        let kind = if entry.on_path {
            AccessKind::Prefetch
        } else {
            AccessKind::WrongPathPrefetch
        };
        let mut ready_of = HashMap::new();
        for &line in &entry.lines {
            let ready = match self.l1i.access(line, kind, self.now) {
                Access::Hit => self.now,
                Access::Miss { fill_completes_at } => fill_completes_at,
            };
            ready_of.insert(line, ready);
        }
        let mode = self.cfg.sbd_mode;
        let start_line = line_of(start);
        let entry_offset = (start - start_line) as u8;
        if mode.head() && is_target && entry_offset > 0 {
            let at = ready_of[&start_line];
            self.schedule(at, start_line, SbdJob::Head { entry_offset });
        }
        if let (true, Some(end)) = (mode.tail(), exit) {
            let line = line_of(end - 1);
            let tail_start = end - line;
            if tail_start < LINE_BYTES as u64 {
                let at = ready_of.get(&line).copied().unwrap_or(self.now);
                self.schedule(
                    at,
                    line,
                    SbdJob::Tail {
                        tail_start: tail_start as u8,
                    },
                );
            }
        }
        self.ftq.push_back(entry);
    }

    /// Forms one correct-path entry. Returns the entry, its start pc and the
    /// end address of its predicted-taken exit branch, if any.
    fn form_on_path(&mut self, first: usize) -> Option<(FtqEntry, u64, Option<u64>)> {
        let start = self.records[first].pc;
        let mut idx = first;
        let mut info = Vec::new();
        let mut mispredict = None;
        let mut exit = None;
        loop {
            let r = self.records[idx];
            let resident = r.taken && self.l1i.resident(line_of(r.pc), self.now);
            let actual_cond = r.class == BranchClass::DirectCond && r.taken;
            let pred = self.predict(r.pc, Some(actual_cond), true);
            let pred_next = if pred.taken {
                pred.target
            } else {
                Some(r.fall_through())
            };
            let correct = pred_next == Some(r.next_pc());

            let kind_ok = pred.kind == actual_kind(r.class);
            let target_ok = !r.class.is_direct() || pred.target == Some(r.target);
            let identified = pred.source != Source::None && kind_ok && target_ok;
            info.push(OnPathInfo {
                source: pred.source,
                covered: r.taken && identified,
                sbb_correct: matches!(pred.source, Source::Sbb { .. }) && identified,
                l1i_resident: resident,
            });
            idx += 1;

            let return_to = r.fall_through();
            if !correct {
                let mut repaired = self.ras.clone();
                let cause = self.cause(&r, &repaired);
                ras_effect(&mut repaired, actual_kind(r.class), return_to);
                mispredict = Some(Box::new(Mispredict {
                    cause,
                    ras: repaired,
                }));
                ras_effect(&mut self.ras, pred.kind, return_to);
                self.iag = match pred_next {
                    Some(pc) => IagState::WrongPath(pc),
                    None => IagState::Halted,
                };
                if pred.taken {
                    exit = Some(return_to);
                }
                break;
            }
            ras_effect(&mut self.ras, actual_kind(r.class), return_to);
            if idx == self.records.len() {
                self.iag = IagState::Done;
                if r.taken {
                    exit = Some(return_to);
                }
                break;
            }
            self.iag = IagState::OnPath(idx);
            if r.taken {
                exit = Some(return_to);
                break;
            }
            if idx - first == self.cfg.max_block_instrs {
                break;
            }
        }
        let last = self.records[idx - 1];
        let entry = FtqEntry {
            on_path: true,
            first,
            count: idx - first,
            info,
            mispredict,
            lines: lines_between(start, last.fall_through()),
            ready: None,
            decoded: 0,
        };
        Some((entry, start, exit))
    }

    fn cause(&self, r: &TraceRecord, ras_before: &Ras) -> Cause {
        match r.class {
            BranchClass::NonBranch | BranchClass::DirectUncond | BranchClass::Call => Cause::Decode,
            BranchClass::DirectCond => {
                if self.dir.predict(r.pc, Some(r.taken)) == r.taken {
                    Cause::Decode
                } else {
                    Cause::Execute
                }
            }
            BranchClass::Return => {
                if ras_before.peek() == Some(r.target) {
                    Cause::Decode
                } else {
                    Cause::Execute
                }
            }
            BranchClass::IndirectUncond | BranchClass::IndirectCall => Cause::Execute,
        }
    }

    fn form_wrong_path(&mut self, start: u64) -> Option<(FtqEntry, u64, Option<u64>)> {
        let mut pc = start;
        let mut count = 0;
        let mut exit = None;
        loop {
            let Some(d) = self.image.decode(pc, self.cfg.isa) else {
                self.iag = IagState::Halted;
                break;
            };
            let pred = self.predict(pc, None, false);
            count += 1;
            let end = pc + d.len as u64;
            ras_effect(&mut self.ras, pred.kind, end);
            if pred.taken {
                exit = Some(end);
                self.iag = match pred.target {
                    Some(t) => IagState::WrongPath(t),
                    None => IagState::Halted,
                };
                pc = end;
                break;
            }
            pc = end;
            self.iag = IagState::WrongPath(pc);
            if count == self.cfg.max_block_instrs {
                break;
            }
        }
        if count == 0 {
            return None;
        }
        let entry = FtqEntry {
            on_path: false,
            first: 0,
            count,
            info: Vec::new(),
            mispredict: None,
            lines: lines_between(start, pc),
            ready: None,
            decoded: 0,
        };
        Some((entry, start, exit))
    }

    fn fetch(&mut self) {
        if self.now < self.fetch_busy_until {
            return;
        }
        let Some(entry) = self.ftq.iter_mut().find(|e| e.ready.is_none()) else {
            return;
        };
        let kind = if entry.on_path {
            AccessKind::Demand
        } else {
            AccessKind::WrongPathPrefetch
        };
        let mut done = self.now;
        for &line in &entry.lines {
            if let Access::Miss { fill_completes_at } = self.l1i.access(line, kind, self.now) {
                done = done.max(fill_completes_at);
            }
        }
        entry.ready = Some(done + self.cfg.fetch_to_decode_depth);
        self.fetch_busy_until = if done > self.now { done } else { self.now + 1 };
    }
}
