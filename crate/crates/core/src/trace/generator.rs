//! Synthetic workloads with hot code co-located next to cold code.
//!
//! A program is a `main` loop calling level-0 hot functions, which call
//! deeper levels and finally tiny leaf stubs. Cold functions are laid out
//! between hot ones and are reached only through rarely-firing guarded call
//! sites, so their entries and returns sit in the shadow of hot lines.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TraceRecord;
use crate::error::{Error, Result};
use crate::isa::{svl, x86, BranchClass, IsaKind};
use crate::memory::CodeImage;
use crate::shadow::LINE_BYTES;

/// Relative weights of branch constructs. Every call implies one return, so
/// the dynamic mix is `cond : uncond : call : return = cond : uncond : call : call`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchMix {
    pub cond: f64,
    pub uncond: f64,
    pub call: f64,
}

impl BranchMix {
    /// Expected dynamic share of each class, indexed by `BranchClass::code()`.
    pub fn expected_shares(&self) -> [f64; 7] {
        let total = self.cond + self.uncond + 2.0 * self.call;
        let mut out = [0.0; 7];
        out[BranchClass::DirectCond.code() as usize] = self.cond / total;
        out[BranchClass::DirectUncond.code() as usize] = self.uncond / total;
        out[BranchClass::Call.code() as usize] = self.call / total;
        out[BranchClass::Return.code() as usize] = self.call / total;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub isa: IsaKind,
    /// Hot plus cold functions, excluding `main` and leaf stubs.
    pub functions: usize,
    pub hot_fraction: f64,
    /// Cold functions placed after each hot function.
    pub colocation: usize,
    pub instrs_per_function: usize,
    /// Weight of each call level; hot functions are spread across levels.
    pub call_depth: Vec<f64>,
    pub branch_mix: BranchMix,
    /// Probability that a hot conditional skip is taken.
    pub cond_taken: f64,
    /// Probability that a guarded cold call site fires.
    pub cold_call_prob: f64,
    pub instructions: usize,
    pub seed: u64,
    pub base: u64,
    /// Pad so no instruction straddles a line boundary.
    pub no_line_crossing: bool,
    /// Start every branch target on a line and end every branch on one.
    pub line_aligned_blocks: bool,
}

pub const PRESETS: [&str; 3] = ["hot-cold", "no-shadow", "return-heavy"];

impl Default for GenParams {
    fn default() -> Self {
        Self::preset("hot-cold", IsaKind::Svl).expect("builtin preset")
    }
}

impl GenParams {
    /// SVL presets keep instructions within a line; x86 code is packed.
    pub fn preset(name: &str, isa: IsaKind) -> Option<Self> {
        let hot_cold = GenParams {
            isa,
            functions: 1200,
            hot_fraction: 0.25,
            colocation: 3,
            instrs_per_function: 24,
            call_depth: vec![0.3, 0.4, 0.3],
            branch_mix: BranchMix {
                cond: 0.4,
                uncond: 0.2,
                call: 0.4,
            },
            cond_taken: 0.3,
            cold_call_prob: 0.1,
            instructions: 500_000,
            seed: 7,
            base: 0x40_0000,
            no_line_crossing: isa == IsaKind::Svl,
            line_aligned_blocks: false,
        };
        match name {
            "hot-cold" => Some(hot_cold),
            "no-shadow" => Some(GenParams {
                functions: 200,
                hot_fraction: 1.0,
                colocation: 0,
                line_aligned_blocks: true,
                ..hot_cold
            }),
            "return-heavy" => Some(GenParams {
                functions: 1600,
                hot_fraction: 0.5,
                colocation: 3,
                instrs_per_function: 16,
                call_depth: vec![0.2, 0.3, 0.3, 0.2],
                branch_mix: BranchMix {
                    cond: 0.3,
                    uncond: 0.1,
                    call: 0.6,
                },
                ..hot_cold
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        if self.functions == 0 || self.instrs_per_function == 0 || self.instructions == 0 {
            return bad(
                "function count, instructions per function and instruction count must be >= 1"
                    .into(),
            );
        }
        for (name, v) in [
            ("hot_fraction", self.hot_fraction),
            ("cond_taken", self.cond_taken),
            ("cold_call_prob", self.cold_call_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        let m = self.branch_mix;
        if [m.cond, m.uncond, m.call]
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
            || m.cond + m.uncond + m.call <= 0.0
        {
            return bad("branch mix weights must be non-negative with a positive sum".into());
        }
        if m.call <= 0.0 {
            return bad(
                "the call weight must be positive: every hot function is entered by a call".into(),
            );
        }
        if self.call_depth.is_empty()
            || self.call_depth.iter().any(|w| !w.is_finite() || *w < 0.0)
            || self.call_depth[0] <= 0.0
        {
            return bad("call depth weights must be non-negative with a positive level 0".into());
        }
        let hot = self.hot_count();
        if hot == 0 {
            return bad(format!(
                "hot_fraction {} of {} functions leaves no hot function",
                self.hot_fraction, self.functions
            ));
        }
        if self.colocation > 0 && hot == self.functions {
            return bad(format!(
                "co-location {} needs cold functions, but all are hot",
                self.colocation
            ));
        }
        if self.line_aligned_blocks && self.colocation > 0 {
            return bad("line-aligned blocks cannot co-locate cold code".into());
        }
        Ok(())
    }

    fn hot_count(&self) -> usize {
        ((self.functions as f64 * self.hot_fraction).round() as usize).min(self.functions)
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Plain,
    /// Skips forward to a local instruction index when taken.
    Cond {
        target: usize,
        p_taken: f64,
    },
    Jmp {
        target: usize,
    },
    Call {
        func: usize,
    },
    Ret,
    /// `main`'s back edge.
    Loop,
}

#[derive(Debug, Clone)]
struct Ins {
    len: u8,
    op: Op,
    /// Encoding of plain instructions; branches are encoded after layout.
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
struct Func {
    ins: Vec<Ins>,
}

struct Encoder {
    isa: IsaKind,
}

impl Encoder {
    fn branch_len(&self, op: Op) -> u8 {
        match (self.isa, op) {
            (_, Op::Plain) => unreachable!("plain lengths are chosen"),
            (_, Op::Ret) => 1,
            (IsaKind::Svl, Op::Cond { .. }) => 3,
            (IsaKind::X86Subset, Op::Cond { .. }) => 6,
            (_, Op::Jmp { .. } | Op::Loop | Op::Call { .. }) => 5,
        }
    }

    fn max_plain(&self) -> u8 {
        match self.isa {
            IsaKind::Svl => 8,
            IsaKind::X86Subset => 5,
        }
    }

    fn random_plain_len(&self, rng: &mut ChaCha8Rng) -> u8 {
        match self.isa {
            IsaKind::Svl => rng.gen_range(3..=8),
            IsaKind::X86Subset => *[1u8, 2, 2, 3, 3, 3, 4, 5, 5].choose(rng).unwrap(),
        }
    }

    fn plain(&self, len: u8, rng: &mut ChaCha8Rng) -> Ins {
        let bytes = match self.isa {
            IsaKind::Svl => {
                svl::encode::non_branch(len, rng.gen_range(0..=0x0D), rng.gen_range(0xF0..=0xFF))
            }
            IsaKind::X86Subset => {
                let r = rng.gen_range(0..8u8);
                let s = rng.gen_range(0..8u8);
                match len {
                    1 => match rng.gen_range(0..3) {
                        0 => x86::encode::push(r),
                        1 => x86::encode::pop(r),
                        _ => x86::encode::nop(),
                    },
                    2 => {
                        if rng.gen_bool(0.5) {
                            x86::encode::mov_rr(r, s)
                        } else {
                            x86::encode::xor_rr(r, s)
                        }
                    }
                    3 => {
                        if rng.gen_bool(0.5) && r != 4 {
                            x86::encode::store_disp8(r, s, rng.gen_range(-32..32i8) * 4)
                        } else {
                            x86::encode::add_ri8(r, rng.gen_range(1..64))
                        }
                    }
                    4 => x86::encode::nop4(),
                    5 => x86::encode::mov_ri(r, rng.gen_range(0..0x1_0000)),
                    _ => unreachable!("x86 plain length {len}"),
                }
            }
        };
        debug_assert_eq!(bytes.len(), len as usize);
        Ins {
            len,
            op: Op::Plain,
            bytes,
        }
    }

    fn branch(&self, op: Op) -> Ins {
        Ins {
            len: self.branch_len(op),
            op,
            bytes: Vec::new(),
        }
    }

    fn encode_branch(&self, op: Op, pc: u64, len: u8, target: u64) -> Vec<u8> {
        let disp = target.wrapping_sub(pc + len as u64) as i64;
        let d32 = i32::try_from(disp).expect("image fits a 32-bit displacement");
        match (self.isa, op) {
            (IsaKind::Svl, Op::Cond { .. }) => {
                svl::encode::cond(i16::try_from(disp).expect("conditional skip fits 16 bits"))
            }
            (IsaKind::Svl, Op::Jmp { .. } | Op::Loop) => svl::encode::jmp(d32),
            (IsaKind::Svl, Op::Call { .. }) => svl::encode::call(d32),
            (IsaKind::Svl, Op::Ret) => svl::encode::ret(),
            (IsaKind::X86Subset, Op::Cond { .. }) => x86::encode::jcc32(0x5, d32),
            (IsaKind::X86Subset, Op::Jmp { .. } | Op::Loop) => x86::encode::jmp32(d32),
            (IsaKind::X86Subset, Op::Call { .. }) => x86::encode::call32(d32),
            (IsaKind::X86Subset, Op::Ret) => x86::encode::ret(),
            (_, Op::Plain) => unreachable!(),
        }
    }
}

/// Splits `total` into integer counts proportional to `weights`, carrying
/// the rounding error in `carry` so repeated calls stay proportional.
fn apportion(total: usize, weights: &[f64], carry: &mut [f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    for (w, c) in weights.iter().zip(carry.iter_mut()) {
        let exact = total as f64 * w / sum + *c;
        let n = exact.floor().max(0.0);
        *c = exact - n;
        counts.push(n as usize);
    }
    let mut assigned: usize = counts.iter().sum();
    while assigned < total {
        let i = (0..carry.len())
            .max_by(|&a, &b| carry[a].total_cmp(&carry[b]))
            .unwrap();
        counts[i] += 1;
        carry[i] -= 1.0;
        assigned += 1;
    }
    while assigned > total {
        let i = (0..carry.len())
            .filter(|&i| counts[i] > 0)
            .min_by(|&a, &b| carry[a].total_cmp(&carry[b]))
            .unwrap();
        counts[i] -= 1;
        carry[i] += 1.0;
        assigned -= 1;
    }
    counts
}

/// Fractional (cond, uncond, call) slots per hot function whose expected
/// dynamic mix equals the requested weights.
///
/// Per main-loop iteration, with `n0` level-0 functions, fan-out `k` and
/// `h = 1 + k + ... + k^(levels-1)`, the hot functions run `H = n0 h` times.
/// Every run executes each slot once and `gamma` cold guards, each firing
/// with probability `q` into a call, a return and a jump back. `main` adds
/// `n0` calls and one back edge. Normalised by `n0 h`:
///
///   cond   = c + gamma
///   uncond = u + gamma q + 1 / (n0 h)
///   call   = 1 / h + k + gamma q
///
/// `c` and `u` follow from `k` through the weight ratios, and `c + u + k`
/// grows with `k`, so `k` is found by bisection.
fn slot_weights(
    p: &GenParams,
    n0: usize,
    levels: usize,
    gamma: f64,
    slots: usize,
) -> Result<[f64; 3]> {
    let m = p.branch_mix;
    let q = p.cold_call_prob;
    let n0 = n0 as f64;
    let solve = |k: f64| {
        let h: f64 = (0..levels).map(|i| k.powi(i as i32)).sum();
        let call = 1.0 / h + k + gamma * q;
        let c = m.cond / m.call * call - gamma;
        let u = m.uncond / m.call * call - gamma * q - 1.0 / (n0 * h);
        (c, u)
    };
    let excess = |k: f64| {
        let (c, u) = solve(k);
        c + u + k - slots as f64
    };
    let infeasible = |why: &str| {
        Err(Error::Params(format!(
            "branch mix {:?} is unreachable with {slots} branch slots per function: {why}",
            m
        )))
    };
    if excess(0.0) > 0.0 {
        return infeasible("too few slots for the share of non-call branches");
    }
    let (mut lo, mut hi) = (0.0, slots as f64);
    if excess(hi) < 0.0 {
        return infeasible("too many slots for the share of calls");
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let (c, u) = solve(k);
    if c < 0.0 || u < 0.0 {
        return infeasible("cold call sites alone exceed the requested share");
    }
    Ok([c, u, k])
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Cond,
    Uncond,
    Call,
}

struct Builder<'a> {
    p: &'a GenParams,
    enc: Encoder,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn plains(&mut self, f: &mut Func, n: usize) {
        for _ in 0..n {
            let len = self.enc.random_plain_len(&mut self.rng);
            f.ins.push(self.enc.plain(len, &mut self.rng));
        }
    }

    /// `Cond` over `body_len` plain instructions.
    fn guarded(&mut self, f: &mut Func, p_taken: f64, body_len: usize) {
        let at = f.ins.len();
        f.ins.push(self.enc.branch(Op::Cond { target: 0, p_taken }));
        self.plains(f, body_len);
        let target = f.ins.len();
        f.ins[at].op = Op::Cond { target, p_taken };
    }

    fn hot_function(&mut self, slots: &[Slot], callees: &[usize], cold_sites: &[usize]) -> Func {
        let mut f = Func::default();
        self.plains(&mut f, 1);
        let mut callees = callees.iter();
        let mut sites: Vec<Option<usize>> = slots.iter().map(|_| None).collect();
        for &c in cold_sites {
            let k = self.rng.gen_range(0..sites.len().max(1));
            if k < sites.len() && sites[k].is_none() {
                sites[k] = Some(c);
            } else {
                sites.push(Some(c));
            }
        }
        // Guards branch to out-of-line call blocks placed after the return.
        let mut out_of_line = Vec::new();
        for (k, site) in sites.iter().enumerate() {
            if let Some(cold) = site {
                self.plains(&mut f, 1);
                out_of_line.push((f.ins.len(), *cold));
                f.ins.push(self.enc.branch(Op::Cond {
                    target: 0,
                    p_taken: self.p.cold_call_prob,
                }));
            }
            let Some(&slot) = slots.get(k) else { continue };
            let lead = self.rng.gen_range(1..=2);
            self.plains(&mut f, lead);
            match slot {
                Slot::Cond => {
                    let body = self.rng.gen_range(1..=3);
                    self.guarded(&mut f, self.p.cond_taken, body);
                }
                Slot::Uncond => {
                    let at = f.ins.len();
                    f.ins.push(self.enc.branch(Op::Jmp { target: 0 }));
                    let dead = self.rng.gen_range(1..=2);
                    self.plains(&mut f, dead);
                    let target = f.ins.len();
                    f.ins[at].op = Op::Jmp { target };
                }
                Slot::Call => {
                    let func = *callees.next().expect("one callee per call slot");
                    f.ins.push(self.enc.branch(Op::Call { func }));
                }
            }
        }
        self.plains(&mut f, 1);
        f.ins.push(self.enc.branch(Op::Ret));
        for (guard, cold) in out_of_line {
            f.ins[guard].op = Op::Cond {
                target: f.ins.len(),
                p_taken: self.p.cold_call_prob,
            };
            f.ins.push(self.enc.branch(Op::Call { func: cold }));
            f.ins.push(self.enc.branch(Op::Jmp { target: guard + 1 }));
        }
        f
    }

    fn cold_function(&mut self) -> Func {
        let mut f = Func::default();
        let n = self.rng.gen_range(1..=3);
        self.plains(&mut f, n);
        f.ins.push(self.enc.branch(Op::Ret));
        f
    }

    fn stub(&mut self) -> Func {
        let mut f = Func::default();
        self.plains(&mut f, 1);
        f.ins.push(self.enc.branch(Op::Ret));
        f
    }

    fn main(&mut self, level0: &[usize]) -> Func {
        let mut f = Func::default();
        for &func in level0 {
            self.plains(&mut f, 1);
            f.ins.push(self.enc.branch(Op::Call { func }));
        }
        self.plains(&mut f, 1);
        f.ins.push(self.enc.branch(Op::Loop));
        f
    }

    fn pad(&mut self, out: &mut Vec<Ins>, mut gap: usize) {
        let max = self.enc.max_plain() as usize;
        while gap > 0 {
            let len = if gap > max {
                // Leave a remainder a single instruction can fill.
                let hi = max.min(gap - 1);
                self.rng.gen_range(1..=hi)
            } else {
                gap
            };
            out.push(self.enc.plain(len as u8, &mut self.rng));
            gap -= len;
        }
    }

    /// Inserts padding for the line constraints and remaps local targets.
    fn lay_out(&mut self, f: Func, start: u64, targets: &[bool]) -> Func {
        let line = LINE_BYTES as u64;
        let mut out: Vec<Ins> = Vec::with_capacity(f.ins.len());
        let mut remap = vec![0usize; f.ins.len() + 1];
        let mut at = start;
        for (i, ins) in f.ins.into_iter().enumerate() {
            let len = ins.len as u64;
            let off = at % line;
            let mut gap = 0;
            if self.p.line_aligned_blocks {
                if targets[i] && off != 0 {
                    gap = line - off;
                }
                if !matches!(ins.op, Op::Plain) {
                    let end = (off + gap + len) % line;
                    if end != 0 {
                        gap += line - end;
                    }
                }
            } else if self.p.no_line_crossing && off + len > line {
                gap = line - off;
            }
            let before = out.len();
            self.pad(&mut out, gap as usize);
            at += out[before..].iter().map(|x| x.len as u64).sum::<u64>();
            remap[i] = out.len();
            at += len;
            out.push(ins);
        }
        let end = remap.len() - 1;
        remap[end] = out.len();
        for ins in &mut out {
            ins.op = match ins.op {
                Op::Cond { target, p_taken } => Op::Cond {
                    target: remap[target],
                    p_taken,
                },
                Op::Jmp { target } => Op::Jmp {
                    target: remap[target],
                },
                op => op,
            };
        }
        Func { ins: out }
    }
}

/// Local instruction indices that are branch targets.
fn target_set(f: &Func) -> Vec<bool> {
    let mut t = vec![false; f.ins.len() + 1];
    t[0] = true;
    for (i, ins) in f.ins.iter().enumerate() {
        match ins.op {
            Op::Cond { target, .. } | Op::Jmp { target } => t[target] = true,
            Op::Call { .. } => t[i + 1] = true,
            _ => {}
        }
    }
    t
}

pub fn generate_synthetic(p: &GenParams) -> Result<(CodeImage, Vec<TraceRecord>)> {
    p.validate()?;
    let mut b = Builder {
        p,
        enc: Encoder { isa: p.isa },
        rng: ChaCha8Rng::seed_from_u64(p.seed),
    };

    let hot = p.hot_count();
    let cold = p.functions - hot;
    let levels = p.call_depth.len();
    let mut level_carry = vec![0.0; levels];
    let mut per_level = apportion(hot, &p.call_depth, &mut level_carry);
    if per_level[0] == 0 {
        let big = (0..levels).max_by_key(|&l| per_level[l]).unwrap();
        per_level[big] -= 1;
        per_level[0] += 1;
    }
    let stubs = (hot / 8).max(1);

    // Function ids: 0 = main, then hot by level, then stubs, then cold.
    let mut level_ids: Vec<Vec<usize>> = Vec::with_capacity(levels);
    let mut next = 1;
    for &n in &per_level {
        level_ids.push((next..next + n).collect());
        next += n;
    }
    let stub_ids: Vec<usize> = (next..next + stubs).collect();
    next += stubs;
    let cold_ids: Vec<usize> = (next..next + cold).collect();
    let total = next + cold;

    let mut hot_ids: Vec<usize> = level_ids.iter().flatten().copied().collect();
    let mut cold_sites: Vec<Vec<usize>> = vec![Vec::new(); total];
    for &c in &cold_ids {
        let host = *hot_ids.choose(&mut b.rng).unwrap();
        cold_sites[host].push(c);
    }

    let slots_per_fn = ((p.instrs_per_function.saturating_sub(2)) as f64 / 3.5)
        .round()
        .max(1.0) as usize;
    let active = per_level.iter().filter(|&&n| n > 0).count();
    let weights = slot_weights(
        p,
        per_level[0],
        active,
        cold as f64 / hot as f64,
        slots_per_fn,
    )?;
    let mut funcs: Vec<Func> = vec![Func::default(); total];
    for (lvl, ids) in level_ids.iter().enumerate() {
        // Invocation counts differ by level, so each level gets the exact mix.
        let mut slot_carry = vec![0.0; 3];
        for &id in ids {
            let counts = apportion(slots_per_fn, &weights, &mut slot_carry);
            let mut slots: Vec<Slot> = Vec::with_capacity(slots_per_fn);
            slots.extend(std::iter::repeat(Slot::Cond).take(counts[0]));
            slots.extend(std::iter::repeat(Slot::Uncond).take(counts[1]));
            slots.extend(std::iter::repeat(Slot::Call).take(counts[2]));
            slots.shuffle(&mut b.rng);
            let pool = level_ids[lvl + 1..]
                .iter()
                .find(|l| !l.is_empty())
                .unwrap_or(&stub_ids);
            let callees: Vec<usize> = (0..counts[2])
                .map(|_| *pool.choose(&mut b.rng).unwrap())
                .collect();
            funcs[id] = b.hot_function(&slots, &callees, &cold_sites[id]);
        }
    }
    for &id in &stub_ids {
        funcs[id] = b.stub();
    }
    for &id in &cold_ids {
        funcs[id] = b.cold_function();
    }
    let mut level0 = level_ids[0].clone();
    level0.shuffle(&mut b.rng);
    funcs[0] = b.main(&level0);

    // Layout: main, then each hot function or stub followed by its cold neighbours.
    hot_ids.extend(&stub_ids);
    hot_ids.shuffle(&mut b.rng);
    let mut order = vec![0];
    let mut cold_iter = cold_ids.iter();
    for &h in &hot_ids {
        order.push(h);
        order.extend(cold_iter.by_ref().take(p.colocation));
    }
    order.extend(cold_iter);

    let mut addr = vec![0u64; total];
    let mut at = p.base;
    for &id in &order {
        let f = std::mem::take(&mut funcs[id]);
        let targets = target_set(&f);
        let f = b.lay_out(f, at, &targets);
        addr[id] = at;
        at += f.ins.iter().map(|i| i.len as u64).sum::<u64>();
        funcs[id] = f;
    }

    // Per-instruction addresses, then encode branches.
    let pcs: Vec<Vec<u64>> = funcs
        .iter()
        .zip(&addr)
        .map(|(f, &base)| {
            let mut pc = base;
            let mut v = Vec::with_capacity(f.ins.len());
            for ins in &f.ins {
                v.push(pc);
                pc += ins.len as u64;
            }
            v
        })
        .collect();
    let target_of = |f: usize, op: Op| -> u64 {
        match op {
            Op::Cond { target, .. } | Op::Jmp { target } => pcs[f][target],
            Op::Call { func } => addr[func],
            Op::Loop => addr[0],
            Op::Ret | Op::Plain => 0,
        }
    };
    let mut bytes = Vec::with_capacity((at - p.base) as usize);
    for &id in &order {
        for (i, ins) in funcs[id].ins.iter().enumerate() {
            if matches!(ins.op, Op::Plain) {
                bytes.extend_from_slice(&ins.bytes);
            } else {
                bytes.extend(b.enc.encode_branch(
                    ins.op,
                    pcs[id][i],
                    ins.len,
                    target_of(id, ins.op),
                ));
            }
        }
    }
    let mut image = CodeImage::new();
    image.add_segment(p.base, bytes)?;

    let mut run_rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5EED_7EA5_0000_0001);
    let mut records = Vec::with_capacity(p.instructions);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let (mut f, mut i) = (0usize, 0usize);
    while records.len() < p.instructions {
        let ins = &funcs[f].ins[i];
        let pc = pcs[f][i];
        let op = ins.op;
        match op {
            Op::Plain => {
                records.push(TraceRecord::non_branch(pc, ins.len));
                i += 1;
            }
            Op::Cond { target, p_taken } => {
                let taken = run_rng.gen_bool(p_taken);
                records.push(TraceRecord::branch(
                    pc,
                    ins.len,
                    BranchClass::DirectCond,
                    target_of(f, op),
                    taken,
                ));
                i = if taken { target } else { i + 1 };
            }
            Op::Jmp { target } => {
                records.push(TraceRecord::branch(
                    pc,
                    ins.len,
                    BranchClass::DirectUncond,
                    target_of(f, op),
                    true,
                ));
                i = target;
            }
            Op::Loop => {
                records.push(TraceRecord::branch(
                    pc,
                    ins.len,
                    BranchClass::DirectUncond,
                    addr[0],
                    true,
                ));
                i = 0;
            }
            Op::Call { func } => {
                records.push(TraceRecord::branch(
                    pc,
                    ins.len,
                    BranchClass::Call,
                    addr[func],
                    true,
                ));
                stack.push((f, i + 1));
                (f, i) = (func, 0);
            }
            Op::Ret => {
                let (rf, ri) = stack.pop().expect("main never returns");
                records.push(TraceRecord::branch(
                    pc,
                    ins.len,
                    BranchClass::Return,
                    pcs[rf][ri],
                    true,
                ));
                (f, i) = (rf, ri);
            }
        }
    }
    Ok((image, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::validate_trace;

    fn small_for(preset: &str, isa: IsaKind) -> GenParams {
        GenParams {
            instructions: 20_000,
            ..GenParams::preset(preset, isa).unwrap()
        }
    }

    fn small(preset: &str) -> GenParams {
        small_for(preset, IsaKind::Svl)
    }

    #[test]
    fn presets_validate_and_pass_the_validator() {
        for name in PRESETS {
            for isa in [IsaKind::Svl, IsaKind::X86Subset] {
                let p = small_for(name, isa);
                let (img, recs) = generate_synthetic(&p).unwrap();
                assert_eq!(recs.len(), p.instructions);
                let v = validate_trace(&img, &recs, isa);
                assert!(
                    v.is_empty(),
                    "{name}/{}: {:?}",
                    isa.name(),
                    &v[..v.len().min(5)]
                );
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let p = small("hot-cold");
        let a = generate_synthetic(&p).unwrap();
        let b = generate_synthetic(&p).unwrap();
        assert_eq!(a.0.to_json(), b.0.to_json());
        assert_eq!(a.1, b.1);
        let c = generate_synthetic(&GenParams { seed: 8, ..p }).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn infeasible_layouts_are_rejected() {
        let p = GenParams {
            hot_fraction: 0.0,
            ..small("hot-cold")
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Params(_))));
        let p = GenParams {
            hot_fraction: 1.0,
            colocation: 2,
            ..small("hot-cold")
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Params(_))));
        let p = GenParams {
            functions: 0,
            ..small("hot-cold")
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Params(_))));
        let p = GenParams {
            cold_call_prob: 1.5,
            ..small("hot-cold")
        };
        assert!(matches!(generate_synthetic(&p), Err(Error::Params(_))));
    }

    #[test]
    fn no_line_crossing_holds() {
        let (img, _) = generate_synthetic(&small("hot-cold")).unwrap();
        for (pc, d) in img.linear_sweep(IsaKind::Svl) {
            assert_eq!(
                pc / 64,
                (pc + d.len as u64 - 1) / 64,
                "instruction at {pc:#x} crosses a line"
            );
        }
    }

    #[test]
    fn aligned_blocks_put_branches_at_line_ends() {
        let (img, recs) = generate_synthetic(&small("no-shadow")).unwrap();
        for r in recs.iter().filter(|r| r.class.is_branch()) {
            assert_eq!(r.fall_through() % 64, 0, "branch at {:#x}", r.pc);
            assert_eq!(r.target % 64, 0, "target of {:#x}", r.pc);
        }
        assert!(!img.linear_sweep(IsaKind::Svl).is_empty());
    }

    #[test]
    fn apportion_is_exact_over_time() {
        let mut carry = vec![0.0; 3];
        let mut sums = [0usize; 3];
        for _ in 0..1000 {
            let c = apportion(7, &[0.4, 0.2, 0.4], &mut carry);
            assert_eq!(c.iter().sum::<usize>(), 7);
            for k in 0..3 {
                sums[k] += c[k];
            }
        }
        assert_eq!(sums, [2800, 1400, 2800]);
    }
}
