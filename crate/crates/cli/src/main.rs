//! `skia`: generate synthetic workloads, simulate the front end with and
//! without shadow branch decoding, sweep structure sizes and inspect single
//! cache lines.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use skia_core::isa::IsaKind;
use skia_core::memory::CodeImage;
use skia_core::predictors::{
    format_audit, iso_storage_btb_entries, StructureAudit, BTB_LAYOUT, RSBB_LAYOUT, USBB_LAYOUT,
};
use skia_core::shadow::LINE_BYTES;
use skia_core::sim::{analyze, run, to_csv, RunReport, SbdMode, SimConfig};
use skia_core::trace::{generate_synthetic, read_trace, write_trace, GenParams, PRESETS};

const SEED_ENV: &str = "SKIA_SEED";

#[derive(Parser)]
#[command(
    name = "skia",
    version,
    about = "Shadow branch decoding front-end simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write a JSON report and a CSV row.
    Simulate {
        #[command(flatten)]
        input: SimInput,
        #[arg(long, value_parser = parse_sbd)]
        sbd: Option<SbdMode>,
        /// Output path prefix; writes PREFIX.json and PREFIX.csv.
        #[arg(long)]
        out: PathBuf,
        /// Row label; defaults to the shadow decoding mode.
        #[arg(long)]
        label: Option<String>,
    },
    /// Break down BTB misses of a run without shadow decoding.
    Analyze {
        #[command(flatten)]
        input: SimInput,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic code image and trace.
    Gen {
        #[arg(long, default_value = "hot-cold")]
        preset: String,
        #[arg(long, value_parser = parse_isa, default_value = "svl")]
        isa: IsaKind,
        /// JSON object whose fields override the preset.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        instructions: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path prefix; writes PREFIX.img.json and PREFIX.sbtrace.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one configuration per value of a structure size.
    Sweep {
        #[command(flatten)]
        input: SimInput,
        #[arg(long, value_parser = parse_sbd)]
        sbd: Option<SbdMode>,
        #[arg(long, value_enum)]
        vary: Axis,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<usize>,
        /// Resize the other shadow buffer so total SBB bits stay at the
        /// configured amount.
        #[arg(long)]
        hold_sbb_bits: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show how the shadow decoder sees one cache line.
    DecodeLine {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_parser = parse_u64)]
        line_addr: u64,
        #[arg(long)]
        entry_offset: u8,
        #[arg(long)]
        tail_start: Option<u8>,
        #[arg(long, value_parser = parse_isa, default_value = "x86")]
        isa: IsaKind,
        #[arg(long, default_value_t = skia_core::shadow::DEFAULT_MAX_VALID_PATHS)]
        max_valid_paths: usize,
    },
    /// Print per-structure storage for the configured geometry.
    AuditBits {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimInput {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the ISA named in the config.
    #[arg(long, value_parser = parse_isa)]
    isa: Option<IsaKind>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Axis {
    UsbbEntries,
    RsbbEntries,
    BtbEntries,
}

fn parse_sbd(s: &str) -> Result<SbdMode, String> {
    s.parse()
}

fn parse_isa(s: &str) -> Result<IsaKind, String> {
    s.parse()
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("bad address `{s}`: {e}"))
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("{SEED_ENV}=`{v}` is not a seed: {e}")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn load_config(path: Option<&Path>, isa: Option<IsaKind>) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(isa) = isa {
        cfg.isa = isa;
    }
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    Ok(cfg)
}

struct Loaded {
    image: CodeImage,
    records: Vec<skia_core::trace::TraceRecord>,
    cfg: SimConfig,
}

fn load_input(input: &SimInput) -> Result<Loaded> {
    Ok(Loaded {
        image: CodeImage::load(&input.image)?,
        records: read_trace(&input.trace)?,
        cfg: load_config(input.config.as_deref(), input.isa)?,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn simulate(
    input: &SimInput,
    sbd: Option<SbdMode>,
    out: &Path,
    label: Option<String>,
) -> Result<()> {
    let mut l = load_input(input)?;
    if let Some(mode) = sbd {
        l.cfg.sbd_mode = mode;
    }
    let stats = run(&l.image, &l.records, &l.cfg)?;
    let label = label.unwrap_or_else(|| l.cfg.sbd_mode.name().to_string());
    let report = RunReport::new(label, &l.cfg, stats)?;
    write(&with_suffix(out, ".json"), &(report.to_json() + "\n"))?;
    write(
        &with_suffix(out, ".csv"),
        &to_csv(std::slice::from_ref(&report)),
    )?;
    Ok(())
}

fn cmd_analyze(input: &SimInput, out: Option<&Path>) -> Result<()> {
    let l = load_input(input)?;
    let report = analyze(&l.image, &l.records, &l.cfg)?;
    let text = report.to_json() + "\n";
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn merge(base: &mut serde_json::Value, overrides: serde_json::Value) -> Result<()> {
    let (Some(b), serde_json::Value::Object(o)) = (base.as_object_mut(), overrides) else {
        bail!("generator parameter overrides must be a JSON object");
    };
    for (k, v) in o {
        b.insert(k, v);
    }
    Ok(())
}

fn gen(
    preset: &str,
    isa: IsaKind,
    params: Option<&Path>,
    instructions: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let base = GenParams::preset(preset, isa).ok_or_else(|| {
        anyhow!(
            "unknown preset `{preset}` (expected one of {})",
            PRESETS.join(", ")
        )
    })?;
    let mut p = base;
    if let Some(path) = params {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut value = serde_json::to_value(&p)?;
        merge(&mut value, serde_json::from_str(&text)?)?;
        p = serde_json::from_value(value)
            .map_err(|e| skia_core::Error::Params(format!("{}: {e}", path.display())))?;
    }
    if let Some(s) = env_seed()? {
        p.seed = s;
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    if let Some(n) = instructions {
        p.instructions = n;
    }
    let (image, records) = generate_synthetic(&p)?;
    image.save(&with_suffix(out, ".img.json"))?;
    write_trace(&with_suffix(out, ".sbtrace"), &records)?;
    Ok(())
}

fn sweep(
    input: &SimInput,
    sbd: Option<SbdMode>,
    axis: Axis,
    values: &[usize],
    hold_sbb_bits: bool,
    out: Option<&Path>,
) -> Result<()> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut l = load_input(input)?;
    if let Some(mode) = sbd {
        l.cfg.sbd_mode = mode;
    }
    let budget = l.cfg.usbb_entries as u64 * USBB_LAYOUT.bits() as u64
        + l.cfg.rsbb_entries as u64 * RSBB_LAYOUT.bits() as u64;
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = l.cfg.clone();
            let fill = |bits_left: u64, layout: &skia_core::predictors::EntryLayout| {
                let n = (bits_left / layout.bits() as u64) as usize;
                n / c.ways * c.ways
            };
            match axis {
                Axis::BtbEntries => c.btb_entries = v,
                Axis::UsbbEntries => {
                    c.usbb_entries = v;
                    if hold_sbb_bits {
                        let used = v as u64 * USBB_LAYOUT.bits() as u64;
                        c.rsbb_entries = fill(budget.saturating_sub(used), &RSBB_LAYOUT);
                    }
                }
                Axis::RsbbEntries => {
                    c.rsbb_entries = v;
                    if hold_sbb_bits {
                        let used = v as u64 * RSBB_LAYOUT.bits() as u64;
                        c.usbb_entries = fill(budget.saturating_sub(used), &USBB_LAYOUT);
                    }
                }
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, v)| {
            let stats = run(&l.image, &l.records, c)?;
            Ok(RunReport::new(v.to_string(), c, stats)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = to_csv(&reports);
    match out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn decode_line(
    image: &Path,
    line_addr: u64,
    entry_offset: u8,
    tail_start: Option<u8>,
    isa: IsaKind,
    max_valid_paths: usize,
) -> Result<()> {
    if line_addr % LINE_BYTES as u64 != 0 {
        bail!("line address {line_addr:#x} is not 64-byte aligned");
    }
    if entry_offset as usize >= LINE_BYTES {
        bail!("entry offset {entry_offset} is outside the line");
    }
    if let Some(t) = tail_start.filter(|&t| t as usize > LINE_BYTES) {
        bail!("tail start {t} is outside the line");
    }
    let image = CodeImage::load(image)?;
    let bytes = image.read_line(line_addr, isa.filler_byte())?;
    print!(
        "{}",
        report::decode_line_text(
            line_addr,
            bytes,
            entry_offset,
            tail_start,
            isa,
            max_valid_paths
        )
    );
    Ok(())
}

fn audit_bits(config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config, None)?;
    let audits = [
        StructureAudit::new(&BTB_LAYOUT, cfg.btb_entries, cfg.ways),
        StructureAudit::new(&USBB_LAYOUT, cfg.usbb_entries, cfg.ways),
        StructureAudit::new(&RSBB_LAYOUT, cfg.rsbb_entries, cfg.ways),
    ];
    print!("{}", format_audit(&audits));
    println!(
        "iso-storage BTB entries: {}",
        iso_storage_btb_entries(
            cfg.btb_entries,
            cfg.usbb_entries,
            cfg.rsbb_entries,
            cfg.ways
        )
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            input,
            sbd,
            out,
            label,
        } => simulate(&input, sbd, &out, label),
        Command::Analyze { input, out } => cmd_analyze(&input, out.as_deref()),
        Command::Gen {
            preset,
            isa,
            params,
            instructions,
            seed,
            out,
        } => gen(&preset, isa, params.as_deref(), instructions, seed, &out),
        Command::Sweep {
            input,
            sbd,
            vary,
            values,
            hold_sbb_bits,
            out,
        } => sweep(&input, sbd, vary, &values, hold_sbb_bits, out.as_deref()),
        Command::DecodeLine {
            image,
            line_addr,
            entry_offset,
            tail_start,
            isa,
            max_valid_paths,
        } => decode_line(
            &image,
            line_addr,
            entry_offset,
            tail_start,
            isa,
            max_valid_paths,
        ),
        Command::AuditBits { config } => audit_bits(config.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err.chain().any(|e| {
        e.downcast_ref::<skia_core::Error>()
            .is_some_and(|e| e.is_internal())
    });
    if internal {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}
