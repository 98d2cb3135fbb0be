use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isa::IsaKind;
use crate::predictors::DirectionConfig;
use crate::shadow::{IndexPolicy, DEFAULT_MAX_VALID_PATHS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbdMode {
    #[default]
    Off,
    #[serde(alias = "head")]
    HeadOnly,
    #[serde(alias = "tail")]
    TailOnly,
    Both,
}

impl SbdMode {
    pub const ALL: [SbdMode; 4] = [
        SbdMode::Off,
        SbdMode::HeadOnly,
        SbdMode::TailOnly,
        SbdMode::Both,
    ];

    pub fn head(self) -> bool {
        matches!(self, SbdMode::HeadOnly | SbdMode::Both)
    }

    pub fn tail(self) -> bool {
        matches!(self, SbdMode::TailOnly | SbdMode::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            SbdMode::Off => "off",
            SbdMode::HeadOnly => "head",
            SbdMode::TailOnly => "tail",
            SbdMode::Both => "both",
        }
    }
}

impl std::str::FromStr for SbdMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" => Ok(SbdMode::Off),
            "head" | "head_only" => Ok(SbdMode::HeadOnly),
            "tail" | "tail_only" => Ok(SbdMode::TailOnly),
            "both" => Ok(SbdMode::Both),
            _ => Err(format!(
                "unknown sbd mode `{s}` (expected off, head, tail or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub isa: IsaKind,
    pub btb_entries: usize,
    pub usbb_entries: usize,
    pub rsbb_entries: usize,
    /// Associativity of the BTB and both shadow buffers.
    pub ways: usize,
    pub ras_depth: usize,
    pub l1i_size: usize,
    pub l1i_ways: usize,
    pub l1i_miss_latency: u64,
    pub ftq_entries: usize,
    /// Instruction cap for one FTQ entry.
    pub max_block_instrs: usize,
    pub decode_width: usize,
    pub fetch_to_decode_depth: u64,
    pub decode_resteer_repair: u64,
    pub execute_resteer_penalty: u64,
    pub sbd_delay: u64,
    pub sbd_mode: SbdMode,
    pub index_policy: IndexPolicy,
    pub max_valid_paths: usize,
    pub invalidate_on_bogus: bool,
    pub direction_predictor: DirectionConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            isa: IsaKind::Svl,
            btb_entries: 8192,
            usbb_entries: 768,
            rsbb_entries: 2024,
            ways: 4,
            ras_depth: 32,
            l1i_size: 32 * 1024,
            l1i_ways: 8,
            l1i_miss_latency: 30,
            ftq_entries: 24,
            max_block_instrs: 32,
            decode_width: 12,
            fetch_to_decode_depth: 3,
            decode_resteer_repair: 2,
            execute_resteer_penalty: 12,
            sbd_delay: 4,
            sbd_mode: SbdMode::Off,
            index_policy: IndexPolicy::FirstIndex,
            max_valid_paths: DEFAULT_MAX_VALID_PATHS,
            invalidate_on_bogus: false,
            direction_predictor: DirectionConfig::Oracle,
            seed: 7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("l1i_miss_latency", self.l1i_miss_latency),
            ("fetch_to_decode_depth", self.fetch_to_decode_depth),
            ("decode_resteer_repair", self.decode_resteer_repair),
            ("execute_resteer_penalty", self.execute_resteer_penalty),
            ("sbd_delay", self.sbd_delay),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        for (name, v) in [
            ("decode_width", self.decode_width),
            ("ftq_entries", self.ftq_entries),
            ("max_block_instrs", self.max_block_instrs),
            ("ras_depth", self.ras_depth),
            ("max_valid_paths", self.max_valid_paths),
            ("ways", self.ways),
            ("l1i_ways", self.l1i_ways),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        for (name, v) in [
            ("btb_entries", self.btb_entries),
            ("usbb_entries", self.usbb_entries),
            ("rsbb_entries", self.rsbb_entries),
        ] {
            if v == 0 || v % self.ways != 0 {
                return bad(format!(
                    "{name} = {v} must be a positive multiple of ways = {}",
                    self.ways
                ));
            }
        }
        let lines = self.l1i_size / crate::shadow::LINE_BYTES;
        if self.l1i_size % crate::shadow::LINE_BYTES != 0
            || lines == 0
            || lines % self.l1i_ways != 0
        {
            return bad(format!(
                "l1i_size {} does not split into {} ways of 64-byte lines",
                self.l1i_size, self.l1i_ways
            ));
        }
        if let DirectionConfig::Gshare { bits } = self.direction_predictor {
            if !(1..=24).contains(&bits) {
                return bad(format!("gshare bits {bits} outside 1..=24"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SimConfig::default();
        assert_eq!(
            (c.ftq_entries, c.decode_width, c.fetch_to_decode_depth),
            (24, 12, 3)
        );
        assert_eq!(
            (c.decode_resteer_repair, c.execute_resteer_penalty),
            (2, 12)
        );
        assert_eq!((c.l1i_miss_latency, c.sbd_delay), (30, 4));
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = SimConfig::from_json(r#"{"btb_entries": 512, "sbd_mode": "both", "direction_predictor": {"gshare": {"bits": 12}}}"#).unwrap();
        assert_eq!(c.btb_entries, 512);
        assert_eq!(c.sbd_mode, SbdMode::Both);
        assert_eq!(c.direction_predictor, DirectionConfig::Gshare { bits: 12 });
        assert_eq!(c.usbb_entries, 768);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimConfig::from_json(r#"{"sbd_delay": 0}"#).is_err());
        assert!(SimConfig::from_json(r#"{"decode_width": 0}"#).is_err());
        assert!(SimConfig::from_json(r#"{"btb_entries": 514}"#).is_err());
        assert!(SimConfig::from_json(r#"{"no_such_key": 1}"#).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("head".parse::<SbdMode>().unwrap(), SbdMode::HeadOnly);
        assert!("sideways".parse::<SbdMode>().is_err());
        let c = SimConfig::from_json(r#"{"sbd_mode": "tail"}"#).unwrap();
        assert_eq!(c.sbd_mode, SbdMode::TailOnly);
    }
}
