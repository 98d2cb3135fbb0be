use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConfig {
    /// Uses the committed outcome; only meaningful on the correct path.
    #[default]
    Oracle,
    Gshare {
        bits: u32,
    },
}

/// Conditional branch direction predictor.
#[derive(Debug, Clone)]
pub enum DirectionPredictor {
    Oracle,
    Gshare(Gshare),
}

impl DirectionPredictor {
    pub fn new(cfg: DirectionConfig) -> Self {
        match cfg {
            DirectionConfig::Oracle => DirectionPredictor::Oracle,
            DirectionConfig::Gshare { bits } => DirectionPredictor::Gshare(Gshare::new(bits)),
        }
    }

    /// `actual` is the committed outcome when the branch is on the trace.
    /// Off-trace branches predict not-taken under the oracle.
    pub fn predict(&self, pc: u64, actual: Option<bool>) -> bool {
        match self {
            DirectionPredictor::Oracle => actual.unwrap_or(false),
            DirectionPredictor::Gshare(g) => g.predict(pc),
        }
    }

    pub fn update(&mut self, pc: u64, taken: bool) {
        if let DirectionPredictor::Gshare(g) = self {
            g.update(pc, taken);
        }
    }
}

/// Global-history predictor with 2-bit counters. History is updated at
/// commit only.
#[derive(Debug, Clone)]
pub struct Gshare {
    counters: Vec<u8>,
    history: u64,
    mask: u64,
}

impl Gshare {
    pub fn new(bits: u32) -> Self {
        assert!((1..=24).contains(&bits), "gshare bits must be in 1..=24");
        Self {
            counters: vec![1; 1 << bits],
            history: 0,
            mask: (1 << bits) - 1,
        }
    }

    fn index(&self, pc: u64) -> usize {
        ((pc ^ self.history) & self.mask) as usize
    }

    pub fn predict(&self, pc: u64) -> bool {
        self.counters[self.index(pc)] >= 2
    }

    pub fn update(&mut self, pc: u64, taken: bool) {
        let i = self.index(pc);
        let c = &mut self.counters[i];
        *c = if taken {
            (*c + 1).min(3)
        } else {
            c.saturating_sub(1)
        };
        self.history = ((self.history << 1) | taken as u64) & self.mask;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_follows_outcome() {
        let p = DirectionPredictor::new(DirectionConfig::Oracle);
        assert!(p.predict(0, Some(true)));
        assert!(!p.predict(0, Some(false)));
        assert!(!p.predict(0, None));
    }

    #[test]
    fn gshare_learns_always_taken() {
        let mut g = Gshare::new(8);
        for _ in 0..20 {
            g.update(0x40, true);
        }
        assert!(g.predict(0x40));
    }

    #[test]
    fn config_json_shape() {
        let cfg: DirectionConfig = serde_json::from_str(r#"{"gshare":{"bits":12}}"#).unwrap();
        assert_eq!(cfg, DirectionConfig::Gshare { bits: 12 });
        let cfg: DirectionConfig = serde_json::from_str(r#""oracle""#).unwrap();
        assert_eq!(cfg, DirectionConfig::Oracle);
    }
}
