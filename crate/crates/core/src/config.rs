//! Pipeline configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::DynamicThreshold;
use crate::error::{Error, Result};
use crate::ingest::MIN_BLOCK_SIZE;
use crate::pivots::SentimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Tokens per logical block.
    pub block_size: usize,
    /// Maximum number of prime characters.
    pub max_prime: usize,
    /// Minimum mentions for a prime character.
    pub min_mentions: usize,
    /// Co-mention window in tokens.
    pub window: usize,
    /// Normalized co-occurrence weight a prime needs to be core.
    pub core_threshold: f64,
    pub sentiment: SentimentConfig,
    pub threshold: DynamicThreshold,
    /// Lexicon file; the bundled English lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Directory holding `<book_id>.aliases` sidecars.
    pub alias_dir: Option<PathBuf>,
    /// Baseline-2 compares full texts instead of summaries.
    pub baseline_full_text: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            block_size: 250,
            max_prime: 10,
            min_mentions: 5,
            window: 50,
            core_threshold: 0.25,
            sentiment: SentimentConfig::default(),
            threshold: DynamicThreshold::default(),
            lexicon: None,
            alias_dir: None,
            baseline_full_text: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "block_size",
    "max_prime",
    "min_mentions",
    "window",
    "core_threshold",
    "alpha",
    "smoothing_radius",
    "pp_max",
    "dt_mode",
    "dt_value",
    "dt_stddev_weight",
    "lexicon",
    "alias_dir",
    "baseline_full_text",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < MIN_BLOCK_SIZE {
            return Err(Error::Config(format!(
                "block_size {} is below {MIN_BLOCK_SIZE}",
                self.block_size
            )));
        }
        if self.max_prime < 2 {
            return Err(Error::Config("max_prime must be at least 2".to_string()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be positive".to_string()));
        }
        if !(0.0..=1.0).contains(&self.core_threshold) {
            return Err(Error::Config(format!(
                "core_threshold {} outside [0, 1]",
                self.core_threshold
            )));
        }
        self.sentiment.validate()?;
        self.threshold.validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "block_size" => self.block_size = parse_num(key, value)?,
            "max_prime" => self.max_prime = parse_num(key, value)?,
            "min_mentions" => self.min_mentions = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "core_threshold" => self.core_threshold = parse_num(key, value)?,
            "alpha" => self.sentiment.alpha = parse_num(key, value)?,
            "smoothing_radius" => self.sentiment.smoothing_radius = parse_num(key, value)?,
            "pp_max" => self.sentiment.pp_max = parse_num(key, value)?,
            "dt_mode" => {
                self.threshold = match value {
                    "fixed" => DynamicThreshold::Fixed {
                        value: match self.threshold {
                            DynamicThreshold::Fixed { value } => value,
                            DynamicThreshold::Adaptive { .. } => 0.4,
                        },
                    },
                    "adaptive" => DynamicThreshold::Adaptive {
                        stddev_weight: match self.threshold {
                            DynamicThreshold::Adaptive { stddev_weight } => stddev_weight,
                            DynamicThreshold::Fixed { .. } => 0.5,
                        },
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "dt_mode must be fixed or adaptive, got {other:?}"
                        )))
                    }
                }
            }
            "dt_value" => {
                self.threshold = DynamicThreshold::Fixed {
                    value: parse_num(key, value)?,
                }
            }
            "dt_stddev_weight" => {
                self.threshold = DynamicThreshold::Adaptive {
                    stddev_weight: parse_num(key, value)?,
                }
            }
            "lexicon" => self.lexicon = Some(value).filter(|v| !v.is_empty()).map(PathBuf::from),
            "alias_dir" => {
                self.alias_dir = Some(value).filter(|v| !v.is_empty()).map(PathBuf::from)
            }
            "baseline_full_text" => self.baseline_full_text = parse_num(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Parses a config file: `key = value` lines, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies settings from config-file text on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Renders every setting in the config-file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("block_size", self.block_size.to_string());
        line("max_prime", self.max_prime.to_string());
        line("min_mentions", self.min_mentions.to_string());
        line("window", self.window.to_string());
        line("core_threshold", self.core_threshold.to_string());
        line("alpha", self.sentiment.alpha.to_string());
        line(
            "smoothing_radius",
            self.sentiment.smoothing_radius.to_string(),
        );
        line("pp_max", self.sentiment.pp_max.to_string());
        match self.threshold {
            DynamicThreshold::Fixed { value } => {
                line("dt_mode", "fixed".into());
                line("dt_value", value.to_string());
            }
            DynamicThreshold::Adaptive { stddev_weight } => {
                line("dt_mode", "adaptive".into());
                line("dt_stddev_weight", stddev_weight.to_string());
            }
        }
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        line("lexicon", path(&self.lexicon));
        line("alias_dir", path(&self.alias_dir));
        line("baseline_full_text", self.baseline_full_text.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.block_size, 250);
        assert_eq!(cfg.max_prime, 10);
        assert_eq!(cfg.min_mentions, 5);
        assert_eq!(cfg.window, 50);
        assert_eq!(cfg.core_threshold, 0.25);
        assert_eq!(cfg.sentiment.alpha, 0.0);
        assert_eq!(cfg.sentiment.smoothing_radius, 1);
        assert_eq!(cfg.sentiment.pp_max, 16);
        cfg.validate().unwrap();
    }

    #[test]
    fn file_roundtrip() {
        let mut cfg = PipelineConfig::default();
        cfg.set("dt_value", "0.4").unwrap();
        cfg.set("lexicon", "lex.tsv").unwrap();
        let text = cfg.to_file_string();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
        for key in KEYS.iter().filter(|k| **k != "dt_stddev_weight") {
            assert!(text.contains(&format!("{key} =")), "{key}");
        }
        let adaptive = PipelineConfig::default().to_file_string();
        assert!(adaptive.contains("dt_stddev_weight = 0.5"));
        assert_eq!(
            PipelineConfig::parse(&adaptive).unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::parse("colour = red\n").is_err());
        assert!(PipelineConfig::parse("block_size = many\n").is_err());
        assert!(PipelineConfig::parse("block_size\n").is_err());
        assert!(PipelineConfig::parse("dt_mode = sometimes\n").is_err());
        let cfg = PipelineConfig::parse("# comment\nblock_size = 20\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig::parse("alpha = 0.5\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dt_mode_switch() {
        let cfg = PipelineConfig::parse("dt_mode = fixed\n").unwrap();
        assert_eq!(cfg.threshold, DynamicThreshold::fixed(0.4));
        let cfg = PipelineConfig::parse("dt_value = 0.3\ndt_mode = adaptive\n").unwrap();
        assert_eq!(
            cfg.threshold,
            DynamicThreshold::Adaptive { stddev_weight: 0.5 }
        );
    }
}
