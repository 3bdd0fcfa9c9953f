//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use dna_channel::channel::ChannelSpec;
use dna_channel::index::DEFAULT_K;
use dna_channel::merge::MergeParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the designed sequences come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSource {
    File { path: PathBuf },
    Generate { count: usize, target_length: usize, homopolymer_limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    /// k-mer length of the matching prefilter.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Largest accepted edit distance; 15% of the target length when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dist: Option<u32>,
    /// Drop pairs unless both reads have exactly `min(read_len, L)` bases,
    /// with L the design length.
    #[serde(default)]
    pub exact_length_filter: bool,
    /// Pairs entering the reading-error estimate (an even stride subsample).
    #[serde(default = "default_reading_pairs")]
    pub reading_error_pairs: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_reading_pairs() -> usize {
    100_000
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self { k: DEFAULT_K, max_dist: None, exact_length_filter: false, reading_error_pairs: default_reading_pairs() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub schema_version: u32,
    /// Free-form label echoed in the report.
    #[serde(default)]
    pub name: String,
    pub master_seed: u64,
    pub references: ReferenceSource,
    pub channel: ChannelSpec,
    /// Read pairs are merged before matching when present; otherwise the
    /// forward reads are matched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge: Option<MergeParams>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
}

impl ChannelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: Option<u32>,
        }
        let version: Version = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match version.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::Config(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})")))
            }
            None => return Err(CliError::Config("missing schema_version".into())),
        }
        let config: ChannelConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn target_length(&self) -> Option<usize> {
        match &self.references {
            ReferenceSource::Generate { target_length, .. } => Some(*target_length),
            ReferenceSource::File { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: dna_channel::Error| CliError::Config(e.to_string());
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.channel.validate().map_err(bad)?;
        if self.channel.stages.is_empty() {
            return Err(CliError::Config("stage list is empty; use a single `neutral` stage for none".into()));
        }
        if let ReferenceSource::Generate { count, target_length, homopolymer_limit } = self.references {
            if count == 0 || target_length == 0 || homopolymer_limit == 0 {
                return Err(CliError::Config(
                    "generated references need count, target_length, homopolymer_limit >= 1".into(),
                ));
            }
        }
        if let Some(m) = &self.merge {
            m.validate().map_err(bad)?;
            if let Some(l) = self.target_length() {
                if m.target_length != l {
                    return Err(CliError::Config(format!(
                        "merge.target_length {} differs from the reference length {l}",
                        m.target_length
                    )));
                }
            }
        }
        if self.analysis.k == 0 || self.analysis.k > 32 {
            return Err(CliError::Config(format!("analysis.k = {} must lie in 1..=32", self.analysis.k)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in presets::names() {
            let config = presets::preset(name).unwrap();
            let text = config.to_toml().unwrap();
            let back = ChannelConfig::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, config, "{name}");
        }
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let text = presets::preset("fig7a").unwrap().to_toml().unwrap();
        let extra = format!("bogus = 1\n{text}");
        assert!(matches!(ChannelConfig::from_toml(&extra), Err(CliError::Config(_))));
        let nested = text.replace("coverage =", "covrage =");
        assert!(matches!(ChannelConfig::from_toml(&nested), Err(CliError::Config(_))));
        let v2 = text.replace("schema_version = 1", "schema_version = 2");
        assert!(ChannelConfig::from_toml(&v2).unwrap_err().to_string().contains("schema_version"));
        let none = text.replace("schema_version = 1", "");
        assert!(ChannelConfig::from_toml(&none).is_err());
    }

    #[test]
    fn empty_stage_list_rejected() {
        let mut c = presets::preset("fig7a").unwrap();
        c.channel.stages.clear();
        assert!(c.validate().is_err());
        let mut c = presets::preset("fig7a").unwrap();
        c.channel.coverage = -1.0;
        assert!(c.validate().is_err());
    }
}
