//! `config.json`: the pipeline parameters, and the subset that may be overridden on recompute.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::profiling::{default_indicators, validate_indicators, IndicatorSpec};
use crate::ranking::DEFAULT_PERCENTILE_CUTOFF;
use crate::scoring::{NormalizationScope, ScoreOptions, DEFAULT_TOP_FRACTION_DENOMINATOR};

pub const DEFAULT_POPULATION_MIN_PUBS: usize = 3;
pub const DEFAULT_REFERENCE_YEAR: i32 = 2025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Hash,
    Import,
    Sidecar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub reference_year: i32,
    #[serde(default = "default_min_pubs")]
    pub population_min_pubs: usize,
    #[serde(default = "default_indicators")]
    pub indicators: Vec<IndicatorSpec>,
    #[serde(default = "default_cutoff")]
    pub percentile_cutoff: f64,
    #[serde(default = "default_denominator")]
    pub top_fraction_denominator: usize,
    #[serde(default)]
    pub normalization_scope: NormalizationScope,
    #[serde(default)]
    pub provider: ProviderKind,
    #[serde(default)]
    pub provider_options: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_pubs() -> usize {
    DEFAULT_POPULATION_MIN_PUBS
}

fn default_cutoff() -> f64 {
    DEFAULT_PERCENTILE_CUTOFF
}

fn default_denominator() -> usize {
    DEFAULT_TOP_FRACTION_DENOMINATOR
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            reference_year: DEFAULT_REFERENCE_YEAR,
            population_min_pubs: DEFAULT_POPULATION_MIN_PUBS,
            indicators: default_indicators(),
            percentile_cutoff: DEFAULT_PERCENTILE_CUTOFF,
            top_fraction_denominator: DEFAULT_TOP_FRACTION_DENOMINATOR,
            normalization_scope: NormalizationScope::default(),
            provider: ProviderKind::default(),
            provider_options: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1900..=9999).contains(&self.reference_year) {
            return Err(Error::InvalidConfig(format!(
                "reference_year {} outside [1900, 9999]",
                self.reference_year
            )));
        }
        if !(self.percentile_cutoff > 0.0 && self.percentile_cutoff <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile_cutoff {} outside (0, 100]",
                self.percentile_cutoff
            )));
        }
        if self.top_fraction_denominator < 2 {
            return Err(Error::InvalidConfig("top_fraction_denominator must be >= 2".into()));
        }
        validate_indicators(&self.indicators)?;
        match self.provider {
            ProviderKind::Hash => {
                if let Some(dim) = self.provider_options.get("dim") {
                    match dim.parse::<usize>() {
                        Ok(d) if d > 0 => {}
                        _ => return Err(Error::InvalidConfig(format!("provider_options.dim {dim:?} is not a positive integer"))),
                    }
                }
            }
            ProviderKind::Import => self.require_option("path")?,
            ProviderKind::Sidecar => self.require_option("program")?,
        }
        Ok(())
    }

    fn require_option(&self, key: &str) -> Result<()> {
        match self.provider_options.get(key) {
            Some(v) if !v.trim().is_empty() => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "provider {:?} needs provider_options.{key}",
                self.provider
            ))),
        }
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions {
            top_fraction_denominator: self.top_fraction_denominator,
            scope: self.normalization_scope,
        }
    }

    pub fn indicator_names(&self) -> Vec<String> {
        self.indicators.iter().map(|i| i.name.clone()).collect()
    }

    /// Longest indicator window; the population filter counts publications inside it.
    pub fn population_window(&self) -> u32 {
        self.indicators.iter().map(|i| i.window_years).max().unwrap_or(1)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Recompute body. Only profiling, scoring and ranking parameters are accepted; anything that
/// would require new embeddings is an unknown field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_min_pubs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicators: Option<Vec<IndicatorSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_fraction_denominator: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization_scope: Option<NormalizationScope>,
}

impl ConfigOverrides {
    /// The overridden config, validated.
    pub fn apply(&self, base: &PipelineConfig) -> Result<PipelineConfig> {
        let mut c = base.clone();
        if let Some(v) = self.reference_year {
            c.reference_year = v;
        }
        if let Some(v) = self.population_min_pubs {
            c.population_min_pubs = v;
        }
        if let Some(v) = &self.indicators {
            c.indicators = v.clone();
        }
        if let Some(v) = self.percentile_cutoff {
            c.percentile_cutoff = v;
        }
        if let Some(v) = self.top_fraction_denominator {
            c.top_fraction_denominator = v;
        }
        if let Some(v) = self.normalization_scope {
            c.normalization_scope = v;
        }
        c.validate()?;
        Ok(c)
    }
}
