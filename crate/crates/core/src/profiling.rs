//! Indicators and the per-researcher publication sets they select.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{PublicationRecord, ResearcherProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorFilter {
    /// Every publication of the researcher.
    All,
    /// First, last or corresponding author only.
    Leading,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub name: String,
    pub author_filter: AuthorFilter,
    pub window_years: u32,
    pub min_pubs: usize,
}

impl IndicatorSpec {
    pub fn new(name: &str, author_filter: AuthorFilter, window_years: u32, min_pubs: usize) -> Self {
        IndicatorSpec {
            name: name.to_string(),
            author_filter,
            window_years,
            min_pubs,
        }
    }
}

pub const RESEARCH_BACKGROUND: &str = "Research background";
pub const CURRENT_FOCUS: &str = "Current focus";
pub const RESEARCH_LEADERSHIP: &str = "Research leadership";
pub const CURRENT_LEADERSHIP: &str = "Current leadership";

/// The four indicators: two time windows crossed with two author filters.
pub fn default_indicators() -> Vec<IndicatorSpec> {
    vec![
        IndicatorSpec::new(RESEARCH_BACKGROUND, AuthorFilter::All, 5, 5),
        IndicatorSpec::new(CURRENT_FOCUS, AuthorFilter::All, 2, 3),
        IndicatorSpec::new(RESEARCH_LEADERSHIP, AuthorFilter::Leading, 5, 4),
        IndicatorSpec::new(CURRENT_LEADERSHIP, AuthorFilter::Leading, 2, 2),
    ]
}

/// Checks the indicator list: non-empty, unique names, positive windows and thresholds.
pub fn validate_indicators(indicators: &[IndicatorSpec]) -> Result<()> {
    if indicators.is_empty() {
        return Err(Error::InvalidConfig("at least one indicator is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for ind in indicators {
        if ind.name.trim().is_empty() {
            return Err(Error::InvalidConfig("indicator name must not be empty".into()));
        }
        if !seen.insert(ind.name.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate indicator `{}`", ind.name)));
        }
        if ind.window_years < 1 {
            return Err(Error::InvalidConfig(format!("`{}`: window_years must be >= 1", ind.name)));
        }
        if ind.min_pubs < 1 {
            return Err(Error::InvalidConfig(format!("`{}`: min_pubs must be >= 1", ind.name)));
        }
    }
    Ok(())
}

/// True when one of the researcher's source ids is first, last or corresponding author.
pub fn is_leading(publication: &PublicationRecord, researcher: &ResearcherProfile) -> Result<bool> {
    let last = publication.author_count();
    let mut authored = false;
    for slot in &publication.authors {
        if researcher.merged_source_ids.contains(&slot.source_author_id) {
            authored = true;
            if slot.position == 1 || slot.position == last || slot.is_corresponding {
                return Ok(true);
            }
        }
    }
    if authored {
        Ok(false)
    } else {
        Err(Error::NotAnAuthor {
            researcher: researcher.researcher_id.clone(),
            pub_id: publication.pub_id.clone(),
        })
    }
}

/// Whole calendar years, inclusive: `[reference_year - window_years + 1, reference_year]`.
pub fn in_window(publication: &PublicationRecord, window_years: u32, reference_year: i32) -> bool {
    let from = reference_year - window_years as i32 + 1;
    publication.year >= from && publication.year <= reference_year
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationSet {
    pub researcher_id: String,
    pub indicator_name: String,
    /// Newest first, then by pub_id.
    pub pub_ids: Vec<String>,
    pub eligible: bool,
}

/// Builds publication sets against a fixed corpus, indicator list and reference year.
pub struct Profiler<'a> {
    pubs: &'a BTreeMap<String, PublicationRecord>,
    indicators: &'a [IndicatorSpec],
    reference_year: i32,
}

impl<'a> Profiler<'a> {
    pub fn new(
        pubs: &'a BTreeMap<String, PublicationRecord>,
        indicators: &'a [IndicatorSpec],
        reference_year: i32,
    ) -> Self {
        Profiler {
            pubs,
            indicators,
            reference_year,
        }
    }

    pub fn indicator(&self, name: &str) -> Result<&'a IndicatorSpec> {
        self.indicators
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| Error::UnknownIndicator(name.to_string()))
    }

    pub fn build_set(&self, researcher: &ResearcherProfile, indicator_name: &str) -> Result<PublicationSet> {
        let indicator = self.indicator(indicator_name)?;
        build_set(researcher, indicator, self.pubs, self.reference_year)
    }

    /// Every (researcher, indicator) set, ineligible ones included, in researcher then
    /// indicator order.
    pub fn build_all(&self, researchers: &[&ResearcherProfile]) -> Result<Vec<PublicationSet>> {
        let mut out = Vec::with_capacity(researchers.len() * self.indicators.len());
        for r in researchers {
            for ind in self.indicators {
                out.push(build_set(r, ind, self.pubs, self.reference_year)?);
            }
        }
        Ok(out)
    }
}

pub fn build_set(
    researcher: &ResearcherProfile,
    indicator: &IndicatorSpec,
    pubs: &BTreeMap<String, PublicationRecord>,
    reference_year: i32,
) -> Result<PublicationSet> {
    let mut selected: Vec<&PublicationRecord> = Vec::new();
    for id in &researcher.publication_ids {
        let Some(p) = pubs.get(id) else { continue };
        if !in_window(p, indicator.window_years, reference_year) {
            continue;
        }
        let keep = match indicator.author_filter {
            AuthorFilter::All => true,
            AuthorFilter::Leading => is_leading(p, researcher)?,
        };
        if keep {
            selected.push(p);
        }
    }
    selected.sort_by(|a, b| b.year.cmp(&a.year).then_with(|| a.pub_id.cmp(&b.pub_id)));
    let pub_ids: Vec<String> = selected.into_iter().map(|p| p.pub_id.clone()).collect();
    Ok(PublicationSet {
        researcher_id: researcher.researcher_id.clone(),
        indicator_name: indicator.name.clone(),
        eligible: pub_ids.len() >= indicator.min_pubs,
        pub_ids,
    })
}
