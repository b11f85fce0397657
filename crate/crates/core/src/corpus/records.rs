use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// One author position on a publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorSlot {
    pub source_author_id: String,
    pub position: u32,
    #[serde(default)]
    pub is_corresponding: bool,
    #[serde(default)]
    pub raw_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub pub_id: String,
    #[serde(default)]
    pub doi: Option<String>,
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub topics: Vec<String>,
    pub year: i32,
    pub authors: Vec<AuthorSlot>,
    #[serde(default)]
    pub source_tags: Vec<String>,
}

impl PublicationRecord {
    /// Checks the record invariants, returning the first violation.
    pub fn validate(&self, reference_year: i32) -> Result<(), String> {
        if self.pub_id.trim().is_empty() {
            return Err("empty pub_id".into());
        }
        if self.title.trim().is_empty() {
            return Err("empty title".into());
        }
        if self.authors.is_empty() {
            return Err("no authors".into());
        }
        let mut positions: Vec<u32> = self.authors.iter().map(|a| a.position).collect();
        positions.sort_unstable();
        if positions
            .iter()
            .enumerate()
            .any(|(i, &p)| p as usize != i + 1)
        {
            return Err(format!(
                "author positions must be 1..{} without gaps or repeats",
                self.authors.len()
            ));
        }
        if self
            .authors
            .iter()
            .any(|a| a.source_author_id.trim().is_empty())
        {
            return Err("empty source_author_id".into());
        }
        if self.year < 1900 || self.year > reference_year {
            return Err(format!(
                "year {} outside [1900, {reference_year}]",
                self.year
            ));
        }
        Ok(())
    }

    pub fn author_count(&self) -> u32 {
        self.authors.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceAuthorProfile {
    pub source_author_id: String,
    #[serde(default, rename = "names")]
    pub name_variants: Vec<String>,
    #[serde(default)]
    pub orcid: Option<String>,
    #[serde(default)]
    pub emails: BTreeSet<String>,
    #[serde(default)]
    pub affiliations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasterRecord {
    pub researcher_key: String,
    #[serde(default, rename = "source_ids")]
    pub verified_source_ids: BTreeSet<String>,
    #[serde(default)]
    pub orcid: Option<String>,
    #[serde(default)]
    pub email: Option<String>,
    #[serde(rename = "name")]
    pub canonical_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPart {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call_id: String,
    pub title: String,
    #[serde(default, rename = "parts")]
    pub description_parts: Vec<CallPart>,
    #[serde(default, rename = "terms")]
    pub classification_terms: Vec<String>,
}

impl CallRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.call_id.trim().is_empty() {
            return Err("empty call_id".into());
        }
        if self.title.trim().is_empty() {
            return Err("empty title".into());
        }
        if self.body().trim().is_empty() {
            return Err("empty description".into());
        }
        Ok(())
    }

    /// Description parts in schema order (description, destination, expected outcome,
    /// scope, then any other label in input order), joined by single blank lines.
    /// Blank parts are skipped.
    pub fn body(&self) -> String {
        let mut parts: Vec<&CallPart> = self.description_parts.iter().collect();
        parts.sort_by_key(|p| part_rank(&p.label));
        parts
            .iter()
            .map(|p| p.text.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

fn part_rank(label: &str) -> u8 {
    let label = label.trim().to_lowercase().replace(['_', '-'], " ");
    match label.as_str() {
        "description" => 0,
        "destination" => 1,
        "expected outcome" | "expected outcomes" => 2,
        "scope" => 3,
        _ => 4,
    }
}

/// How a source profile came to be attached to a researcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchRule {
    Id,
    Orcid,
    Email,
    Name,
}

impl std::fmt::Display for MatchRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchRule::Id => "id",
            MatchRule::Orcid => "orcid",
            MatchRule::Email => "email",
            MatchRule::Name => "name",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProvenanceStep {
    pub rule: MatchRule,
    pub source_author_id: String,
    /// Master key the profile was matched through; differs from the researcher id after a merge.
    pub via: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherProfile {
    pub researcher_id: String,
    pub merged_source_ids: BTreeSet<String>,
    pub orcid: Option<String>,
    pub emails: BTreeSet<String>,
    pub normalized_name: String,
    pub publication_ids: BTreeSet<String>,
    pub provenance: Vec<ProvenanceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Publication,
    Call,
}

/// The shared text unit that both publications and calls reduce to before embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScholarlyDocument {
    pub doc_id: String,
    pub kind: DocKind,
    pub title: String,
    pub body: String,
    pub keywords: Vec<String>,
}
