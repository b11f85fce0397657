//! Cascading identity resolution: attaches fragmented source author profiles to master
//! records by source id, then ORCID, then verified email, then normalized name. Each stage
//! only considers profiles no earlier stage claimed. Profiles that share a normalized name and
//! at least one verified email are consolidated afterwards.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::names::normalize_name;
use super::records::{
    MasterRecord, MatchRule, ProvenanceStep, PublicationRecord, ResearcherProfile,
    SourceAuthorProfile,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub researchers: Vec<ResearcherProfile>,
    /// Source profiles no stage could attach.
    pub unmatched_source_ids: Vec<String>,
}

struct Candidate {
    orcid: Option<String>,
    emails: BTreeSet<String>,
    names: BTreeSet<String>,
    explicit: bool,
}

fn normalize_orcid(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    let bare = trimmed
        .rsplit_once("orcid.org/")
        .map(|(_, tail)| tail)
        .unwrap_or(trimmed)
        .trim_matches('/')
        .to_uppercase();
    (!bare.is_empty()).then_some(bare)
}

/// Source ids that are the corresponding author on at least one publication.
fn corresponding_ids(pubs: &[PublicationRecord]) -> BTreeSet<&str> {
    pubs.iter()
        .flat_map(|p| p.authors.iter())
        .filter(|a| a.is_corresponding)
        .map(|a| a.source_author_id.as_str())
        .collect()
}

fn candidates(
    profiles: &[SourceAuthorProfile],
    pubs: &[PublicationRecord],
) -> BTreeMap<String, Candidate> {
    let corresponding = corresponding_ids(pubs);
    let mut out: BTreeMap<String, Candidate> = profiles
        .iter()
        .map(|p| {
            // An email only counts once the profile has signed as corresponding author.
            let emails = if corresponding.contains(p.source_author_id.as_str()) {
                p.emails.iter().map(|e| e.trim().to_lowercase()).collect()
            } else {
                BTreeSet::new()
            };
            let names = p
                .name_variants
                .iter()
                .map(|n| normalize_name(n))
                .filter(|n| !n.is_empty())
                .collect();
            (
                p.source_author_id.clone(),
                Candidate {
                    orcid: p.orcid.as_deref().and_then(normalize_orcid),
                    emails,
                    names,
                    explicit: true,
                },
            )
        })
        .collect();
    // Ids seen only on author slots can still be claimed through a verified source id.
    for slot in pubs.iter().flat_map(|p| p.authors.iter()) {
        out.entry(slot.source_author_id.clone())
            .or_insert_with(|| Candidate {
                orcid: None,
                emails: BTreeSet::new(),
                names: BTreeSet::new(),
                explicit: false,
            });
    }
    out
}

fn stage_matches(rule: MatchRule, master: &MasterRecord, master_name: &str, source_id: &str, c: &Candidate) -> bool {
    match rule {
        MatchRule::Id => master.verified_source_ids.contains(source_id),
        MatchRule::Orcid => {
            c.explicit
                && match (&c.orcid, master.orcid.as_deref().and_then(normalize_orcid)) {
                    (Some(a), Some(b)) => *a == b,
                    _ => false,
                }
        }
        MatchRule::Email => {
            c.explicit
                && master
                    .email
                    .as_deref()
                    .is_some_and(|e| c.emails.contains(&e.trim().to_lowercase()))
        }
        MatchRule::Name => c.explicit && !master_name.is_empty() && c.names.contains(master_name),
    }
}

/// Smallest-key union-find over master keys.
struct Groups(BTreeMap<String, String>);

impl Groups {
    fn find(&mut self, key: &str) -> String {
        let parent = self.0.get(key).cloned().unwrap_or_else(|| key.to_string());
        if parent == key {
            return parent;
        }
        let root = self.find(&parent);
        self.0.insert(key.to_string(), root.clone());
        root
    }

    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0.insert(hi, lo);
        }
    }
}

pub fn resolve_identities(
    masters: &[MasterRecord],
    profiles: &[SourceAuthorProfile],
    pubs: &[PublicationRecord],
) -> Result<Resolution> {
    let mut masters: Vec<&MasterRecord> = masters.iter().collect();
    masters.sort_by(|a, b| a.researcher_key.cmp(&b.researcher_key));

    let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
    for m in &masters {
        for sid in &m.verified_source_ids {
            if let Some(prev) = claimed.insert(sid, &m.researcher_key) {
                if prev != m.researcher_key {
                    return Err(Error::ConflictingSourceId {
                        source_id: sid.clone(),
                        first: prev.to_string(),
                        second: m.researcher_key.clone(),
                    });
                }
            }
        }
    }

    let master_names: Vec<String> = masters
        .iter()
        .map(|m| normalize_name(&m.canonical_name))
        .collect();
    let cands = candidates(profiles, pubs);

    // source id -> (master key, rule)
    let mut attached: BTreeMap<String, (String, MatchRule)> = BTreeMap::new();
    for rule in [MatchRule::Id, MatchRule::Orcid, MatchRule::Email, MatchRule::Name] {
        for (sid, cand) in &cands {
            if attached.contains_key(sid) {
                continue;
            }
            let hit = masters
                .iter()
                .zip(&master_names)
                .find(|(m, name)| stage_matches(rule, m, name, sid, cand));
            if let Some((m, _)) = hit {
                attached.insert(sid.clone(), (m.researcher_key.clone(), rule));
            }
        }
    }

    // Consolidation by shared normalized name plus a shared verified email.
    let mut groups = Groups(BTreeMap::new());
    let mut by_name: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (sid, cand) in cands.iter().filter(|(_, c)| c.explicit) {
        for name in &cand.names {
            by_name.entry(name.as_str()).or_default().push(sid.as_str());
        }
    }
    let shares_email = |a: &str, b: &str| !cands[a].emails.is_disjoint(&cands[b].emails);
    let mut late: BTreeMap<String, (String, MatchRule)> = BTreeMap::new();
    for ids in by_name.values() {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if !shares_email(a, b) {
                    continue;
                }
                match (attached.get(a), attached.get(b)) {
                    (Some((ka, _)), Some((kb, _))) => groups.union(ka, kb),
                    (Some((ka, _)), None) => offer(&mut late, b, ka),
                    (None, Some((kb, _))) => offer(&mut late, a, kb),
                    (None, None) => {}
                }
            }
        }
    }
    attached.extend(late);

    let mut members: BTreeMap<String, Vec<(String, String, MatchRule)>> = BTreeMap::new();
    for (sid, (key, rule)) in &attached {
        let root = groups.find(key);
        members
            .entry(root)
            .or_default()
            .push((sid.clone(), key.clone(), *rule));
    }

    let by_key: BTreeMap<&str, &MasterRecord> = masters
        .iter()
        .map(|m| (m.researcher_key.as_str(), *m))
        .collect();
    let mut owned: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for p in pubs {
        for a in &p.authors {
            owned
                .entry(a.source_author_id.as_str())
                .or_default()
                .insert(p.pub_id.clone());
        }
    }

    let mut researchers = Vec::with_capacity(members.len());
    for (root, list) in members {
        let group_keys: BTreeSet<&str> = list.iter().map(|(_, k, _)| k.as_str()).collect();
        let group_masters: Vec<&MasterRecord> = group_keys.iter().map(|k| by_key[k]).collect();
        let root_master = by_key[root.as_str()];

        let orcid = group_masters
            .iter()
            .find_map(|m| m.orcid.as_deref().and_then(normalize_orcid))
            .or_else(|| list.iter().find_map(|(sid, _, _)| cands[sid].orcid.clone()));
        let mut emails: BTreeSet<String> = group_masters
            .iter()
            .filter_map(|m| m.email.clone())
            .collect();
        let mut publication_ids = BTreeSet::new();
        let mut provenance = Vec::with_capacity(list.len());
        for (sid, via, rule) in &list {
            emails.extend(cands[sid].emails.iter().cloned());
            if let Some(ids) = owned.get(sid.as_str()) {
                publication_ids.extend(ids.iter().cloned());
            }
            provenance.push(ProvenanceStep {
                rule: *rule,
                source_author_id: sid.clone(),
                via: via.clone(),
            });
        }
        provenance.sort();
        let mut normalized_name = normalize_name(&root_master.canonical_name);
        if normalized_name.is_empty() {
            normalized_name = list
                .iter()
                .find_map(|(sid, _, _)| cands[sid].names.iter().next().cloned())
                .unwrap_or_default();
        }
        researchers.push(ResearcherProfile {
            researcher_id: root,
            merged_source_ids: list.into_iter().map(|(sid, _, _)| sid).collect(),
            orcid,
            emails,
            normalized_name,
            publication_ids,
            provenance,
        });
    }

    let unmatched_source_ids = cands
        .iter()
        .filter(|(sid, c)| c.explicit && !attached.contains_key(*sid))
        .map(|(sid, _)| sid.clone())
        .collect();

    Ok(Resolution {
        researchers,
        unmatched_source_ids,
    })
}

/// Records a late attachment by name and email, keeping the smallest master key on ties.
fn offer(late: &mut BTreeMap<String, (String, MatchRule)>, sid: &str, key: &str) {
    let entry = late
        .entry(sid.to_string())
        .or_insert_with(|| (key.to_string(), MatchRule::Name));
    if key < entry.0.as_str() {
        entry.0 = key.to_string();
    }
}

/// Keeps researchers with at least `min_total_pubs` publications dated within
/// `[from_year, to_year]`.
pub fn filter_population<'a>(
    researchers: &'a [ResearcherProfile],
    pubs: &BTreeMap<String, PublicationRecord>,
    min_total_pubs: usize,
    from_year: i32,
    to_year: i32,
) -> Vec<&'a ResearcherProfile> {
    researchers
        .iter()
        .filter(|r| {
            r.publication_ids
                .iter()
                .filter_map(|id| pubs.get(id))
                .filter(|p| p.year >= from_year && p.year <= to_year)
                .count()
                >= min_total_pubs
        })
        .collect()
}
