use super::records::{CallRecord, DocKind, PublicationRecord, ScholarlyDocument};

/// Either kind of entity that reduces to a [`ScholarlyDocument`].
pub enum Entity<'a> {
    Publication(&'a PublicationRecord),
    Call(&'a CallRecord),
}

/// Maps a publication or a call onto the shared title / body / keywords layout.
///
/// Publications without an abstract get an empty body; they are still embedded, just from
/// less text.
pub fn to_document(entity: Entity<'_>) -> ScholarlyDocument {
    match entity {
        Entity::Publication(p) => ScholarlyDocument {
            doc_id: p.pub_id.clone(),
            kind: DocKind::Publication,
            title: p.title.trim().to_string(),
            body: p.abstract_text.as_deref().unwrap_or("").trim().to_string(),
            keywords: dedup_case_insensitive(p.keywords.iter().chain(&p.topics)),
        },
        Entity::Call(c) => ScholarlyDocument {
            doc_id: c.call_id.clone(),
            kind: DocKind::Call,
            title: c.title.trim().to_string(),
            body: c.body(),
            keywords: dedup_case_insensitive(c.classification_terms.iter()),
        },
    }
}

pub fn publication_document(p: &PublicationRecord) -> ScholarlyDocument {
    to_document(Entity::Publication(p))
}

pub fn call_document(c: &CallRecord) -> ScholarlyDocument {
    to_document(Entity::Call(c))
}

/// Trimmed, non-empty terms; the first spelling of each case-insensitive duplicate wins.
fn dedup_case_insensitive<'a>(terms: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    terms
        .map(|t| t.trim())
        .filter(|t| !t.is_empty() && seen.insert(t.to_lowercase()))
        .map(str::to_string)
        .collect()
}
