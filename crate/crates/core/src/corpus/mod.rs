//! Ingestion of publications, calls and researcher master records, identity resolution and
//! the shared document representation.

mod document;
mod identity;
mod ingest;
mod names;
mod records;

pub use document::{call_document, publication_document, to_document, Entity};
pub use identity::{filter_population, resolve_identities, Resolution};
pub use ingest::{
    enrich_topics, ingest_author_profiles, ingest_calls, ingest_master_list,
    ingest_publications, read_jsonl_strict, write_jsonl, Format, Ingested, Reject,
};
pub use names::normalize_name;
pub use records::{
    AuthorSlot, CallPart, CallRecord, DocKind, MasterRecord, MatchRule, ProvenanceStep,
    PublicationRecord, ResearcherProfile, ScholarlyDocument, SourceAuthorProfile,
};
