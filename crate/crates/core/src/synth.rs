//! Seeded synthetic corpora: master list, source profiles, publications and calls drawn from a
//! small set of topics, so that matching has some structure to find.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_jsonl, AuthorSlot, CallPart, CallRecord, MasterRecord, PublicationRecord,
    SourceAuthorProfile,
};
use crate::error::{Error, Result};
use crate::reports::{CALLS_FILE, MASTERS_FILE, PROFILES_FILE, PUBLICATIONS_FILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub researchers: usize,
    pub calls: usize,
    pub seed: u64,
    pub reference_year: i32,
    pub topics: usize,
    pub min_pubs: usize,
    pub max_pubs: usize,
    /// Every researcher leads enough recent papers to qualify for all default indicators.
    pub all_eligible: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            researchers: 50,
            calls: 20,
            seed: 0,
            reference_year: 2025,
            topics: 8,
            min_pubs: 2,
            max_pubs: 20,
            all_eligible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub masters: Vec<MasterRecord>,
    pub profiles: Vec<SourceAuthorProfile>,
    pub publications: Vec<PublicationRecord>,
    pub calls: Vec<CallRecord>,
}

const SYLLABLES: &[&str] = &[
    "bio", "neu", "ro", "gen", "quan", "tum", "cli", "ma", "mol", "ec", "ul", "ar", "poly", "mer",
    "cat", "al", "ysis", "hydro", "geo", "photo", "sen", "sor", "net", "work", "learn", "ing",
    "stat", "is", "tic", "ther", "mo", "dyn", "am", "ics", "micro", "bi", "ome", "soil", "crop",
    "urb", "an", "ener", "gy", "grid", "cell", "pro", "tein", "code", "graph", "flow",
];

const GIVEN: &[&str] = &[
    "Ana", "Luis", "Maria", "Jose", "Elena", "Pablo", "Lucia", "Javier", "Carmen", "Diego", "Sara",
    "Miguel", "Laura", "Andres", "Irene", "Tomas",
];

const FAMILY: &[&str] = &[
    "Garcia", "Lopez", "Martinez", "Sanchez", "Perez", "Gomez", "Ruiz", "Diaz", "Moreno", "Munoz",
    "Alvarez", "Romero", "Navarro", "Torres", "Ramos", "Castro",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

/// Words drawn mostly from one topic's vocabulary, the rest from the shared pool.
fn text(rng: &mut ChaCha8Rng, vocab: &[Vec<String>], topic: usize, len: usize) -> String {
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let t = if rng.gen_bool(0.75) { topic } else { rng.gen_range(0..vocab.len()) };
        words.push(vocab[t].choose(rng).expect("non-empty").clone());
    }
    words.join(" ")
}

pub fn generate(opts: &SynthOptions) -> Result<SynthCorpus> {
    if opts.topics == 0 || opts.min_pubs > opts.max_pubs {
        return Err(Error::InvalidConfig("synth needs topics >= 1 and min_pubs <= max_pubs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let vocab: Vec<Vec<String>> = (0..opts.topics)
        .map(|_| (0..40).map(|_| word(&mut rng)).collect())
        .collect();

    let mut masters = Vec::with_capacity(opts.researchers);
    let mut profiles = Vec::with_capacity(opts.researchers);
    let mut home = Vec::with_capacity(opts.researchers);
    for i in 0..opts.researchers {
        let given = *GIVEN.choose(&mut rng).expect("non-empty");
        let family = *FAMILY.choose(&mut rng).expect("non-empty");
        let key = format!("R{i:05}");
        let sid = format!("S{i:05}");
        let orcid = format!("0000-0002-{:04}-{:04}", i / 10_000, i % 10_000);
        // Every fifth master carries only an ORCID, so resolution needs the second stage.
        let by_orcid = i % 5 == 4;
        masters.push(MasterRecord {
            researcher_key: key,
            verified_source_ids: if by_orcid { Default::default() } else { [sid.clone()].into() },
            orcid: by_orcid.then(|| orcid.clone()),
            email: None,
            canonical_name: format!("{family}, {given}"),
        });
        profiles.push(SourceAuthorProfile {
            source_author_id: sid,
            name_variants: vec![format!("{family}, {}.", &given[..1])],
            orcid: Some(orcid),
            emails: [format!("{}.{}{i}@example.edu", given.to_lowercase(), family.to_lowercase())].into(),
            affiliations: vec!["Example University".into()],
        });
        home.push(rng.gen_range(0..opts.topics));
    }

    let mut publications = Vec::new();
    for i in 0..opts.researchers {
        let n = rng.gen_range(opts.min_pubs..=opts.max_pubs);
        let guaranteed = if opts.all_eligible { 6 } else { 0 };
        for j in 0..n.max(guaranteed) {
            let recent = j < guaranteed;
            let year = if recent {
                opts.reference_year - rng.gen_range(0..=1)
            } else {
                opts.reference_year - rng.gen_range(0..=6)
            };
            let mut authors = vec![i];
            let coauthors = rng.gen_range(0..=3).min(opts.researchers.saturating_sub(1));
            while authors.len() < coauthors + 1 {
                let other = rng.gen_range(0..opts.researchers);
                if !authors.contains(&other) {
                    authors.push(other);
                }
            }
            if !recent {
                authors.shuffle(&mut rng);
            }
            let corresponding = rng.gen_range(0..authors.len());
            let slots = authors
                .iter()
                .enumerate()
                .map(|(pos, &a)| AuthorSlot {
                    source_author_id: profiles[a].source_author_id.clone(),
                    position: pos as u32 + 1,
                    is_corresponding: pos == corresponding,
                    raw_name: profiles[a].name_variants[0].clone(),
                })
                .collect();
            let topic = home[i];
            let title_len = rng.gen_range(6..=10);
            let abstract_len = rng.gen_range(20..=40);
            publications.push(PublicationRecord {
                pub_id: format!("P{i:05}-{j:03}"),
                doi: Some(format!("10.5555/synth.{i}.{j}")),
                title: text(&mut rng, &vocab, topic, title_len),
                abstract_text: Some(text(&mut rng, &vocab, topic, abstract_len)),
                keywords: (0..3).map(|_| vocab[topic].choose(&mut rng).expect("non-empty").clone()).collect(),
                topics: Vec::new(),
                year,
                authors: slots,
                source_tags: vec!["synthetic".into()],
            });
        }
    }

    let calls = (0..opts.calls)
        .map(|c| {
            let topic = rng.gen_range(0..opts.topics);
            let title_len = rng.gen_range(5..=8);
            let parts = [("Expected Outcome", 25), ("Scope", 40), ("Description", 15)]
                .into_iter()
                .map(|(label, len)| CallPart {
                    label: label.into(),
                    text: text(&mut rng, &vocab, topic, len),
                })
                .collect();
            CallRecord {
                call_id: format!("CALL-{c:04}"),
                title: text(&mut rng, &vocab, topic, title_len),
                description_parts: parts,
                classification_terms: (0..2).map(|_| vocab[topic].choose(&mut rng).expect("non-empty").clone()).collect(),
            }
        })
        .collect();

    Ok(SynthCorpus {
        masters,
        profiles,
        publications,
        calls,
    })
}

/// Writes the four raw input files into `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(MASTERS_FILE), &corpus.masters)?;
    write_jsonl(&dir.join(PROFILES_FILE), &corpus.profiles)?;
    write_jsonl(&dir.join(PUBLICATIONS_FILE), &corpus.publications)?;
    write_jsonl(&dir.join(CALLS_FILE), &corpus.calls)
}
