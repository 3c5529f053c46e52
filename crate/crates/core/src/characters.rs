//! Character mining, prime selection, co-occurrence weighting and core
//! character selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AliasTable, BookDocument, Token};

/// Capitalized words that are never character names.
const NON_NAMES: &[&str] = &["i", "i'm", "i'll", "i've", "i'd"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub canonical_name: String,
    pub mention_count: usize,
    /// Block index to mentions in that block.
    pub per_block_counts: BTreeMap<usize, usize>,
    /// Token offset of every mention, ascending.
    pub mentions: Vec<usize>,
}

impl CharacterProfile {
    pub fn first_mention(&self) -> usize {
        self.mentions.first().copied().unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoOccurrenceEdge {
    pub a: String,
    pub b: String,
    pub raw_weight: usize,
    pub normalized_weight: f64,
}

impl CoOccurrenceEdge {
    pub fn connects(&self, x: &str, y: &str) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    pub fn touches(&self, x: &str) -> bool {
        self.a == x || self.b == x
    }
}

/// Characters that drive the narrative; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreCharacterSet {
    pub members: BTreeSet<String>,
    /// True when no co-occurrence reached the threshold and the top two
    /// prime characters were taken instead.
    pub fallback: bool,
}

impl CoreCharacterSet {
    pub fn contains(&self, name: &str) -> bool {
        self.members.contains(name)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// All unordered member pairs, each as `(smaller, larger)`.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let names: Vec<&String> = self.members.iter().collect();
        let mut out = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
        out
    }
}

struct Occurrence {
    start: usize,
    len: usize,
    initial: bool,
}

fn display_form(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| {
            let mut chars = t.text.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn surface_key(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_name_token(t: &Token) -> bool {
    t.capitalized && !NON_NAMES.contains(&t.text.as_str())
}

/// Mines candidate characters as maximal runs of capitalized tokens.
///
/// A run beginning a sentence loses its first token when that token never
/// appears capitalized mid-sentence, and a surface form only counts when
/// it is seen mid-sentence at least once. Surface forms are merged through
/// `aliases`. Profiles are ordered by first mention.
pub fn extract_characters(
    doc: &BookDocument,
    aliases: &AliasTable,
    block_size: usize,
) -> Vec<CharacterProfile> {
    let tokens = &doc.tokens;

    // Single tokens seen capitalized away from a sentence start.
    let mut mid_capitalized: BTreeSet<&str> = BTreeSet::new();
    for t in tokens
        .iter()
        .filter(|t| is_name_token(t) && !t.sentence_start)
    {
        mid_capitalized.insert(t.text.as_str());
    }

    let mut occurrences = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !is_name_token(&tokens[i]) {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < tokens.len() && is_name_token(&tokens[i]) && !tokens[i].sentence_start {
            i += 1;
        }
        let mut run_start = start;
        if tokens[start].sentence_start && !mid_capitalized.contains(tokens[start].text.as_str()) {
            run_start += 1;
        }
        if run_start < i {
            occurrences.push(Occurrence {
                start: run_start,
                len: i - run_start,
                initial: tokens[run_start].sentence_start,
            });
        }
    }

    struct Candidate {
        mentions: Vec<usize>,
        seen_mid_sentence: bool,
    }
    let mut by_name: HashMap<String, Candidate> = HashMap::new();
    for occ in occurrences {
        let span = &tokens[occ.start..occ.start + occ.len];
        let key = surface_key(span);
        let name = aliases
            .resolve(&key)
            .map(str::to_string)
            .unwrap_or_else(|| display_form(span));
        let entry = by_name.entry(name).or_insert_with(|| Candidate {
            mentions: Vec::new(),
            seen_mid_sentence: false,
        });
        entry.mentions.push(occ.start);
        entry.seen_mid_sentence |= !occ.initial;
    }

    let mut profiles: Vec<CharacterProfile> = by_name
        .into_iter()
        .filter(|(_, c)| c.seen_mid_sentence)
        .map(|(name, c)| {
            let mut per_block_counts = BTreeMap::new();
            for &m in &c.mentions {
                *per_block_counts.entry(m / block_size.max(1)).or_insert(0) += 1;
            }
            CharacterProfile {
                canonical_name: name,
                mention_count: c.mentions.len(),
                per_block_counts,
                mentions: c.mentions,
            }
        })
        .collect();
    profiles.sort_by(|a, b| {
        a.first_mention()
            .cmp(&b.first_mention())
            .then_with(|| a.canonical_name.cmp(&b.canonical_name))
    });
    profiles
}

/// Top `max_prime` profiles by mention count among those with at least
/// `min_mentions`, ties broken by earlier first mention.
pub fn select_prime(
    profiles: &[CharacterProfile],
    max_prime: usize,
    min_mentions: usize,
) -> Vec<CharacterProfile> {
    let mut primes: Vec<CharacterProfile> = profiles
        .iter()
        .filter(|p| p.mention_count >= min_mentions)
        .cloned()
        .collect();
    primes.sort_by(|a, b| {
        b.mention_count
            .cmp(&a.mention_count)
            .then_with(|| a.first_mention().cmp(&b.first_mention()))
    });
    primes.truncate(max_prime);
    primes
}

/// Number of mention pairs `(i, j)` with `i` from `a`, `j` from `b` and
/// `|i - j| <= window`. Both slices must be sorted.
pub fn count_within(a: &[usize], b: &[usize], window: usize) -> usize {
    a.iter()
        .map(|&i| {
            let lo = b.partition_point(|&j| j + window < i);
            let hi = b.partition_point(|&j| j <= i + window);
            hi - lo
        })
        .sum()
}

/// Windowed co-mention weights between every pair of prime characters.
///
/// Only pairs with at least one co-mention are returned; normalized
/// weights are relative to the heaviest pair in the book.
pub fn co_occurrence(primes: &[CharacterProfile], window: usize) -> Vec<CoOccurrenceEdge> {
    let mut edges = Vec::new();
    for (i, a) in primes.iter().enumerate() {
        for b in &primes[i + 1..] {
            let raw = count_within(&a.mentions, &b.mentions, window);
            if raw > 0 {
                let (a, b) = ordered(&a.canonical_name, &b.canonical_name);
                edges.push(CoOccurrenceEdge {
                    a: a.to_string(),
                    b: b.to_string(),
                    raw_weight: raw,
                    normalized_weight: 0.0,
                });
            }
        }
    }
    let max = edges.iter().map(|e| e.raw_weight).max().unwrap_or(0);
    for e in &mut edges {
        e.normalized_weight = e.raw_weight as f64 / max as f64;
    }
    edges
}

pub(crate) fn ordered<'a>(x: &'a str, y: &'a str) -> (&'a str, &'a str) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Core characters: primes with an edge of normalized weight at least
/// `threshold` to another prime. Falls back to the top two primes when no
/// edge qualifies.
pub fn select_core(
    primes: &[CharacterProfile],
    edges: &[CoOccurrenceEdge],
    threshold: f64,
) -> Result<CoreCharacterSet> {
    if primes.is_empty() {
        return Err(Error::CoreExtraction);
    }
    let members: BTreeSet<String> = primes
        .iter()
        .filter(|p| {
            edges
                .iter()
                .any(|e| e.touches(&p.canonical_name) && e.normalized_weight >= threshold)
        })
        .map(|p| p.canonical_name.clone())
        .collect();
    if !members.is_empty() {
        return Ok(CoreCharacterSet {
            members,
            fallback: false,
        });
    }
    Ok(CoreCharacterSet {
        members: primes
            .iter()
            .take(2)
            .map(|p| p.canonical_name.clone())
            .collect(),
        fallback: true,
    })
}

/// Debug dump entry for `characters.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterEntry {
    pub canonical_name: String,
    pub count: usize,
    pub prime: bool,
    pub core: bool,
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEntry {
    pub other: String,
    pub raw_weight: usize,
    pub normalized_weight: f64,
}

pub fn character_report(
    profiles: &[CharacterProfile],
    primes: &[CharacterProfile],
    edges: &[CoOccurrenceEdge],
    core: &CoreCharacterSet,
) -> Vec<CharacterEntry> {
    profiles
        .iter()
        .map(|p| {
            let name = &p.canonical_name;
            CharacterEntry {
                canonical_name: name.clone(),
                count: p.mention_count,
                prime: primes.iter().any(|q| &q.canonical_name == name),
                core: core.contains(name),
                edges: edges
                    .iter()
                    .filter(|e| e.touches(name))
                    .map(|e| EdgeEntry {
                        other: if &e.a == name {
                            e.b.clone()
                        } else {
                            e.a.clone()
                        },
                        raw_weight: e.raw_weight,
                        normalized_weight: e.normalized_weight,
                    })
                    .collect(),
            }
        })
        .collect()
}
