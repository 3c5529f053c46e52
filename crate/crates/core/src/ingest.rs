//! Corpus ingestion: tokenization, block segmentation, and the lexicon and
//! alias side files.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

/// Smallest block size for which a block-level sentiment score is meaningful.
pub const MIN_BLOCK_SIZE: usize = 50;

/// A single lowercased word together with the casing facts character
/// extraction needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// First character was uppercase in the source.
    pub capitalized: bool,
    /// First word of the text or first word after `.`, `!` or `?`.
    pub sentence_start: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocMetadata {
    #[serde(default)]
    pub genres: Vec<String>,
    #[serde(default)]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookDocument {
    pub book_id: String,
    pub title: String,
    #[serde(default)]
    pub author: Option<String>,
    pub language: String,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub metadata: DocMetadata,
}

impl BookDocument {
    /// Builds a document from raw text using the standard tokenizer.
    pub fn from_text(book_id: impl Into<String>, title: impl Into<String>, text: &str) -> Self {
        BookDocument {
            book_id: book_id.into(),
            title: title.into(),
            author: None,
            language: "en".to_string(),
            tokens: tokenize(text),
            metadata: DocMetadata::default(),
        }
    }

    pub fn is_analyzable(&self) -> bool {
        !self.tokens.is_empty()
    }
}

/// A contiguous `[start, end)` run of tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalBlock {
    pub block_index: usize,
    pub start: usize,
    pub end: usize,
}

impl LogicalBlock {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits text into lowercased word tokens.
///
/// Word boundaries follow UAX #29, so apostrophe-internal words ("don't")
/// stay whole and combining marks stay attached to their base letter.
/// Segments without any alphanumeric character are dropped, but a `.`, `!`
/// or `?` among them marks the next word as sentence-initial.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut at_sentence_start = true;
    for segment in text.split_word_bounds() {
        if segment.chars().any(char::is_alphanumeric) {
            let capitalized = segment.chars().next().is_some_and(char::is_uppercase);
            tokens.push(Token {
                text: segment.to_lowercase(),
                capitalized,
                sentence_start: at_sentence_start,
            });
            at_sentence_start = false;
        } else if segment.chars().any(|c| matches!(c, '.' | '!' | '?' | '।')) {
            at_sentence_start = true;
        }
    }
    tokens
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads and tokenizes a UTF-8 plain-text book.
pub fn load_plain_text(path: impl AsRef<Path>, book_id: &str, title: &str) -> Result<BookDocument> {
    let text = read_to_string(path.as_ref())?;
    let doc = BookDocument::from_text(book_id, title, &text);
    if doc.tokens.is_empty() {
        return Err(Error::EmptyDocument(book_id.to_string()));
    }
    Ok(doc)
}

/// Tiles the token stream of `doc` into blocks of `block_size` tokens; the
/// last block may be short.
pub fn segment_blocks(doc: &BookDocument, block_size: usize) -> Result<Vec<LogicalBlock>> {
    segment_len(doc.tokens.len(), block_size)
}

pub(crate) fn segment_len(token_count: usize, block_size: usize) -> Result<Vec<LogicalBlock>> {
    if block_size < MIN_BLOCK_SIZE {
        return Err(Error::Config(format!(
            "block size {block_size} is below the minimum of {MIN_BLOCK_SIZE} tokens"
        )));
    }
    Ok((0..token_count.div_ceil(block_size))
        .map(|i| LogicalBlock {
            block_index: i,
            start: i * block_size,
            end: ((i + 1) * block_size).min(token_count),
        })
        .collect())
}

/// Outcome of reading a CMU book-summaries TSV file.
#[derive(Debug, Clone, Default)]
pub struct CmuImport {
    pub documents: Vec<BookDocument>,
    pub skipped: usize,
    /// `(1-based line, reason)` for every skipped row.
    pub skip_reasons: Vec<(usize, String)>,
}

/// Reads the 7-column CMU book summaries format:
/// `wikipedia_id, freebase_id, title, author, pub_date, genres_json, summary`.
pub fn load_cmu_summaries(path: impl AsRef<Path>) -> Result<CmuImport> {
    let text = read_to_string(path.as_ref())?;
    Ok(parse_cmu_summaries(&text))
}

pub fn parse_cmu_summaries(text: &str) -> CmuImport {
    let mut out = CmuImport::default();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_cmu_row(line) {
            Ok(doc) if !seen.insert(doc.book_id.clone()) => {
                out.skipped += 1;
                out.skip_reasons
                    .push((i + 1, format!("duplicate book id {}", doc.book_id)));
            }
            Ok(doc) => out.documents.push(doc),
            Err(reason) => {
                out.skipped += 1;
                out.skip_reasons.push((i + 1, reason));
            }
        }
    }
    out
}

fn parse_cmu_row(line: &str) -> std::result::Result<BookDocument, String> {
    let cols: Vec<&str> = line.splitn(7, '\t').collect();
    if cols.len() < 7 {
        return Err(format!("expected 7 columns, found {}", cols.len()));
    }
    let book_id = cols[0].trim();
    if book_id.is_empty() {
        return Err("empty wikipedia id".to_string());
    }
    let title = cols[2].trim();
    if title.is_empty() {
        return Err("empty title".to_string());
    }
    let author = Some(cols[3].trim())
        .filter(|a| !a.is_empty())
        .map(str::to_string);
    let genres = parse_genres(cols[5].trim())?;
    let summary = cols[6].trim();
    Ok(BookDocument {
        book_id: book_id.to_string(),
        title: title.to_string(),
        author,
        language: "en".to_string(),
        tokens: tokenize(summary),
        metadata: DocMetadata {
            genres,
            summary: Some(summary.to_string()).filter(|s| !s.is_empty()),
        },
    })
}

fn parse_genres(field: &str) -> std::result::Result<Vec<String>, String> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    let map: BTreeMap<String, String> =
        serde_json::from_str(field).map_err(|e| format!("bad genres column: {e}"))?;
    Ok(map.into_values().collect())
}

/// Term to polarity map, polarities in `[-1, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    entries: HashMap<String, f64>,
    duplicates: usize,
}

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.tsv");

impl SentimentLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// The bundled English lexicon.
    pub fn default_english() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    /// Parses `term<TAB>polarity` lines. Blank lines and `#` comments are
    /// ignored; a repeated term keeps its last polarity.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lexicon = SentimentLexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Lexicon {
                line: i + 1,
                message,
            };
            let (term, value) = line
                .split_once('\t')
                .ok_or_else(|| err("expected term<TAB>polarity".to_string()))?;
            let term = term.trim().to_lowercase();
            if term.is_empty() {
                return Err(err("empty term".to_string()));
            }
            let polarity: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid polarity {:?}", value.trim())))?;
            lexicon.insert_checked(term, polarity).map_err(err)?;
        }
        Ok(lexicon)
    }

    fn insert_checked(&mut self, term: String, polarity: f64) -> std::result::Result<(), String> {
        if !(-1.0..=1.0).contains(&polarity) {
            return Err(format!("polarity {polarity} for {term:?} outside [-1, 1]"));
        }
        if self.entries.insert(term, polarity).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Adds or replaces one entry.
    pub fn insert(&mut self, term: &str, polarity: f64) -> Result<()> {
        self.insert_checked(term.to_lowercase(), polarity)
            .map_err(Error::Config)
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.entries.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of lines that redefined an already-present term.
    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<SentimentLexicon> {
    SentimentLexicon::parse(&read_to_string(path.as_ref())?)
}

/// Per-book mapping of character surface forms to a canonical name.
///
/// Lookups are case-insensitive over space-joined surface forms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AliasTable {
    canonical: BTreeMap<String, Vec<String>>,
    lookup: HashMap<String, String>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `canonical` with its aliases. The canonical name is always
    /// an alias of itself.
    pub fn add(&mut self, canonical: &str, aliases: &[&str]) -> Result<()> {
        self.add_at(canonical, aliases, 0)
    }

    fn add_at(&mut self, canonical: &str, aliases: &[&str], line: usize) -> Result<()> {
        let canonical = canonical.trim();
        if canonical.is_empty() {
            return Err(Error::Alias {
                line,
                message: "empty canonical name".to_string(),
            });
        }
        let forms = std::iter::once(canonical).chain(aliases.iter().map(|a| a.trim()));
        for form in forms.filter(|f| !f.is_empty()) {
            let key = normalize_surface(form);
            match self.lookup.get(&key) {
                Some(owner) if owner != canonical => {
                    return Err(Error::Alias {
                        line,
                        message: format!("alias {form:?} already belongs to {owner:?}"),
                    });
                }
                Some(_) => {}
                None => {
                    self.lookup.insert(key, canonical.to_string());
                    self.canonical
                        .entry(canonical.to_string())
                        .or_default()
                        .push(form.to_string());
                }
            }
        }
        Ok(())
    }

    /// Parses `Canonical<TAB>alias1,alias2,...` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = AliasTable::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (canonical, rest) = line.split_once('\t').unwrap_or((line, ""));
            let aliases: Vec<&str> = rest.split(',').collect();
            table.add_at(canonical, &aliases, i + 1)?;
        }
        Ok(table)
    }

    /// Canonical name for a surface form, if the table knows it.
    pub fn resolve(&self, surface: &str) -> Option<&str> {
        self.lookup
            .get(&normalize_surface(surface))
            .map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn canonical_names(&self) -> impl Iterator<Item = &str> {
        self.canonical.keys().map(String::as_str)
    }
}

pub fn load_alias_table(path: impl AsRef<Path>) -> Result<AliasTable> {
    AliasTable::parse(&read_to_string(path.as_ref())?)
}

fn normalize_surface(form: &str) -> String {
    form.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
