//! Per-book analysis and corpus-level indexing runs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalogue::{build_catalogue, BookRecord, Catalogue, ConfigSnapshot};
use crate::characters::{
    character_report, co_occurrence, extract_characters, select_core, select_prime, CharacterEntry,
    CharacterProfile, CoOccurrenceEdge, CoreCharacterSet,
};
use crate::cluster::{cluster_all, resolve_threshold, Cluster};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    load_alias_table, load_lexicon, parse_cmu_summaries, segment_blocks, tokenize, AliasTable,
    BookDocument, SentimentLexicon,
};
use crate::pivots::{
    block_scores, detect_pivots, predominant_pair, InteractionMap, PairPivots, PairSignal,
};
use crate::series::{build_series, BlockContext, SentimentSeries};
use crate::spsi::{spsi_matrix, SeriesRef, SimilarityMatrix};

/// Character statistics of one book.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterAnalysis {
    pub block_count: usize,
    pub profiles: Vec<CharacterProfile>,
    pub primes: Vec<CharacterProfile>,
    pub edges: Vec<CoOccurrenceEdge>,
    pub core: CoreCharacterSet,
}

impl CharacterAnalysis {
    pub fn report(&self) -> Vec<CharacterEntry> {
        character_report(&self.profiles, &self.primes, &self.edges, &self.core)
    }
}

/// Everything the pipeline derives from one book.
#[derive(Debug, Clone, PartialEq)]
pub struct BookAnalysis {
    pub book_id: String,
    pub title: String,
    pub author: Option<String>,
    pub characters: CharacterAnalysis,
    /// Block sentiment scores in narrative order.
    pub block_scores: Vec<f64>,
    /// Pivots of every core pair that interacts at all.
    pub pairs: Vec<PairPivots>,
    pub predominant: (String, String),
    pub series: SentimentSeries,
    /// Interacting blocks of the predominant pair.
    pub context: BlockContext,
}

impl BookAnalysis {
    pub fn series_ref(&self) -> SeriesRef<'_> {
        SeriesRef {
            series: &self.series,
            context: Some(&self.context),
        }
    }
}

pub fn analyze_characters(
    doc: &BookDocument,
    aliases: &AliasTable,
    cfg: &PipelineConfig,
) -> Result<CharacterAnalysis> {
    if !doc.is_analyzable() {
        return Err(Error::EmptyDocument(doc.book_id.clone()));
    }
    let block_count = segment_blocks(doc, cfg.block_size)?.len();
    let profiles = extract_characters(doc, aliases, cfg.block_size);
    let primes = select_prime(&profiles, cfg.max_prime, cfg.min_mentions);
    let edges = co_occurrence(&primes, cfg.window);
    let core = select_core(&primes, &edges, cfg.core_threshold)?;
    Ok(CharacterAnalysis {
        block_count,
        profiles,
        primes,
        edges,
        core,
    })
}

/// Runs the full per-book pipeline up to the book's sentiment series.
pub fn analyze_book(
    doc: &BookDocument,
    lexicon: &SentimentLexicon,
    aliases: &AliasTable,
    cfg: &PipelineConfig,
) -> Result<BookAnalysis> {
    cfg.validate()?;
    let characters = analyze_characters(doc, aliases, cfg)?;
    let blocks = segment_blocks(doc, cfg.block_size)?;
    let scores = block_scores(&doc.tokens, &blocks, lexicon, cfg.sentiment.alpha);
    let map = InteractionMap::build(
        &characters.core,
        &characters.primes,
        cfg.window,
        cfg.block_size,
        blocks.len(),
    );

    let mut pairs = Vec::new();
    let mut contexts = BTreeMap::new();
    for (a, b) in characters.core.pairs() {
        let Some(intensities) = map.pair_intensities(&a, &b) else {
            continue;
        };
        let signal = PairSignal::new(intensities, &scores, cfg.sentiment.smoothing_radius);
        if signal.blocks.is_empty() {
            continue;
        }
        let pivots = detect_pivots(&signal, (&a, &b), &cfg.sentiment)?;
        contexts.insert((a.clone(), b.clone()), signal.context());
        pairs.push(PairPivots {
            pair: (a, b),
            pivots,
        });
    }

    let main = predominant_pair(&pairs).ok_or_else(|| {
        let mut names = characters.core.members.iter().cloned();
        let a = names.next().unwrap_or_default();
        let b = names.next().unwrap_or_default();
        Error::NoPivots(a, b)
    })?;
    let series = build_series(&doc.book_id, &main.pivots)?;
    let predominant = main.pair.clone();
    let context = contexts.remove(&predominant).unwrap_or_default();
    Ok(BookAnalysis {
        book_id: doc.book_id.clone(),
        title: doc.title.clone(),
        author: doc.author.clone(),
        characters,
        block_scores: scores,
        pairs,
        predominant,
        series,
        context,
    })
}

/// A book the pipeline could not turn into a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub book_id: String,
    pub reason: String,
}

/// Resources shared by every book of a run.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: SentimentLexicon,
    pub aliases: HashMap<String, AliasTable>,
}

impl Resources {
    /// Loads the configured lexicon (or the bundled one) and every
    /// `<book_id>.aliases` file in the alias directory.
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let lexicon = match &cfg.lexicon {
            Some(path) => load_lexicon(path)?,
            None => SentimentLexicon::default_english(),
        };
        let mut aliases = HashMap::new();
        if let Some(dir) = &cfg.alias_dir {
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let path = entry.map_err(|e| Error::io(dir, e))?.path();
                if path.extension().is_some_and(|e| e == "aliases") {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        aliases.insert(stem.to_string(), load_alias_table(&path)?);
                    }
                }
            }
        }
        Ok(Resources { lexicon, aliases })
    }

    pub fn with_lexicon(lexicon: SentimentLexicon) -> Self {
        Resources {
            lexicon,
            aliases: HashMap::new(),
        }
    }

    pub fn aliases_for(&self, book_id: &str) -> &AliasTable {
        static EMPTY: std::sync::OnceLock<AliasTable> = std::sync::OnceLock::new();
        self.aliases
            .get(book_id)
            .unwrap_or_else(|| EMPTY.get_or_init(AliasTable::new))
    }
}

/// Analyzes books in parallel. Failures are reported per book; output
/// keeps input order.
pub fn analyze_corpus(
    docs: &[BookDocument],
    resources: &Resources,
    cfg: &PipelineConfig,
) -> Result<(Vec<BookAnalysis>, Vec<Skipped>)> {
    cfg.validate()?;
    let results: Vec<Result<BookAnalysis>> = docs
        .par_iter()
        .map(|doc| {
            analyze_book(
                doc,
                &resources.lexicon,
                resources.aliases_for(&doc.book_id),
                cfg,
            )
        })
        .collect();
    let mut done = Vec::new();
    let mut skipped = Vec::new();
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok(a) => done.push(a),
            Err(e) => skipped.push(Skipped {
                book_id: doc.book_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok((done, skipped))
}

/// Outcome of analyzing and clustering a corpus.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    pub analyses: Vec<BookAnalysis>,
    pub skipped: Vec<Skipped>,
    pub matrix: SimilarityMatrix,
    pub threshold: f64,
    pub clusters: Vec<Cluster>,
}

impl CorpusIndex {
    pub fn catalogue(&self, cfg: &PipelineConfig) -> Result<Catalogue> {
        let books: Vec<BookRecord> = self
            .analyses
            .iter()
            .map(|a| BookRecord {
                book_id: &a.book_id,
                title: &a.title,
                author: a.author.as_deref(),
                series: &a.series,
            })
            .collect();
        build_catalogue(
            &self.clusters,
            &books,
            ConfigSnapshot::new(cfg, self.threshold),
        )
    }
}

/// Analyzes, compares and clusters a corpus.
pub fn index_corpus(
    docs: &[BookDocument],
    resources: &Resources,
    cfg: &PipelineConfig,
) -> Result<CorpusIndex> {
    let (analyses, skipped) = analyze_corpus(docs, resources, cfg)?;
    let matrix = spsi_matrix(analyses.iter().map(BookAnalysis::series_ref))?;
    let threshold = resolve_threshold(&matrix, &cfg.threshold);
    let series: Vec<SentimentSeries> = analyses.iter().map(|a| a.series.clone()).collect();
    let clusters = cluster_all(&matrix, &series, threshold)?;
    Ok(CorpusIndex {
        analyses,
        skipped,
        matrix,
        threshold,
        clusters,
    })
}

/// Loads a corpus directory: every `*.txt` file is a book whose id is the
/// file stem. A `metadata.tsv` in CMU summary format supplies titles,
/// authors, genres and summaries for matching ids. Files are returned in
/// id order.
pub fn load_corpus_dir(dir: impl AsRef<Path>) -> Result<Vec<BookDocument>> {
    let dir = dir.as_ref();
    let books_dir = if dir.join("books").is_dir() {
        dir.join("books")
    } else {
        dir.to_path_buf()
    };
    let metadata = match fs::read_to_string(dir.join("metadata.tsv")) {
        Ok(text) => parse_cmu_summaries(&text)
            .documents
            .into_iter()
            .map(|d| (d.book_id.clone(), d))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
        Err(e) => return Err(Error::io(dir.join("metadata.tsv"), e)),
    };

    let mut paths = Vec::new();
    for entry in fs::read_dir(&books_dir).map_err(|e| Error::io(&books_dir, e))? {
        let path = entry.map_err(|e| Error::io(&books_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut doc = BookDocument::from_text(id, id, &text);
        if let Some(meta) = metadata.get(id) {
            doc.title = meta.title.clone();
            doc.author = meta.author.clone();
            doc.metadata = meta.metadata.clone();
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Tokens a baseline or summary view would see: the summary when present,
/// the book text otherwise.
pub fn summary_tokens(doc: &BookDocument) -> Vec<String> {
    match &doc.metadata.summary {
        Some(s) if !s.trim().is_empty() => tokenize(s).into_iter().map(|t| t.text).collect(),
        _ => doc.tokens.iter().map(|t| t.text.clone()).collect(),
    }
}
