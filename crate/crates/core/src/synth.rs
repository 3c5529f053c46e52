//! Synthetic corpus with planted sentiment arcs and known core characters.
//!
//! Every book is laid out block by block. Each planted pivot of the main
//! pair sits in a five-block scene `[low, mid, peak, mid, low]` where the
//! pair co-occurs in the three middle blocks, so the smoothed sentiment
//! over the pair's interacting blocks peaks exactly on the peak block.
//! Scenes are separated by neutral blocks in which the pair never meets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{tokenize, BookDocument, DocMetadata, SentimentLexicon, MIN_BLOCK_SIZE};

/// A named reference arc of sentiment values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcTemplate {
    pub name: String,
    pub description: String,
    pub values: Vec<f64>,
}

impl ArcTemplate {
    pub fn new(name: &str, description: &str, values: &[f64]) -> Self {
        ArcTemplate {
            name: name.to_string(),
            description: description.to_string(),
            values: values.to_vec(),
        }
    }

    /// The four reference archetypes.
    pub fn standard() -> Vec<ArcTemplate> {
        vec![
            ArcTemplate::new(
                "middle-peak",
                "sustained positive emotion through the middle portion",
                &[
                    0.40, 0.50, 0.62, 0.72, 0.78, 0.80, 0.78, 0.80, 0.82, 0.85, 0.90, 0.55,
                ],
            ),
            ArcTemplate::new(
                "decline-then-late-surprise",
                "steady decline, then a positive surprise near the end",
                &[0.75, 0.68, 0.60, 0.52, 0.45, 0.38, 0.30, 0.25, 0.70, 0.85],
            ),
            ArcTemplate::new(
                "distributed-spikes",
                "sharp positive spikes spread across the narrative",
                &[
                    0.40, 0.80, 0.35, 0.45, 0.85, 0.40, 0.35, 0.80, 0.45, 0.40, 0.85, 0.35, 0.45,
                    0.80,
                ],
            ),
            ArcTemplate::new(
                "early-excitement-then-negativity-then-resolve",
                "early excitement, a negative stretch, then resolution",
                &[0.80, 0.55, 0.85, 0.60, 0.25, 0.20, 0.30, 0.65],
            ),
        ]
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub books_per_archetype: usize,
    pub archetypes: Vec<ArcTemplate>,
    /// Standard deviation of the noise added to planted pivot values.
    pub noise_sigma: f64,
    /// Tokens per block; books are written in whole blocks.
    pub block_size: usize,
    /// Lexicon hits in every scene block.
    pub hits_per_block: usize,
    /// Mentions of each pair member in a scene's middle blocks.
    pub mentions_per_block: usize,
    /// Mentions of the non-core secondary character.
    pub secondary_mentions: usize,
    /// Characters mentioned only in passing.
    pub noise_names: usize,
    /// Metadata groups, assigned independently of the arc.
    pub metadata_groups: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 7,
            books_per_archetype: 25,
            archetypes: ArcTemplate::standard(),
            noise_sigma: 0.05,
            block_size: 250,
            hits_per_block: 20,
            mentions_per_block: 6,
            secondary_mentions: 8,
            noise_names: 2,
            metadata_groups: 4,
        }
    }
}

const LOW: f64 = 0.05;
const MID: f64 = 0.15;
const PEAK_MIN: f64 = 0.20;
const PEAK_MAX: f64 = 0.92;

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=0.2).contains(&self.noise_sigma) {
            return bad(format!("noise sigma {} outside [0, 0.2]", self.noise_sigma));
        }
        if self.block_size < MIN_BLOCK_SIZE {
            return bad(format!(
                "block size {} below {MIN_BLOCK_SIZE}",
                self.block_size
            ));
        }
        if self.archetypes.is_empty() || self.books_per_archetype == 0 {
            return bad("no books to generate".to_string());
        }
        for a in &self.archetypes {
            if !(6..=16).contains(&a.values.len()) {
                return bad(format!("archetype {} needs 6 to 16 values", a.name));
            }
            if a.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("archetype {} has values outside [0, 1]", a.name));
            }
        }
        let names = 2 * self.mentions_per_block;
        if self.mentions_per_block == 0 || self.hits_per_block + 2 * names > self.block_size {
            return bad("block too small for its mentions and hits".to_string());
        }
        if self.metadata_groups == 0 {
            return bad("metadata_groups must be positive".to_string());
        }
        Ok(())
    }
}

/// Planted facts about one generated book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookTruth {
    pub book_id: String,
    pub archetype: String,
    pub metadata_group: usize,
    pub core: BTreeSet<String>,
    pub main_pair: (String, String),
    pub secondary: String,
    /// Block index of every planted pivot of the main pair.
    pub pivot_blocks: Vec<usize>,
    /// Template value after noise, before lexical quantization.
    pub target_values: Vec<f64>,
    /// Block sentiment the planted words actually produce.
    pub realized_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthBook {
    pub document: BookDocument,
    pub text: String,
    pub truth: BookTruth,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub books: Vec<SynthBook>,
}

impl SynthCorpus {
    pub fn documents(&self) -> Vec<BookDocument> {
        self.books.iter().map(|b| b.document.clone()).collect()
    }

    /// Archetype label per book id.
    pub fn labels(&self) -> BTreeMap<String, String> {
        self.books
            .iter()
            .map(|b| (b.truth.book_id.clone(), b.truth.archetype.clone()))
            .collect()
    }

    /// Writes `books/<id>.txt`, `labels.csv`, `metadata.tsv` and
    /// `truth.json` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let books = dir.join("books");
        fs::create_dir_all(&books).map_err(|e| Error::io(&books, e))?;
        let mut labels = String::from("book_id,label\n");
        let mut tsv = String::new();
        for b in &self.books {
            let path = books.join(format!("{}.txt", b.truth.book_id));
            fs::write(&path, &b.text).map_err(|e| Error::io(&path, e))?;
            let _ = writeln!(labels, "{},{}", b.truth.book_id, b.truth.archetype);
            let genres: BTreeMap<String, &String> = b
                .document
                .metadata
                .genres
                .iter()
                .enumerate()
                .map(|(i, g)| (format!("/m/g{i}"), g))
                .collect();
            let _ = writeln!(
                tsv,
                "{}\t/m/{}\t{}\t{}\t\t{}\t{}",
                b.truth.book_id,
                b.truth.book_id,
                b.document.title,
                b.document.author.as_deref().unwrap_or(""),
                serde_json::to_string(&genres)?,
                b.document.metadata.summary.as_deref().unwrap_or("")
            );
        }
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))
        };
        write("labels.csv", &labels)?;
        write("metadata.tsv", &tsv)?;
        let truth: Vec<&BookTruth> = self.books.iter().map(|b| &b.truth).collect();
        write("truth.json", &serde_json::to_string_pretty(&truth)?)
    }
}

const NAMES: &[&str] = &[
    "Sulu", "Dilip", "Marta", "Oren", "Kasia", "Tobin", "Ysolde", "Ravik", "Nadia", "Quill",
    "Bertil", "Imke", "Zoran", "Halvard", "Lusine", "Mirek", "Odile", "Pavlo", "Renske", "Soren",
    "Talia", "Ulrik", "Vesna", "Wendel", "Xiomara", "Yannick", "Zelda", "Anouk", "Benedek",
    "Cosmin", "Dagny", "Eamon", "Fenna", "Goran", "Hedda", "Ilkka", "Jovana", "Kelvin", "Liesel",
    "Mattias",
];

const FILLER: &[&str] = &[
    "the", "a", "of", "to", "and", "in", "on", "at", "by", "from", "with", "into", "over", "under",
    "after", "before", "then", "later", "road", "house", "river", "door", "window", "table",
    "street", "town", "hill", "field", "train", "station", "letter", "room", "garden", "bridge",
    "market", "morning", "evening", "night", "week", "year", "walked", "went", "came", "turned",
    "opened", "closed", "looked", "said", "asked", "carried", "moved", "stood", "sat", "waited",
    "wrote", "read", "counted", "crossed", "passed", "returned", "old", "new", "long", "short",
    "north", "south", "east", "west", "stone", "wooden", "blue", "grey", "small", "large", "past",
    "across", "along", "near", "behind", "beside", "there", "here", "again", "slowly", "quietly",
    "bread", "coat", "boots", "lamp", "shelf", "clock", "map", "boat", "cart", "wall",
];

const TITLE_WORDS: &[&str] = &[
    "Harbor", "Winter", "Lantern", "Orchard", "Silence", "Meridian", "Ashes", "Tide", "Compass",
    "Ember", "Glass", "Horizon", "Quarry", "Thread", "Valley", "Signal", "Archive", "Citadel",
];

struct Group {
    authors: [&'static str; 3],
    genres: [&'static str; 2],
    topic: &'static [&'static str],
}

const GROUPS: &[Group] = &[
    Group {
        authors: ["Lena Varga", "Piet Holm", "Ines Carro"],
        genres: ["Mystery", "Crime Fiction"],
        topic: &[
            "detective",
            "inspector",
            "clue",
            "alibi",
            "witness",
            "evidence",
            "suspect",
            "case",
            "investigation",
            "motive",
            "precinct",
            "forensic",
        ],
    },
    Group {
        authors: ["Arno Kessel", "Mila Strand", "Tomas Ek"],
        genres: ["Science Fiction", "Space opera"],
        topic: &[
            "starship", "orbit", "colony", "planet", "galaxy", "android", "reactor", "station",
            "asteroid", "voyage", "fleet", "quantum",
        ],
    },
    Group {
        authors: ["Clara Dunmore", "Felix Arden", "Rosa Lind"],
        genres: ["Romance novel", "Historical fiction"],
        topic: &[
            "estate",
            "ballroom",
            "courtship",
            "letters",
            "manor",
            "season",
            "engagement",
            "duke",
            "carriage",
            "inheritance",
            "governess",
            "village",
        ],
    },
    Group {
        authors: ["Gareth Moor", "Selma Rook", "Ivo Brandt"],
        genres: ["Fantasy", "Adventure novel"],
        topic: &[
            "kingdom", "sword", "dragon", "quest", "wizard", "throne", "mountain", "prophecy",
            "relic", "forest", "realm", "oath",
        ],
    },
];

/// Lexicon words grouped by polarity, ascending.
struct Levels {
    levels: Vec<(f64, Vec<String>)>,
}

impl Levels {
    fn new(lexicon: &SentimentLexicon) -> Self {
        let mut by: BTreeMap<i64, (f64, Vec<String>)> = BTreeMap::new();
        for (term, polarity) in lexicon.iter() {
            // Multi-token or non-alphabetic terms would change block lengths.
            if !term.chars().all(|c| c.is_ascii_lowercase()) || tokenize(term).len() != 1 {
                continue;
            }
            let entry = by
                .entry((polarity * 1e6).round() as i64)
                .or_insert((polarity, Vec::new()));
            entry.1.push(term.to_string());
        }
        let mut levels: Vec<(f64, Vec<String>)> = by.into_values().collect();
        for (_, words) in &mut levels {
            words.sort();
        }
        Levels { levels }
    }

    /// `count` words whose mean polarity is as close to `target` as two
    /// adjacent polarity levels allow.
    fn pick(&self, rng: &mut ChaCha8Rng, target: f64, count: usize) -> Vec<String> {
        let hi = self
            .levels
            .iter()
            .position(|(p, _)| *p >= target)
            .unwrap_or(self.levels.len() - 1);
        let lo = hi.saturating_sub(1);
        let (pl, ph) = (self.levels[lo].0, self.levels[hi].0);
        let k = if ph > pl {
            (((target - pl) / (ph - pl)) * count as f64).round() as usize
        } else {
            count
        };
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let words = if i < k {
                &self.levels[hi].1
            } else {
                &self.levels[lo].1
            };
            out.push(words.choose(rng).expect("non-empty level").clone());
        }
        out
    }
}

/// One block's planted content.
struct BlockPlan {
    /// Sentiment target for the hits, if any.
    target: Option<f64>,
    hits: usize,
    /// Names to place in the block, in order.
    names: Vec<String>,
}

fn alternating(a: &str, b: &str, each: usize) -> Vec<String> {
    (0..2 * each)
        .map(|i| if i % 2 == 0 { a } else { b }.to_string())
        .collect()
}

fn to_raw(sv: f64) -> f64 {
    2.0 * sv - 1.0
}

/// Generates the corpus described by `spec` using `lexicon` for
/// sentiment-bearing words.
pub fn generate(spec: &GenSpec, lexicon: &SentimentLexicon) -> Result<SynthCorpus> {
    spec.validate()?;
    let levels = Levels::new(lexicon);
    if levels.levels.len() < 2 {
        return Err(Error::Config(
            "lexicon has too few polarity levels".to_string(),
        ));
    }
    let filler: Vec<&str> = FILLER
        .iter()
        .copied()
        .filter(|w| lexicon.get(w).is_none())
        .collect();
    let names: Vec<&str> = NAMES
        .iter()
        .copied()
        .filter(|n| lexicon.get(&n.to_lowercase()).is_none())
        .collect();
    let needed = 4 + spec.noise_names;
    if names.len() < needed {
        return Err(Error::Config(format!("need {needed} character names")));
    }

    let mut books = Vec::new();
    for arc in &spec.archetypes {
        for i in 0..spec.books_per_archetype {
            let index = books.len();
            let seed = spec
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let group = i % spec.metadata_groups;
            let book_id = format!("syn{index:03}");
            books.push(generate_book(
                spec, &levels, &filler, &names, arc, group, book_id, &mut rng,
            )?);
        }
    }
    Ok(SynthCorpus { books })
}

#[allow(clippy::too_many_arguments)]
fn generate_book(
    spec: &GenSpec,
    levels: &Levels,
    filler: &[&str],
    names: &[&str],
    arc: &ArcTemplate,
    group: usize,
    book_id: String,
    rng: &mut ChaCha8Rng,
) -> Result<SynthBook> {
    let mut cast: Vec<&str> = names.to_vec();
    cast.shuffle(rng);
    let (a, b, c, d) = (cast[0], cast[1], cast[2], cast[3]);
    let noise = &cast[4..4 + spec.noise_names];
    let normal = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;

    let scene = |plans: &mut Vec<BlockPlan>, x: &str, y: &str, peak: f64| -> usize {
        let m = spec.mentions_per_block;
        let hits = spec.hits_per_block;
        plans.push(BlockPlan {
            target: Some(LOW),
            hits,
            names: vec![],
        });
        plans.push(BlockPlan {
            target: Some(MID),
            hits,
            names: alternating(x, y, m),
        });
        plans.push(BlockPlan {
            target: Some(peak),
            hits,
            names: alternating(x, y, m),
        });
        plans.push(BlockPlan {
            target: Some(MID),
            hits,
            names: alternating(x, y, m),
        });
        plans.push(BlockPlan {
            target: Some(LOW),
            hits,
            names: vec![],
        });
        plans.len() - 3
    };
    let neutral = |plans: &mut Vec<BlockPlan>, rng: &mut ChaCha8Rng| {
        plans.push(BlockPlan {
            target: Some(rng.random_range(0.4..0.6)),
            hits: spec.hits_per_block / 3,
            names: vec![],
        });
    };

    let len = arc.values.len();
    let secondary_scenes = len.saturating_sub(2).max(2);
    let mut plans = Vec::new();
    let mut pivot_blocks = Vec::new();
    let mut targets = Vec::new();
    neutral(&mut plans, rng);
    neutral(&mut plans, rng);
    for (j, &v) in arc.values.iter().enumerate() {
        let noisy = if spec.noise_sigma > 0.0 {
            v + normal.sample(rng)
        } else {
            v
        };
        let peak = noisy.clamp(PEAK_MIN, PEAK_MAX);
        pivot_blocks.push(scene(&mut plans, a, b, peak));
        targets.push(peak);
        neutral(&mut plans, rng);
        if j < secondary_scenes {
            let v2 = rng.random_range(0.3..0.8);
            scene(&mut plans, a, c, v2);
            neutral(&mut plans, rng);
        }
    }
    neutral(&mut plans, rng);

    // Secondary and passing characters go into neutral blocks, alone.
    let neutral_blocks: Vec<usize> = (0..plans.len())
        .filter(|&k| plans[k].names.is_empty() && plans[k].hits < spec.hits_per_block)
        .collect();
    let mut extras: Vec<&str> = std::iter::repeat_n(d, spec.secondary_mentions).collect();
    for n in noise {
        extras.extend([*n, *n]);
    }
    for (slot, name) in extras.into_iter().enumerate() {
        let block = neutral_blocks[slot % neutral_blocks.len()];
        plans[block].names.push(name.to_string());
    }

    let mut words: Vec<String> = Vec::with_capacity(plans.len() * spec.block_size);
    let mut realized = Vec::new();
    for (k, plan) in plans.iter().enumerate() {
        let hits = match plan.target {
            Some(t) => levels.pick(rng, to_raw(t), plan.hits),
            None => Vec::new(),
        };
        if pivot_blocks.contains(&k) {
            let polarity: f64 =
                hits.iter().map(|w| levels_polarity(levels, w)).sum::<f64>() / hits.len() as f64;
            realized.push(((polarity + 1.0) / 2.0).clamp(0.0, 1.0));
        }
        let body = spec.block_size - plan.names.len();
        let mut block: Vec<String> = hits;
        while block.len() < body {
            block.push(filler.choose(rng).expect("filler").to_string());
        }
        block.shuffle(rng);
        // Names at evenly spaced slots, never adjacent.
        let n = plan.names.len();
        for (i, name) in plan.names.iter().enumerate().rev() {
            let at = (2 * i + 1) * body / (2 * n.max(1));
            block.insert(at.min(block.len()), name.clone());
        }
        words.extend(block);
    }

    let text = render(&words, rng);
    let meta = &GROUPS[group % GROUPS.len()];
    let title = format!(
        "The {} {}",
        TITLE_WORDS.choose(rng).expect("title"),
        TITLE_WORDS.choose(rng).expect("title")
    );
    let author = meta.authors.choose(rng).expect("author").to_string();
    let summary = summary_text(meta.topic, filler, rng);
    let mut document = BookDocument::from_text(book_id.clone(), title, &text);
    document.author = Some(author);
    document.metadata = DocMetadata {
        genres: meta.genres.iter().map(|g| g.to_string()).collect(),
        summary: Some(summary),
    };
    debug_assert_eq!(document.tokens.len(), plans.len() * spec.block_size);

    Ok(SynthBook {
        document,
        text,
        truth: BookTruth {
            book_id,
            archetype: arc.name.clone(),
            metadata_group: group,
            core: [a, b, c].iter().map(|s| s.to_string()).collect(),
            main_pair: {
                let (x, y) = if a <= b { (a, b) } else { (b, a) };
                (x.to_string(), y.to_string())
            },
            secondary: d.to_string(),
            pivot_blocks,
            target_values: targets,
            realized_values: realized,
        },
    })
}

fn levels_polarity(levels: &Levels, word: &str) -> f64 {
    levels
        .levels
        .iter()
        .find(|(_, ws)| ws.binary_search_by(|w| w.as_str().cmp(word)).is_ok())
        .map(|(p, _)| *p)
        .unwrap_or(0.0)
}

/// Joins words into sentences of 8 to 15 words.
fn render(words: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(words.len() * 7);
    let mut left = 0usize;
    for w in words {
        if left == 0 {
            if !out.is_empty() {
                out.push_str(". ");
            }
            left = rng.random_range(8..=15);
            let mut chars = w.chars();
            if let Some(first) = chars.next() {
                out.extend(first.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push(' ');
            out.push_str(w);
        }
        left -= 1;
    }
    out.push_str(".\n");
    out
}

fn summary_text(topic: &[&str], filler: &[&str], rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = (0..60)
        .map(|_| {
            if rng.random_bool(0.6) {
                *topic.choose(rng).expect("topic")
            } else {
                *filler.choose(rng).expect("filler")
            }
        })
        .collect();
    let mut s = words.join(" ");
    s.push('.');
    s
}
