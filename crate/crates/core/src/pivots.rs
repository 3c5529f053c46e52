//! Block sentiment scoring, pair interaction intensity and pivot detection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::characters::{count_within, CharacterProfile, CoreCharacterSet};
use crate::error::{Error, Result};
use crate::ingest::{LogicalBlock, SentimentLexicon, Token};
use crate::series::{BlockContext, ContextBlock};

/// Equality tolerance for plateau detection on smoothed scores.
const PLATEAU_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    /// Additive offset applied to every normalized block score.
    pub alpha: f64,
    /// Moving-average radius, in interacting blocks.
    pub smoothing_radius: usize,
    /// Maximum pivots kept per character pair.
    pub pp_max: usize,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            alpha: 0.0,
            smoothing_radius: 1,
            pp_max: 16,
        }
    }
}

impl SentimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.1).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha {} outside [0, 0.1]",
                self.alpha
            )));
        }
        if self.pp_max < 2 {
            return Err(Error::Config(format!(
                "pp_max {} must be at least 2",
                self.pp_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotPoint {
    pub block_index: usize,
    /// Narrative fraction in `[0, 1]`.
    pub position: f64,
    /// Unsmoothed block sentiment in `[0, 1]`.
    pub sentiment: f64,
    pub participants: Vec<String>,
    pub occurrence_weight: f64,
}

/// Normalized sentiment of a token span: the mean polarity of lexicon hits
/// mapped from `[-1, 1]` to `[0, 1]`, plus `alpha`, clamped. A span without
/// hits scores the neutral midpoint.
pub fn block_sentiment(tokens: &[Token], lexicon: &SentimentLexicon, alpha: f64) -> f64 {
    let (sum, hits) = tokens
        .iter()
        .filter_map(|t| lexicon.get(&t.text))
        .fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
    let raw = if hits == 0 { 0.0 } else { sum / hits as f64 };
    ((raw + 1.0) / 2.0 + alpha).clamp(0.0, 1.0)
}

pub fn block_scores(
    tokens: &[Token],
    blocks: &[LogicalBlock],
    lexicon: &SentimentLexicon,
    alpha: f64,
) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| block_sentiment(&tokens[b.start..b.end], lexicon, alpha))
        .collect()
}

/// Narrative position of a block: `index / (count - 1)`, 0 for one block.
pub fn block_position(block_index: usize, block_count: usize) -> f64 {
    if block_count <= 1 {
        0.0
    } else {
        block_index as f64 / (block_count - 1) as f64
    }
}

/// Per-block interaction intensity of every core pair in one book.
///
/// A co-mention (two mentions within the window) is attributed to the block
/// of its earlier mention; a block's intensity is the count over the block
/// and its two neighbours, divided by the largest such count over all
/// pairs and blocks of the book.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMap {
    block_count: usize,
    pairs: BTreeMap<(String, String), Vec<f64>>,
}

impl InteractionMap {
    pub fn build(
        core: &CoreCharacterSet,
        profiles: &[CharacterProfile],
        window: usize,
        block_size: usize,
        block_count: usize,
    ) -> Self {
        let mentions = |name: &str| {
            profiles
                .iter()
                .find(|p| p.canonical_name == name)
                .map(|p| p.mentions.as_slice())
                .unwrap_or(&[])
        };
        let mut raw = BTreeMap::new();
        for (a, b) in core.pairs() {
            let counts =
                block_comentions(mentions(&a), mentions(&b), window, block_size, block_count);
            raw.insert((a, b), counts);
        }
        Self::from_block_counts(raw, block_count)
    }

    /// Builds the map from per-block co-mention counts.
    pub fn from_block_counts(
        counts: BTreeMap<(String, String), Vec<usize>>,
        block_count: usize,
    ) -> Self {
        let neighbourhood: BTreeMap<_, Vec<usize>> = counts
            .into_iter()
            .map(|(pair, c)| {
                let summed = (0..block_count)
                    .map(|k| {
                        let lo = k.saturating_sub(1);
                        let hi = (k + 1).min(block_count - 1);
                        (lo..=hi).map(|j| c.get(j).copied().unwrap_or(0)).sum()
                    })
                    .collect();
                (pair, summed)
            })
            .collect();
        let max = neighbourhood
            .values()
            .flat_map(|v| v.iter().copied())
            .max()
            .unwrap_or(0);
        let pairs = neighbourhood
            .into_iter()
            .map(|(pair, v)| {
                let w = v
                    .into_iter()
                    .map(|x| if max == 0 { 0.0 } else { x as f64 / max as f64 })
                    .collect();
                (pair, w)
            })
            .collect();
        InteractionMap { block_count, pairs }
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&String, &String)> {
        self.pairs.keys().map(|(a, b)| (a, b))
    }

    /// Per-block intensities for a pair, in either order.
    pub fn pair_intensities(&self, a: &str, b: &str) -> Option<&[f64]> {
        let (x, y) = crate::characters::ordered(a, b);
        self.pairs
            .get(&(x.to_string(), y.to_string()))
            .map(Vec::as_slice)
    }

    /// Intensity of `pair` around `block`, 0 for unknown pairs or blocks.
    pub fn interaction_intensity(&self, block: usize, a: &str, b: &str) -> f64 {
        self.pair_intensities(a, b)
            .and_then(|v| v.get(block).copied())
            .unwrap_or(0.0)
    }
}

fn block_comentions(
    a: &[usize],
    b: &[usize],
    window: usize,
    block_size: usize,
    block_count: usize,
) -> Vec<usize> {
    let mut counts = vec![0; block_count];
    let bs = block_size.max(1);
    let mut tally = |pos: usize, n: usize| {
        if n > 0 {
            let k = (pos / bs).min(block_count.saturating_sub(1));
            if let Some(c) = counts.get_mut(k) {
                *c += n;
            }
        }
    };
    // Pairs led by an `a` mention (b at or after it) and pairs led by a `b`
    // mention (a strictly after it); together every pair once.
    for &i in a {
        let lo = b.partition_point(|&j| j < i);
        let hi = b.partition_point(|&j| j <= i + window);
        tally(i, hi - lo);
    }
    for &j in b {
        let lo = a.partition_point(|&i| i <= j);
        let hi = a.partition_point(|&i| i <= j + window);
        tally(j, hi - lo);
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), count_within(a, b, window));
    counts
}

/// Sentiment signal of one pair over its interacting blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSignal {
    pub block_count: usize,
    /// Interacting block indices, ascending.
    pub blocks: Vec<usize>,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl PairSignal {
    pub fn new(intensities: &[f64], scores: &[f64], smoothing_radius: usize) -> Self {
        let blocks: Vec<usize> = (0..scores.len())
            .filter(|&k| intensities.get(k).copied().unwrap_or(0.0) > 0.0)
            .collect();
        let raw: Vec<f64> = blocks.iter().map(|&k| scores[k]).collect();
        let intensity = blocks.iter().map(|&k| intensities[k]).collect();
        PairSignal {
            block_count: scores.len(),
            smoothed: moving_average(&raw, smoothing_radius),
            blocks,
            raw,
            intensity,
        }
    }

    /// Block context for secondary-pivot resampling.
    pub fn context(&self) -> BlockContext {
        BlockContext {
            block_count: self.block_count,
            blocks: self
                .blocks
                .iter()
                .zip(&self.raw)
                .zip(&self.smoothed)
                .map(|((&block_index, &sentiment), &smoothed)| ContextBlock {
                    block_index,
                    sentiment,
                    smoothed,
                })
                .collect(),
        }
    }
}

/// Centered moving average, truncated at the ends.
pub fn moving_average(values: &[f64], radius: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Indices of local maxima. Each plateau of equal values that is higher
/// than both bounding neighbours (missing neighbours count as lower)
/// yields its leftmost index.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && (values[j + 1] - values[i]).abs() <= PLATEAU_EPS {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == values.len() || values[j + 1] < values[i];
        if left_lower && right_lower {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Pivot points of one pair: local maxima of the smoothed sentiment over
/// interacting blocks, at most `pp_max` of them (strongest interaction
/// first), returned in narrative order.
pub fn detect_pivots(
    signal: &PairSignal,
    pair: (&str, &str),
    cfg: &SentimentConfig,
) -> Result<Vec<PivotPoint>> {
    if signal.blocks.is_empty() {
        return Err(Error::NoPivots(pair.0.to_string(), pair.1.to_string()));
    }
    let mut picks = local_maxima(&signal.smoothed);
    picks.sort_by(|&x, &y| {
        signal.intensity[y]
            .total_cmp(&signal.intensity[x])
            .then(x.cmp(&y))
    });
    picks.truncate(cfg.pp_max);
    picks.sort_unstable();
    let participants = vec![pair.0.to_string(), pair.1.to_string()];
    Ok(picks
        .into_iter()
        .map(|i| {
            let block = signal.blocks[i];
            PivotPoint {
                block_index: block,
                position: block_position(block, signal.block_count),
                sentiment: signal.raw[i],
                participants: participants.clone(),
                occurrence_weight: signal.intensity[i],
            }
        })
        .collect())
}

/// Pivots found for one character pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPivots {
    pub pair: (String, String),
    pub pivots: Vec<PivotPoint>,
}

impl PairPivots {
    pub fn total_weight(&self) -> f64 {
        self.pivots.iter().map(|p| p.occurrence_weight).sum()
    }
}

/// The pair whose pivots carry the most occurrence weight; ties go to the
/// lexicographically smaller pair.
pub fn predominant_pair(candidates: &[PairPivots]) -> Option<&PairPivots> {
    candidates
        .iter()
        .filter(|c| !c.pivots.is_empty())
        .fold(None, |best: Option<&PairPivots>, c| match best {
            Some(b) if b.total_weight() > c.total_weight() => Some(b),
            Some(b) if b.total_weight() == c.total_weight() && b.pair <= c.pair => Some(b),
            _ => Some(c),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::tokenize;

    fn lexicon() -> SentimentLexicon {
        SentimentLexicon::parse("love\t0.8\njoy\t0.6\nhate\t-0.9\n").unwrap()
    }

    #[test]
    fn block_sentiment_examples() {
        let lex = lexicon();
        let sv = block_sentiment(&tokenize("love and joy today"), &lex, 0.0);
        assert!((sv - 0.85).abs() < 1e-12);
        assert_eq!(block_sentiment(&tokenize("nothing here"), &lex, 0.0), 0.5);
        let sv = block_sentiment(&tokenize("I hate it"), &lex, 0.0);
        assert!((sv - 0.05).abs() < 1e-12);
        assert_eq!(block_sentiment(&tokenize("love love"), &lex, 0.1), 1.0);
        assert_eq!(
            block_sentiment(&tokenize("anything"), &SentimentLexicon::new(), 0.0),
            0.5
        );
    }

    #[test]
    fn config_validation() {
        assert!(SentimentConfig::default().validate().is_ok());
        let bad = SentimentConfig {
            alpha: 0.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SentimentConfig {
            pp_max: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn local_maxima_examples() {
        assert_eq!(local_maxima(&[0.4, 0.7, 0.5, 0.6, 0.3]), vec![1, 3]);
        assert_eq!(local_maxima(&[0.5; 5]), vec![0]);
        assert_eq!(local_maxima(&[0.1, 0.2, 0.3]), vec![2]);
        assert_eq!(local_maxima(&[0.3, 0.6, 0.6, 0.2]), vec![1]);
        assert!(local_maxima(&[]).is_empty());
    }

    fn signal(values: &[f64]) -> PairSignal {
        PairSignal {
            block_count: values.len(),
            blocks: (0..values.len()).collect(),
            raw: values.to_vec(),
            smoothed: values.to_vec(),
            intensity: vec![1.0; values.len()],
        }
    }

    #[test]
    fn detect_pivots_uses_maxima_and_raw_scores() {
        let pivots = detect_pivots(
            &signal(&[0.4, 0.7, 0.5, 0.6, 0.3]),
            ("A", "B"),
            &SentimentConfig::default(),
        )
        .unwrap();
        let blocks: Vec<usize> = pivots.iter().map(|p| p.block_index).collect();
        assert_eq!(blocks, [1, 3]);
        assert_eq!(pivots[0].sentiment, 0.7);
        assert_eq!(pivots[1].position, 0.75);
        assert_eq!(pivots[0].participants, ["A", "B"]);

        let pivots =
            detect_pivots(&signal(&[0.5; 5]), ("A", "B"), &SentimentConfig::default()).unwrap();
        assert_eq!(pivots.len(), 1);
        assert_eq!(pivots[0].block_index, 0);

        let empty = PairSignal::new(&[0.0; 4], &[0.5; 4], 1);
        assert!(matches!(
            detect_pivots(&empty, ("A", "B"), &SentimentConfig::default()),
            Err(Error::NoPivots(..))
        ));
    }

    #[test]
    fn pp_max_keeps_strongest_interactions() {
        let mut s = signal(&[0.9, 0.1, 0.8, 0.1, 0.7, 0.1, 0.6]);
        s.intensity = vec![0.2, 0.1, 1.0, 0.1, 0.5, 0.1, 0.9];
        let cfg = SentimentConfig {
            pp_max: 2,
            ..Default::default()
        };
        let pivots = detect_pivots(&s, ("A", "B"), &cfg).unwrap();
        let blocks: Vec<usize> = pivots.iter().map(|p| p.block_index).collect();
        assert_eq!(blocks, [2, 6]);
    }

    #[test]
    fn smoothing_restricted_to_interacting_blocks() {
        let intens = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let scores = [0.9, 0.2, 0.4, 0.99, 0.6, 0.1];
        let s = PairSignal::new(&intens, &scores, 1);
        assert_eq!(s.blocks, [1, 2, 4]);
        assert!((s.smoothed[0] - 0.3).abs() < 1e-12);
        assert!((s.smoothed[1] - 0.4).abs() < 1e-12);
        assert!((s.smoothed[2] - 0.5).abs() < 1e-12);
        let ctx = s.context();
        assert_eq!(ctx.blocks.len(), 3);
        assert_eq!(ctx.block_count, 6);
    }

    fn mentions_in(block: usize, n: usize, offset: usize) -> Vec<usize> {
        (0..n).map(|k| block * 250 + offset + k * 20).collect()
    }

    #[test]
    fn intensity_peaks_at_densest_region() {
        let mut sulu = Vec::new();
        let mut dilip = Vec::new();
        let mut bhag = Vec::new();
        for (block, n) in [(10, 3), (40, 5), (61, 2), (62, 9), (63, 2), (80, 4)] {
            sulu.extend(mentions_in(block, n, 0));
            dilip.extend(mentions_in(block, n, 5));
        }
        sulu.extend(mentions_in(92, 8, 0));
        bhag.extend(mentions_in(92, 8, 7));
        sulu.sort_unstable();
        let profiles = vec![
            CharacterProfile {
                canonical_name: "Sulu".into(),
                mention_count: sulu.len(),
                per_block_counts: Default::default(),
                mentions: sulu,
            },
            CharacterProfile {
                canonical_name: "Dilip".into(),
                mention_count: dilip.len(),
                per_block_counts: Default::default(),
                mentions: dilip,
            },
            CharacterProfile {
                canonical_name: "Bhagvantrao".into(),
                mention_count: bhag.len(),
                per_block_counts: Default::default(),
                mentions: bhag,
            },
        ];
        let core = CoreCharacterSet {
            members: ["Sulu", "Dilip", "Bhagvantrao"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            fallback: false,
        };
        let map = InteractionMap::build(&core, &profiles, 50, 250, 120);
        let w = map.pair_intensities("Sulu", "Dilip").unwrap();
        let argmax = (0..w.len())
            .max_by(|&x, &y| w[x].total_cmp(&w[y]).then(y.cmp(&x)))
            .unwrap();
        assert_eq!(argmax, 62);
        assert_eq!(map.interaction_intensity(62, "Dilip", "Sulu"), 1.0);
        assert_eq!(map.interaction_intensity(30, "Dilip", "Sulu"), 0.0);
        assert!(map.interaction_intensity(92, "Sulu", "Bhagvantrao") > 0.0);
        assert_eq!(map.interaction_intensity(92, "Dilip", "Bhagvantrao"), 0.0);
        assert!(map.interaction_intensity(61, "Sulu", "Dilip") > 0.0);
    }

    fn pair_pivots(a: &str, b: &str, weights: &[f64]) -> PairPivots {
        PairPivots {
            pair: (a.to_string(), b.to_string()),
            pivots: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| PivotPoint {
                    block_index: i,
                    position: i as f64 / 10.0,
                    sentiment: 0.5,
                    participants: vec![a.to_string(), b.to_string()],
                    occurrence_weight: w,
                })
                .collect(),
        }
    }

    #[test]
    fn predominant_pair_by_total_weight() {
        let c = vec![
            pair_pivots("A", "C", &[1.1]),
            pair_pivots("A", "B", &[2.0, 2.2]),
        ];
        assert_eq!(predominant_pair(&c).unwrap().pair.1, "B");
        let single = vec![pair_pivots("A", "B", &[0.3])];
        assert_eq!(predominant_pair(&single).unwrap().pair.1, "B");
        let tied = vec![pair_pivots("B", "C", &[1.0]), pair_pivots("A", "C", &[1.0])];
        assert_eq!(predominant_pair(&tied).unwrap().pair.0, "A");
        assert!(predominant_pair(&[]).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_in_unit_interval(words in proptest::collection::vec("[a-z]{1,6}", 0..60), alpha in 0.0f64..=0.1) {
                let lex = SentimentLexicon::parse("love\t0.8\njoy\t0.6\nhate\t-0.9\nab\t1\nb\t-1\n").unwrap();
                let text = words.join(" ");
                let sv = block_sentiment(&tokenize(&text), &lex, alpha);
                prop_assert!((0.0..=1.0).contains(&sv));
            }

            #[test]
            fn polarity_shift_moves_raw_score(
                polarities in proptest::collection::vec(-0.5f64..0.5, 1..8),
                shift in -0.4f64..0.4,
            ) {
                let mut lex = SentimentLexicon::new();
                let mut shifted = SentimentLexicon::new();
                let mut text = Vec::new();
                for (i, p) in polarities.iter().enumerate() {
                    let w = format!("w{i}");
                    lex.insert(&w, *p).unwrap();
                    shifted.insert(&w, p + shift).unwrap();
                    text.push(w);
                }
                let tokens = tokenize(&text.join(" "));
                let base = block_sentiment(&tokens, &lex, 0.0);
                let moved = block_sentiment(&tokens, &shifted, 0.0);
                prop_assert!(((moved - base) - shift / 2.0).abs() < 1e-9);
            }

            #[test]
            fn pivots_are_ordered_and_bounded(
                values in proptest::collection::vec(0.0f64..=1.0, 1..40),
                pp_max in 2usize..8,
            ) {
                let intens: Vec<f64> = values.iter().map(|v| v * 0.5 + 0.1).collect();
                let s = PairSignal::new(&intens, &values, 1);
                let cfg = SentimentConfig { pp_max, ..Default::default() };
                let pivots = detect_pivots(&s, ("A", "B"), &cfg).unwrap();
                prop_assert!(!pivots.is_empty() && pivots.len() <= pp_max);
                for w in pivots.windows(2) {
                    prop_assert!(w[0].position < w[1].position);
                }
                prop_assert!(pivots.iter().all(|p| (0.0..=1.0).contains(&p.sentiment)));
            }
        }
    }
}
