//! Metadata and summary baselines, and agreement scores against reference
//! labels.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{matrix_mode_linkage, resolve_threshold, Cluster, DynamicThreshold};
use crate::error::{Error, Result};
use crate::ingest::{tokenize, BookDocument};
use crate::spsi::SimilarityMatrix;

/// Sparse TF-IDF weights of one book.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfidfVector {
    pub book_id: String,
    pub weights: BTreeMap<String, f64>,
}

impl TfidfVector {
    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Raw term counts to TF-IDF with `idf = ln(N / df)`. Terms present in
/// every book get zero weight and are dropped.
pub fn tfidf(bags: &[(String, Vec<String>)]) -> Vec<TfidfVector> {
    let n = bags.len() as f64;
    let counts: Vec<BTreeMap<&str, usize>> = bags
        .iter()
        .map(|(_, terms)| {
            let mut m = BTreeMap::new();
            for t in terms {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for c in &counts {
        for term in c.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    bags.iter()
        .zip(&counts)
        .map(|((id, _), c)| TfidfVector {
            book_id: id.clone(),
            weights: c
                .iter()
                .filter_map(|(term, &tf)| {
                    let w = tf as f64 * (n / df[term] as f64).ln();
                    (w > 0.0).then(|| (term.to_string(), w))
                })
                .collect(),
        })
        .collect()
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    tokenize(text).into_iter().map(|t| t.text)
}

/// Baseline 1: title, author and genre words.
pub fn baseline1_vectors(docs: &[BookDocument]) -> Vec<TfidfVector> {
    let bags: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|d| {
            let mut bag: Vec<String> = words(&d.title).collect();
            if let Some(a) = &d.author {
                bag.extend(words(a));
            }
            for g in &d.metadata.genres {
                bag.extend(words(g));
            }
            (d.book_id.clone(), bag)
        })
        .collect();
    tfidf(&bags)
}

/// Baseline 2: summary words, or the full text when there is no summary
/// or `full_text` is set.
pub fn baseline2_vectors(docs: &[BookDocument], full_text: bool) -> Result<Vec<TfidfVector>> {
    let bags = docs
        .iter()
        .map(|d| {
            let summary = d
                .metadata
                .summary
                .as_deref()
                .filter(|s| !s.trim().is_empty());
            let bag: Vec<String> = match summary {
                Some(s) if !full_text => words(s).collect(),
                _ if !d.tokens.is_empty() => d.tokens.iter().map(|t| t.text.clone()).collect(),
                _ => return Err(Error::MissingText(d.book_id.clone())),
            };
            Ok((d.book_id.clone(), bag))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tfidf(&bags))
}

/// Cosine similarity; zero when either vector is empty.
pub fn cosine(a: &TfidfVector, b: &TfidfVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.weights.len() <= b.weights.len() {
        (a, b)
    } else {
        (b, a)
    };
    let dot: f64 = small
        .weights
        .iter()
        .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn cosine_matrix(vectors: &[TfidfVector]) -> SimilarityMatrix {
    let ids = vectors.iter().map(|v| v.book_id.clone()).collect();
    let mut m = SimilarityMatrix::identity(ids);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            m.set_symmetric(i, j, cosine(&vectors[i], &vectors[j]));
        }
    }
    m
}

/// Clusters a similarity matrix with average linkage and the given
/// threshold rule.
pub fn partition_from_similarity(
    matrix: &SimilarityMatrix,
    threshold: &DynamicThreshold,
) -> Result<(f64, Vec<Cluster>)> {
    let dt = resolve_threshold(matrix, threshold);
    Ok((dt, matrix_mode_linkage(matrix, dt)?))
}

/// How well a partition matches reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub method: String,
    pub book_count: usize,
    pub cluster_count: usize,
    /// Fraction of book pairs on which partition and labels agree
    /// (together in both, or apart in both).
    pub pairwise_agreement: f64,
    /// Fraction of books carrying their cluster's majority label.
    pub purity: f64,
    pub agreed_books: usize,
}

/// Scores `clusters` against `labels`. Every clustered book needs a label.
pub fn agreement(
    method: &str,
    clusters: &[Vec<String>],
    labels: &BTreeMap<String, String>,
) -> Result<AgreementReport> {
    let mut assigned: Vec<(usize, &str)> = Vec::new();
    let mut agreed = 0;
    for (ci, members) in clusters.iter().enumerate() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for id in members {
            let label = labels
                .get(id)
                .ok_or_else(|| Error::MissingLabel(id.clone()))?;
            *counts.entry(label).or_insert(0) += 1;
            assigned.push((ci, label));
        }
        agreed += counts.values().max().copied().unwrap_or(0);
    }
    let n = assigned.len();
    let mut same = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            if (assigned[i].0 == assigned[j].0) == (assigned[i].1 == assigned[j].1) {
                same += 1;
            }
        }
    }
    Ok(AgreementReport {
        method: method.to_string(),
        book_count: n,
        cluster_count: clusters.len(),
        pairwise_agreement: if pairs == 0 {
            1.0
        } else {
            same as f64 / pairs as f64
        },
        purity: if n == 0 {
            0.0
        } else {
            agreed as f64 / n as f64
        },
        agreed_books: agreed,
    })
}

pub fn cluster_members(clusters: &[Cluster]) -> Vec<Vec<String>> {
    clusters.iter().map(|c| c.members.clone()).collect()
}

/// Reads a `book_id,label` CSV; a header row is optional.
pub fn parse_labels(text: &str) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Csv(format!(
                "labels line {}: expected 2 fields, found {}",
                i + 1,
                record.len()
            )));
        }
        if i == 0 && &record[0] == "book_id" {
            continue;
        }
        out.insert(record[0].to_string(), record[1].to_string());
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_two_groups() -> BTreeMap<String, String> {
        (0..8)
            .map(|i| (format!("b{i}"), if i < 4 { "x" } else { "y" }.to_string()))
            .collect()
    }

    fn ids(range: std::ops::Range<usize>) -> Vec<String> {
        range.map(|i| format!("b{i}")).collect()
    }

    #[test]
    fn agreement_oracles() {
        let labels = labels_two_groups();
        let perfect = agreement("p", &[ids(0..4), ids(4..8)], &labels).unwrap();
        assert_eq!(perfect.pairwise_agreement, 1.0);
        assert_eq!(perfect.purity, 1.0);

        let singletons: Vec<Vec<String>> = (0..8).map(|i| ids(i..i + 1)).collect();
        let s = agreement("s", &singletons, &labels).unwrap();
        assert!((s.pairwise_agreement - 16.0 / 28.0).abs() < 1e-12);
        assert_eq!(s.purity, 1.0);

        let one = agreement("o", &[ids(0..8)], &labels).unwrap();
        assert!((one.pairwise_agreement - 12.0 / 28.0).abs() < 1e-12);
        assert_eq!(one.purity, 0.5);
        assert_eq!(one.agreed_books, 4);
    }

    #[test]
    fn missing_label_is_an_error() {
        let labels = labels_two_groups();
        assert!(matches!(
            agreement("m", &[vec!["zz".to_string()]], &labels),
            Err(Error::MissingLabel(id)) if id == "zz"
        ));
    }

    #[test]
    fn tfidf_and_cosine() {
        let bags = vec![
            (
                "a".to_string(),
                vec!["ship".into(), "ship".into(), "sea".into()],
            ),
            ("b".to_string(), vec!["ship".into(), "crew".into()]),
            ("c".to_string(), vec!["sea".into(), "crew".into()]),
        ];
        let v = tfidf(&bags);
        let idf = (3.0f64 / 2.0).ln();
        assert!((v[0].weights["ship"] - 2.0 * idf).abs() < 1e-12);
        assert!((cosine(&v[0], &v[0]) - 1.0).abs() < 1e-12);
        // a = (2, 1, 0), b = (1, 0, 1) over (ship, sea, crew), all idf equal.
        let expected = 2.0 / (5.0f64.sqrt() * 2.0f64.sqrt());
        assert!((cosine(&v[0], &v[1]) - expected).abs() < 1e-12);
        let m = cosine_matrix(&v);
        assert!(m.is_symmetric());
    }

    #[test]
    fn common_terms_vanish() {
        let bags = vec![
            ("a".to_string(), vec!["the".into()]),
            ("b".to_string(), vec!["the".into()]),
        ];
        let v = tfidf(&bags);
        assert!(v[0].weights.is_empty());
        assert_eq!(cosine(&v[0], &v[1]), 0.0);
    }

    #[test]
    fn baseline2_needs_text() {
        let mut d = BookDocument::from_text("x", "X", "");
        assert!(matches!(
            baseline2_vectors(&[d.clone()], false),
            Err(Error::MissingText(_))
        ));
        d.metadata.summary = Some("a summary".into());
        assert!(baseline2_vectors(&[d], false).is_ok());
    }

    #[test]
    fn labels_csv() {
        let l = parse_labels("book_id,label\nb1, x\nb2,y\n").unwrap();
        assert_eq!(l["b1"], "x");
        assert_eq!(l.len(), 2);
        assert!(parse_labels("b1\n").is_err());
    }
}
