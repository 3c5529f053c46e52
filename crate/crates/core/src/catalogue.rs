//! The searchable index: cluster representatives as index points, books
//! ordered by distance to their representative.

use std::cmp::Ordering;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{mean_series, Cluster, DynamicThreshold};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::series::SentimentSeries;
use crate::spsi::spsi_series;

pub const FORMAT_VERSION: &str = "1.0";
const FORMAT_MAJOR: u32 = 1;

/// Settings the catalogue was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub block_size: usize,
    pub max_prime: usize,
    pub min_mentions: usize,
    pub window: usize,
    pub core_threshold: f64,
    pub alpha: f64,
    pub smoothing_radius: usize,
    pub pp_max: usize,
    pub threshold: DynamicThreshold,
    /// Threshold value actually used for clustering.
    pub resolved_threshold: f64,
}

impl ConfigSnapshot {
    pub fn new(cfg: &PipelineConfig, resolved_threshold: f64) -> Self {
        let threshold = match cfg.threshold {
            DynamicThreshold::Fixed { value } => DynamicThreshold::Fixed {
                value: quantize(value),
            },
            DynamicThreshold::Adaptive { stddev_weight } => DynamicThreshold::Adaptive {
                stddev_weight: quantize(stddev_weight),
            },
        };
        ConfigSnapshot {
            block_size: cfg.block_size,
            max_prime: cfg.max_prime,
            min_mentions: cfg.min_mentions,
            window: cfg.window,
            core_threshold: quantize(cfg.core_threshold),
            alpha: quantize(cfg.sentiment.alpha),
            smoothing_radius: cfg.sentiment.smoothing_radius,
            pp_max: cfg.sentiment.pp_max,
            threshold,
            resolved_threshold: quantize(resolved_threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueCluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
    pub representative: SentimentSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub book_id: String,
    pub title: String,
    pub author: Option<String>,
    pub cluster_id: usize,
    /// `1 - spsi(series, representative)`.
    pub distance: f64,
    pub series: SentimentSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalogue {
    pub format_version: String,
    pub config: ConfigSnapshot,
    pub clusters: Vec<CatalogueCluster>,
    /// Grouped by cluster, each group sorted by distance then title.
    pub entries: Vec<CatalogueEntry>,
}

/// A book handed to [`build_catalogue`].
#[derive(Debug, Clone, Copy)]
pub struct BookRecord<'a> {
    pub book_id: &'a str,
    pub title: &'a str,
    pub author: Option<&'a str>,
    pub series: &'a SentimentSeries,
}

/// Rounds to 9 significant digits so the JSON text round-trips exactly.
pub fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn quantize_series(s: &SentimentSeries) -> SentimentSeries {
    let mut s = s.clone();
    for p in &mut s.points {
        p.position = quantize(p.position);
        p.value = quantize(p.value);
    }
    s
}

fn by_title(a_title: &str, a_id: &str, b_title: &str, b_id: &str) -> Ordering {
    a_title.cmp(b_title).then_with(|| a_id.cmp(b_id))
}

pub fn build_catalogue(
    clusters: &[Cluster],
    books: &[BookRecord<'_>],
    config: ConfigSnapshot,
) -> Result<Catalogue> {
    let find = |id: &str| {
        books
            .iter()
            .find(|b| b.book_id == id)
            .ok_or_else(|| Error::UnknownBook(id.to_string()))
    };
    let mut out_clusters = Vec::with_capacity(clusters.len());
    let mut entries = Vec::with_capacity(books.len());
    let mut ordered: Vec<&Cluster> = clusters.iter().collect();
    ordered.sort_by_key(|c| c.cluster_id);
    for cluster in ordered {
        let members: Vec<&BookRecord> = cluster
            .members
            .iter()
            .map(|id| find(id))
            .collect::<Result<_>>()?;
        let rep_id = format!("cluster-{}", cluster.cluster_id);
        let representative = match &cluster.representative {
            Some(r) => SentimentSeries {
                book_id: rep_id,
                points: r.points.clone(),
            },
            None => {
                let series: Vec<&SentimentSeries> = members.iter().map(|b| b.series).collect();
                mean_series(&rep_id, &series)?
            }
        };
        let representative = quantize_series(&representative);
        let mut group = Vec::with_capacity(members.len());
        for b in &members {
            let series = quantize_series(b.series);
            let distance = quantize((1.0 - spsi_series(&series, &representative)?).max(0.0));
            group.push(CatalogueEntry {
                book_id: b.book_id.to_string(),
                title: b.title.to_string(),
                author: b.author.map(str::to_string),
                cluster_id: cluster.cluster_id,
                distance,
                series,
            });
        }
        group.sort_by(|x, y| {
            x.distance
                .total_cmp(&y.distance)
                .then_with(|| by_title(&x.title, &x.book_id, &y.title, &y.book_id))
        });
        entries.extend(group);
        out_clusters.push(CatalogueCluster {
            cluster_id: cluster.cluster_id,
            members: cluster.members.clone(),
            representative,
        });
    }
    Ok(Catalogue {
        format_version: FORMAT_VERSION.to_string(),
        config,
        clusters: out_clusters,
        entries,
    })
}

impl Catalogue {
    pub fn entry(&self, book_id: &str) -> Option<&CatalogueEntry> {
        self.entries.iter().find(|e| e.book_id == book_id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: String,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| format_error(text, &e))?;
        let major = header
            .format_version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u32>().ok());
        if major != Some(FORMAT_MAJOR) {
            return Err(Error::Version {
                found: header.format_version,
                expected: FORMAT_MAJOR,
            });
        }
        let cat: Catalogue = serde_json::from_str(text).map_err(|e| format_error(text, &e))?;
        cat.check()?;
        Ok(cat)
    }

    fn check(&self) -> Result<()> {
        for e in &self.entries {
            if !self.clusters.iter().any(|c| c.cluster_id == e.cluster_id) {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("entry {} names missing cluster {}", e.book_id, e.cluster_id),
                });
            }
            if e.distance.is_nan() || e.distance < 0.0 {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("entry {} has negative distance", e.book_id),
                });
            }
        }
        Ok(())
    }

    /// Writes to a temporary file beside `path`, then renames it over
    /// `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let text = self.to_json()?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(text.as_bytes())
            .map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn format_error(text: &str, err: &serde_json::Error) -> Error {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line().saturating_sub(1))
        .map(str::len)
        .sum();
    Error::Format {
        offset: (line_start + err.column().saturating_sub(1)).min(text.len()),
        message: err.to_string(),
    }
}

/// What to search for.
#[derive(Debug, Clone)]
pub enum Query<'a> {
    Book(&'a str),
    Series(&'a SentimentSeries),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub book_id: String,
    pub title: String,
    pub cluster_id: usize,
    pub spsi: f64,
}

/// Top `k` books by SPSI against the query, ties by title. A book query
/// excludes the book itself unless `include_self` is set.
pub fn search_similar(
    catalogue: &Catalogue,
    query: Query<'_>,
    k: usize,
    include_self: bool,
) -> Result<Vec<SearchHit>> {
    let (series, skip) = match query {
        Query::Book(id) => {
            let entry = catalogue
                .entry(id)
                .ok_or_else(|| Error::UnknownBook(id.to_string()))?;
            (&entry.series, (!include_self).then_some(id))
        }
        Query::Series(s) => {
            s.validate()?;
            (s, None)
        }
    };
    let mut hits = catalogue
        .entries
        .iter()
        .filter(|e| Some(e.book_id.as_str()) != skip)
        .map(|e| {
            Ok(SearchHit {
                book_id: e.book_id.clone(),
                title: e.title.clone(),
                cluster_id: e.cluster_id,
                spsi: spsi_series(series, &e.series)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(|a, b| {
        b.spsi
            .total_cmp(&a.spsi)
            .then_with(|| by_title(&a.title, &a.book_id, &b.title, &b.book_id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Cluster whose representative is most similar to `series`, ties by
/// smallest cluster id.
pub fn nearest_cluster(catalogue: &Catalogue, series: &SentimentSeries) -> Result<(usize, f64)> {
    series.validate()?;
    let mut best: Option<(usize, f64)> = None;
    for c in &catalogue.clusters {
        let s = spsi_series(series, &c.representative)?;
        best = match best {
            Some((id, v)) if v > s || (v == s && id < c.cluster_id) => Some((id, v)),
            _ => Some((c.cluster_id, s)),
        };
    }
    best.ok_or(Error::EmptyCatalogue)
}
