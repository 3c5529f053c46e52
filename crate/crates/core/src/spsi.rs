//! Sentiment Progression Similarity Indicator (SPSI) and the all-pairs
//! similarity matrix.
//!
//! For two equal-length series `s1`, `s2`:
//!
//! ```text
//! RS(i) = s1(i) + s2(i)
//! PS    = sum(s1) / sum(RS)
//! CF(i) = (PS * RS(i) - s1(i)) / sqrt(RS(i) * PS * (1 - PS))
//! N(i)  = sqrt(RS(i))
//! SD    = sum(CF(i)^2 * N(i)) / sum(N(i))
//! SPSI  = 1 / (1 + ln(1 + SD))
//! ```
//!
//! Points with `RS(i) = 0` carry no mass and contribute `CF = N = 0`.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{align_lengths_with, BlockContext, SentimentSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsiBreakdown {
    /// Combined series.
    pub rs: Vec<f64>,
    /// Probable sentiment, the first series' share of the combined mass.
    pub ps: f64,
    /// Per-point correction factors.
    pub cf: Vec<f64>,
    /// Per-point normalization factors `sqrt(RS(i))`.
    pub n: Vec<f64>,
    /// Sentiment distance.
    pub sd: f64,
    pub spsi: f64,
}

pub fn combined_series(s1: &[f64], s2: &[f64]) -> Result<Vec<f64>> {
    if s1.len() != s2.len() {
        return Err(Error::LengthMismatch(s1.len(), s2.len()));
    }
    Ok(s1.iter().zip(s2).map(|(a, b)| a + b).collect())
}

/// `sum(s1) / sum(rs)`; fails with [`Error::DegenerateSeries`] when the
/// combined series has no mass.
pub fn probable_sentiment(s1: &[f64], rs: &[f64]) -> Result<f64> {
    let total: f64 = rs.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(s1.iter().sum::<f64>() / total)
}

/// Per-point correction factors. When `ps` is 0 or 1 one series has no
/// mass at all; every point then sits exactly at its expected share and
/// the factors are 0.
pub fn correction_factors(s1: &[f64], rs: &[f64], ps: f64) -> Vec<f64> {
    let spread = ps * (1.0 - ps);
    s1.iter()
        .zip(rs)
        .map(|(&x, &r)| {
            if r <= 0.0 || spread <= 0.0 {
                0.0
            } else {
                (ps * r - x) / (r * spread).sqrt()
            }
        })
        .collect()
}

pub fn normalization_factors(rs: &[f64]) -> Vec<f64> {
    rs.iter().map(|&r| r.max(0.0).sqrt()).collect()
}

/// Weighted mean of squared correction factors, weights `sqrt(RS(i))`.
pub fn sentiment_distance(cf: &[f64], rs: &[f64]) -> Result<f64> {
    if cf.len() != rs.len() {
        return Err(Error::LengthMismatch(cf.len(), rs.len()));
    }
    let n = normalization_factors(rs);
    let weight: f64 = n.iter().sum();
    if weight == 0.0 {
        return Ok(0.0);
    }
    Ok(cf.iter().zip(&n).map(|(c, w)| c * c * w).sum::<f64>() / weight)
}

/// Maps a sentiment distance onto `(0, 1]`; decreasing in `sd`.
pub fn spsi_from_distance(sd: f64) -> f64 {
    1.0 / (1.0 + (1.0 + sd).ln())
}

/// Every intermediate quantity, computed with `s1` as the first series.
pub fn spsi_breakdown(s1: &[f64], s2: &[f64]) -> Result<SpsiBreakdown> {
    let rs = combined_series(s1, s2)?;
    let n = normalization_factors(&rs);
    let ps = match probable_sentiment(s1, &rs) {
        Ok(ps) => ps,
        // Two all-zero series are the same pattern.
        Err(Error::DegenerateSeries) => {
            return Ok(SpsiBreakdown {
                cf: vec![0.0; rs.len()],
                rs,
                ps: 0.5,
                n,
                sd: 0.0,
                spsi: 1.0,
            })
        }
        Err(e) => return Err(e),
    };
    let cf = correction_factors(s1, &rs, ps);
    let sd = sentiment_distance(&cf, &rs)?;
    Ok(SpsiBreakdown {
        spsi: spsi_from_distance(sd),
        rs,
        ps,
        cf,
        n,
        sd,
    })
}

fn canonical_order(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// SPSI of two equal-length value sequences.
///
/// The pair is evaluated in a canonical order so the result is bit-for-bit
/// symmetric.
pub fn spsi(s1: &[f64], s2: &[f64]) -> Result<f64> {
    let (first, second) = match canonical_order(s1, s2) {
        Ordering::Greater => (s2, s1),
        _ => (s1, s2),
    };
    Ok(spsi_breakdown(first, second)?.spsi)
}

/// SPSI of two series of possibly different lengths, aligned first.
pub fn spsi_series(a: &SentimentSeries, b: &SentimentSeries) -> Result<f64> {
    spsi_series_with(a, None, b, None)
}

pub fn spsi_series_with(
    a: &SentimentSeries,
    a_context: Option<&BlockContext>,
    b: &SentimentSeries,
    b_context: Option<&BlockContext>,
) -> Result<f64> {
    let (x, y) = align_lengths_with(a, a_context, b, b_context)?;
    spsi(&x.values(), &y.values())
}

/// Square similarity matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from rows; does not require symmetry.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "expected {n}x{n} values for {n} ids"
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite value".to_string()));
        }
        Ok(SimilarityMatrix {
            ids,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(ids: Vec<String>) -> Self {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        SimilarityMatrix { ids, values }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        let n = self.ids.len();
        self.values[i * n + j] = v;
        self.values[j * n + i] = v;
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// A copy whose upper triangle mirrors the lower one.
    pub fn mirror_lower(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            for j in 0..i {
                out.set_symmetric(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Off-diagonal entries `(i, j)` with `i > j`.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// CSV with a header row and a leading id column, 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("book_id");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.len() {
                out.push_str(&format!(",{:.6}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            if record.get(0) != ids.get(r).map(String::as_str) {
                return Err(Error::InvalidMatrix(format!(
                    "row {} label {:?} does not match column order",
                    r + 1,
                    record.get(0).unwrap_or("")
                )));
            }
            let row = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::InvalidMatrix(format!("row {}: bad value {v:?}", r + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(ids, rows)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// A series with optional block context for secondary pivots.
#[derive(Debug, Clone, Copy)]
pub struct SeriesRef<'a> {
    pub series: &'a SentimentSeries,
    pub context: Option<&'a BlockContext>,
}

impl<'a> From<&'a SentimentSeries> for SeriesRef<'a> {
    fn from(series: &'a SentimentSeries) -> Self {
        SeriesRef {
            series,
            context: None,
        }
    }
}

/// All-pairs SPSI, each pair aligned on its own. The diagonal is exactly 1.
pub fn spsi_matrix<'a, I, S>(series: I) -> Result<SimilarityMatrix>
where
    I: IntoIterator<Item = S>,
    S: Into<SeriesRef<'a>>,
{
    let items: Vec<SeriesRef<'a>> = series.into_iter().map(Into::into).collect();
    if items.len() < 2 {
        return Err(Error::InvalidMatrix(format!(
            "need at least 2 series, got {}",
            items.len()
        )));
    }
    let ids: Vec<String> = items.iter().map(|s| s.series.book_id.clone()).collect();
    let pairs: Vec<(usize, usize)> = (0..items.len())
        .flat_map(|i| (i + 1..items.len()).map(move |j| (i, j)))
        .collect();
    let scores = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (items[i], items[j]);
            spsi_series_with(a.series, a.context, b.series, b.context).map_err(|e| Error::Pair {
                left: ids[i].clone(),
                right: ids[j].clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut matrix = SimilarityMatrix::identity(ids);
    for (&(i, j), v) in pairs.iter().zip(scores) {
        matrix.set_symmetric(i, j, v);
    }
    Ok(matrix)
}
