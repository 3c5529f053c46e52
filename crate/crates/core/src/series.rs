//! Sentiment progression series and length equalization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pivots::{block_position, PivotPoint};

/// Length-difference ratio above which plain gap interpolation gives way to
/// secondary pivots.
pub const INTERPOLATION_LIMIT: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Primary,
    Interpolated,
    SecondaryPivot,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Primary => "primary",
            Provenance::Interpolated => "interpolated",
            Provenance::SecondaryPivot => "secondary-pivot",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "primary" => Some(Provenance::Primary),
            "interpolated" => Some(Provenance::Interpolated),
            "secondary-pivot" => Some(Provenance::SecondaryPivot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub position: f64,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentSeries {
    pub book_id: String,
    pub points: Vec<SeriesPoint>,
}

impl SentimentSeries {
    /// Primary points at evenly spaced positions `i / (n - 1)`.
    pub fn from_values(book_id: impl Into<String>, values: &[f64]) -> Result<Self> {
        let n = values.len();
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &value)| SeriesPoint {
                position: block_position(i, n),
                value,
                provenance: Provenance::Primary,
            })
            .collect();
        let series = SentimentSeries {
            book_id: book_id.into(),
            points,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// Checks the comparable-series invariants: at least two points,
    /// strictly increasing positions, values in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "{}: {} point(s), need at least 2",
                self.book_id,
                self.points.len()
            )));
        }
        for p in &self.points {
            if !p.position.is_finite() || !(0.0..=1.0).contains(&p.value) {
                return Err(Error::InvalidSeries(format!(
                    "{}: point ({}, {}) out of range",
                    self.book_id, p.position, p.value
                )));
            }
        }
        if self
            .points
            .windows(2)
            .any(|w| w[0].position >= w[1].position)
        {
            return Err(Error::InvalidSeries(format!(
                "{}: positions not strictly increasing",
                self.book_id
            )));
        }
        Ok(())
    }

    /// Writes `position,value,provenance` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,value,provenance\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.position,
                p.value,
                p.provenance.as_str()
            ));
        }
        out
    }

    /// Reads `position,value[,provenance]` rows; a header row is optional.
    pub fn from_csv(book_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            let field = |k: usize| {
                record
                    .get(k)
                    .ok_or_else(|| Error::Csv(format!("row {}: missing column {}", i + 1, k + 1)))
            };
            let number = |k: usize| -> Result<f64> {
                let raw = field(k)?;
                raw.parse()
                    .map_err(|_| Error::Csv(format!("row {}: invalid number {raw:?}", i + 1)))
            };
            let provenance = match record.get(2).filter(|s| !s.is_empty()) {
                Some(s) => Provenance::parse(s).ok_or_else(|| {
                    Error::Csv(format!("row {}: unknown provenance {s:?}", i + 1))
                })?,
                None => Provenance::Primary,
            };
            points.push(SeriesPoint {
                position: number(0)?,
                value: number(1)?,
                provenance,
            });
        }
        let series = SentimentSeries {
            book_id: book_id.into(),
            points,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn load_csv(path: impl AsRef<Path>, book_id: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(book_id, &text)
    }
}

/// One pivot per point, in narrative order.
pub fn build_series(book_id: &str, pivots: &[PivotPoint]) -> Result<SentimentSeries> {
    if pivots.len() < 2 {
        return Err(Error::TooFewPivots(pivots.len()));
    }
    let mut points: Vec<SeriesPoint> = pivots
        .iter()
        .map(|p| SeriesPoint {
            position: p.position,
            value: p.sentiment,
            provenance: Provenance::Primary,
        })
        .collect();
    points.sort_by(|a, b| a.position.total_cmp(&b.position));
    let series = SentimentSeries {
        book_id: book_id.to_string(),
        points,
    };
    series.validate()?;
    Ok(series)
}

/// An interacting block of the book a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub block_index: usize,
    pub sentiment: f64,
    pub smoothed: f64,
}

/// Interacting blocks of the series' source pair, used to pick secondary
/// pivots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockContext {
    pub block_count: usize,
    pub blocks: Vec<ContextBlock>,
}

fn lerp(left: &SeriesPoint, right: &SeriesPoint, position: f64) -> f64 {
    let span = right.position - left.position;
    if span <= 0.0 {
        return left.value;
    }
    let t = (position - left.position) / span;
    left.value + t * (right.value - left.value)
}

/// Index `i` of the widest gap `(points[i], points[i + 1])`, earliest on ties.
fn widest_gap(points: &[SeriesPoint]) -> usize {
    let mut best = 0;
    let mut best_width = f64::NEG_INFINITY;
    for (i, w) in points.windows(2).enumerate() {
        let width = w[1].position - w[0].position;
        if width > best_width + 1e-12 {
            best = i;
            best_width = width;
        }
    }
    best
}

fn insert_midpoint(points: &mut Vec<SeriesPoint>, gap: usize) {
    let (left, right) = (points[gap], points[gap + 1]);
    let position = (left.position + right.position) / 2.0;
    points.insert(
        gap + 1,
        SeriesPoint {
            position,
            value: lerp(&left, &right, position),
            provenance: Provenance::Interpolated,
        },
    );
}

/// Fills the widest positional gap with a linearly interpolated midpoint,
/// `deficit` times.
pub fn interpolate_gaps(series: &SentimentSeries, deficit: usize) -> SentimentSeries {
    let mut points = series.points.clone();
    for _ in 0..deficit {
        let gap = widest_gap(&points);
        insert_midpoint(&mut points, gap);
    }
    SentimentSeries {
        book_id: series.book_id.clone(),
        points,
    }
}

/// Adds `deficit` points, preferring secondary pivots.
///
/// For each missing point the widest gap is located and, among interacting
/// blocks strictly inside it, the one with the highest smoothed sentiment
/// becomes a secondary pivot. Its value is the mean of its own sentiment and
/// the linear interpolation of the two bounding points at its position.
/// Gaps without a usable block get a plain interpolated midpoint.
pub fn resample_secondary(
    series: &SentimentSeries,
    context: Option<&BlockContext>,
    deficit: usize,
) -> SentimentSeries {
    let mut points = series.points.clone();
    for _ in 0..deficit {
        let gap = widest_gap(&points);
        let (left, right) = (points[gap], points[gap + 1]);
        let candidate = context.and_then(|ctx| {
            ctx.blocks
                .iter()
                .map(|b| (b, block_position(b.block_index, ctx.block_count)))
                .filter(|(_, pos)| *pos > left.position && *pos < right.position)
                .fold(None, |best: Option<(&ContextBlock, f64)>, cur| match best {
                    Some(b) if b.0.smoothed >= cur.0.smoothed => Some(b),
                    _ => Some(cur),
                })
        });
        match candidate {
            Some((block, position)) => {
                let anchored = lerp(&left, &right, position);
                points.insert(
                    gap + 1,
                    SeriesPoint {
                        position,
                        value: ((block.sentiment + anchored) / 2.0).clamp(0.0, 1.0),
                        provenance: Provenance::SecondaryPivot,
                    },
                );
            }
            None => insert_midpoint(&mut points, gap),
        }
    }
    SentimentSeries {
        book_id: series.book_id.clone(),
        points,
    }
}

/// Grows `series` to `target` points, by interpolation when the length
/// difference ratio is within [`INTERPOLATION_LIMIT`] and through secondary
/// pivots beyond it.
pub fn stretch_to(
    series: &SentimentSeries,
    target: usize,
    context: Option<&BlockContext>,
) -> SentimentSeries {
    let n = series.len();
    if target <= n {
        return series.clone();
    }
    let ratio = (target - n) as f64 / target as f64;
    if ratio <= INTERPOLATION_LIMIT {
        interpolate_gaps(series, target - n)
    } else {
        resample_secondary(series, context, target - n)
    }
}

/// Brings two series to the length of the longer one without touching any
/// existing point.
pub fn align_lengths(
    a: &SentimentSeries,
    b: &SentimentSeries,
) -> Result<(SentimentSeries, SentimentSeries)> {
    align_lengths_with(a, None, b, None)
}

/// [`align_lengths`] with optional block contexts for secondary pivots.
pub fn align_lengths_with(
    a: &SentimentSeries,
    a_context: Option<&BlockContext>,
    b: &SentimentSeries,
    b_context: Option<&BlockContext>,
) -> Result<(SentimentSeries, SentimentSeries)> {
    a.validate()?;
    b.validate()?;
    let target = a.len().max(b.len());
    Ok((
        stretch_to(a, target, a_context),
        stretch_to(b, target, b_context),
    ))
}
