//! Agglomerative clustering of sentiment progressions.
//!
//! Clusters start as singletons; the most similar pair is merged until no
//! pair of clusters is more similar than the dynamic threshold. Similarity
//! between merged clusters is either recomputed from representative series
//! ([`Linkage::Representative`]) or averaged over the original matrix
//! ([`Linkage::Average`]) when only a matrix is available.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{stretch_to, Provenance, SentimentSeries, SeriesPoint};
use crate::spsi::{spsi_series, SimilarityMatrix};

const THRESHOLD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DynamicThreshold {
    Fixed {
        value: f64,
    },
    /// `mean + stddev_weight * stddev` of the off-diagonal similarities.
    Adaptive {
        stddev_weight: f64,
    },
}

impl Default for DynamicThreshold {
    fn default() -> Self {
        DynamicThreshold::Adaptive { stddev_weight: 0.5 }
    }
}

impl DynamicThreshold {
    pub fn fixed(value: f64) -> Self {
        DynamicThreshold::Fixed { value }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DynamicThreshold::Fixed { value } if !(value > 0.0 && value < 1.0) => Err(
                Error::Config(format!("fixed threshold {value} outside (0, 1)")),
            ),
            DynamicThreshold::Adaptive { stddev_weight } if !stddev_weight.is_finite() => Err(
                Error::Config("adaptive threshold weight must be finite".to_string()),
            ),
            _ => Ok(()),
        }
    }
}

/// Resolves the threshold for a matrix. The adaptive rule uses the
/// population standard deviation over the unordered off-diagonal entries.
pub fn resolve_threshold(matrix: &SimilarityMatrix, threshold: &DynamicThreshold) -> f64 {
    match *threshold {
        DynamicThreshold::Fixed { value } => value,
        DynamicThreshold::Adaptive { stddev_weight } => {
            let off = matrix.off_diagonal();
            if off.is_empty() {
                return 0.5;
            }
            let n = off.len() as f64;
            let mean = off.iter().sum::<f64>() / n;
            let var = off.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean + stddev_weight * var.sqrt()).clamp(THRESHOLD_FLOOR, 1.0 - THRESHOLD_FLOOR)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub left: usize,
    pub right: usize,
    pub similarity: f64,
    pub left_members: Vec<String>,
    pub right_members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
    /// Element-wise mean of the aligned member series; absent in
    /// matrix-only clustering.
    pub representative: Option<SentimentSeries>,
    pub merge_trace: Vec<MergeRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// Recompute SPSI between cluster representatives.
    Representative,
    /// Mean of the original pairwise similarities.
    Average,
}

#[derive(Debug, Clone)]
struct Active {
    id: usize,
    members: Vec<usize>,
    representative: Option<SentimentSeries>,
    trace: Vec<MergeRecord>,
}

/// Mutable agglomeration state; one [`ClusterState::merge_step`] shrinks
/// the effective matrix by one.
#[derive(Debug, Clone)]
pub struct ClusterState {
    ids: Vec<String>,
    base: SimilarityMatrix,
    linkage: Linkage,
    series: Vec<SentimentSeries>,
    active: Vec<Active>,
    similarity: BTreeMap<(usize, usize), f64>,
}

impl ClusterState {
    /// Series-mode state. `series` must follow the matrix id order.
    pub fn with_series(matrix: &SimilarityMatrix, series: &[SentimentSeries]) -> Result<Self> {
        if series.len() != matrix.len()
            || series
                .iter()
                .zip(matrix.ids())
                .any(|(s, id)| &s.book_id != id)
        {
            return Err(Error::InvalidMatrix(
                "series do not match the matrix rows".to_string(),
            ));
        }
        let mut state = Self::new(matrix, Linkage::Representative)?;
        state.series = series.to_vec();
        for (a, s) in state.active.iter_mut().zip(series) {
            a.representative = Some(s.clone());
        }
        Ok(state)
    }

    /// Matrix-only state with average linkage.
    pub fn with_matrix(matrix: &SimilarityMatrix) -> Result<Self> {
        Self::new(matrix, Linkage::Average)
    }

    fn new(matrix: &SimilarityMatrix, linkage: Linkage) -> Result<Self> {
        if !matrix.is_symmetric() {
            return Err(Error::InvalidMatrix("matrix is not symmetric".to_string()));
        }
        let n = matrix.len();
        let mut similarity = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                similarity.insert((i, j), matrix.get(i, j));
            }
        }
        Ok(ClusterState {
            ids: matrix.ids().to_vec(),
            base: matrix.clone(),
            linkage,
            series: Vec::new(),
            active: (0..n)
                .map(|i| Active {
                    id: i,
                    members: vec![i],
                    representative: None,
                    trace: Vec::new(),
                })
                .collect(),
            similarity,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.active.len()
    }

    /// Most similar pair of clusters; ties go to the smallest id pair.
    pub fn best_pair(&self) -> Option<((usize, usize), f64)> {
        self.similarity
            .iter()
            .fold(None, |best, (&pair, &s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((pair, s)),
            })
    }

    /// Merges the most similar pair if its similarity exceeds `threshold`;
    /// `None` signals termination.
    pub fn merge_step(&mut self, threshold: f64) -> Result<Option<MergeRecord>> {
        let Some(((left, right), similarity)) = self.best_pair() else {
            return Ok(None);
        };
        if similarity <= threshold {
            return Ok(None);
        }
        let take = |active: &mut Vec<Active>, id: usize| {
            let pos = active
                .iter()
                .position(|a| a.id == id)
                .expect("active cluster");
            active.remove(pos)
        };
        let a = take(&mut self.active, left);
        let b = take(&mut self.active, right);
        self.similarity
            .retain(|&(x, y), _| x != left && x != right && y != left && y != right);

        let names = |members: &[usize]| members.iter().map(|&m| self.ids[m].clone()).collect();
        let record = MergeRecord {
            left,
            right,
            similarity,
            left_members: names(&a.members),
            right_members: names(&b.members),
        };
        let mut members = [a.members, b.members].concat();
        members.sort_unstable();
        let mut trace = [a.trace, b.trace].concat();
        trace.push(record.clone());
        let representative = match self.linkage {
            Linkage::Representative => {
                let group: Vec<&SentimentSeries> =
                    members.iter().map(|&m| &self.series[m]).collect();
                Some(mean_series(&format!("cluster-{left}"), &group)?)
            }
            Linkage::Average => None,
        };
        let merged = Active {
            id: left,
            members,
            representative,
            trace,
        };

        let fresh = self
            .active
            .par_iter()
            .map(|other| Ok((other.id, self.linkage_similarity(&merged, other)?)))
            .collect::<Result<Vec<_>>>()?;
        for (other, s) in fresh {
            self.similarity
                .insert((left.min(other), left.max(other)), s);
        }
        let pos = self.active.partition_point(|c| c.id < left);
        self.active.insert(pos, merged);
        Ok(Some(record))
    }

    fn linkage_similarity(&self, x: &Active, y: &Active) -> Result<f64> {
        match self.linkage {
            Linkage::Representative => {
                let (Some(rx), Some(ry)) = (&x.representative, &y.representative) else {
                    unreachable!("series-mode clusters carry representatives")
                };
                spsi_series(rx, ry)
            }
            Linkage::Average => {
                let total: f64 = x
                    .members
                    .iter()
                    .flat_map(|&i| y.members.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| self.base.get(i, j))
                    .sum();
                Ok(total / (x.members.len() * y.members.len()) as f64)
            }
        }
    }

    pub fn into_clusters(self) -> Vec<Cluster> {
        let ids = self.ids;
        self.active
            .into_iter()
            .map(|a| Cluster {
                cluster_id: a.id,
                members: a.members.iter().map(|&m| ids[m].clone()).collect(),
                representative: a.representative,
                merge_trace: a.trace,
            })
            .collect()
    }
}

/// Element-wise mean of series stretched to the longest member's length.
pub fn mean_series(book_id: &str, members: &[&SentimentSeries]) -> Result<SentimentSeries> {
    let target = members
        .iter()
        .map(|s| s.len())
        .max()
        .ok_or_else(|| Error::InvalidSeries("empty cluster".to_string()))?;
    let stretched: Vec<SentimentSeries> = members
        .iter()
        .map(|s| stretch_to(s, target, None))
        .collect();
    let k = stretched.len() as f64;
    let points = (0..target)
        .map(|i| {
            let column = stretched.iter().map(|s| s.points[i]);
            let (pos, val, all_primary) = column.fold((0.0, 0.0, true), |(p, v, prim), pt| {
                (
                    p + pt.position,
                    v + pt.value,
                    prim && pt.provenance == Provenance::Primary,
                )
            });
            SeriesPoint {
                position: pos / k,
                value: (val / k).clamp(0.0, 1.0),
                provenance: if all_primary {
                    Provenance::Primary
                } else {
                    Provenance::Interpolated
                },
            }
        })
        .collect();
    Ok(SentimentSeries {
        book_id: book_id.to_string(),
        points,
    })
}

fn run(mut state: ClusterState, threshold: f64) -> Result<Vec<Cluster>> {
    while state.merge_step(threshold)?.is_some() {}
    Ok(state.into_clusters())
}

/// Series-mode clustering: representatives are recomputed after every merge.
pub fn cluster_all(
    matrix: &SimilarityMatrix,
    series: &[SentimentSeries],
    threshold: f64,
) -> Result<Vec<Cluster>> {
    run(ClusterState::with_series(matrix, series)?, threshold)
}

/// Average-linkage clustering on matrix values alone.
pub fn matrix_mode_linkage(matrix: &SimilarityMatrix, threshold: f64) -> Result<Vec<Cluster>> {
    run(ClusterState::with_matrix(matrix)?, threshold)
}

/// Cluster report written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub threshold: f64,
    pub clusters: Vec<ClusterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: usize,
    pub members: Vec<String>,
    pub representative: Vec<f64>,
    pub trace: Vec<MergeRecord>,
}

impl ClusterReport {
    pub fn new(threshold: f64, clusters: &[Cluster]) -> Self {
        ClusterReport {
            threshold,
            clusters: clusters
                .iter()
                .map(|c| ClusterEntry {
                    id: c.cluster_id,
                    members: c.members.clone(),
                    representative: c
                        .representative
                        .as_ref()
                        .map(|r| r.values())
                        .unwrap_or_default(),
                    trace: c.merge_trace.clone(),
                })
                .collect(),
        }
    }
}

/// The similarity matrix printed with the reference clustering example:
/// nine series labelled `1`..`9`, as printed (not symmetric).
pub fn reference_matrix_as_printed() -> SimilarityMatrix {
    const ROWS: [[f64; 9]; 9] = [
        [1.0, 0.32, 0.11, 0.76, 0.36, 0.16, 0.15, 0.62, 0.11],
        [0.32, 1.0, 0.18, 0.22, 0.31, 0.28, 0.14, 1.0, 0.23],
        [0.11, 0.18, 1.0, 0.16, 0.58, 0.54, 0.73, 0.25, 0.41],
        [0.76, 0.22, 0.16, 1.0, 0.37, 0.26, 0.39, 0.57, 0.25],
        [0.36, 0.31, 0.58, 0.37, 1.0, 0.49, 0.52, 0.16, 0.53],
        [0.16, 0.28, 0.54, 0.26, 0.49, 1.0, 0.66, 0.11, 0.50],
        [0.15, 0.32, 0.73, 0.39, 0.52, 0.66, 1.0, 0.29, 0.86],
        [0.62, 0.14, 0.25, 0.57, 0.16, 0.11, 0.29, 1.0, 0.15],
        [0.11, 0.23, 0.41, 0.25, 0.53, 0.50, 0.86, 0.15, 1.0],
    ];
    SimilarityMatrix::from_rows(
        (1..=9).map(|i| i.to_string()).collect(),
        ROWS.iter().map(|r| r.to_vec()).collect(),
    )
    .expect("9x9 matrix")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_partition(clusters: &[Cluster]) -> Vec<Vec<String>> {
        let mut parts: Vec<Vec<String>> = clusters.iter().map(|c| c.members.clone()).collect();
        parts.sort();
        parts
    }

    fn labels(groups: &[&[u32]]) -> Vec<Vec<String>> {
        let mut v: Vec<Vec<String>> = groups
            .iter()
            .map(|g| g.iter().map(|x| x.to_string()).collect())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn reference_matrix_partition() {
        let printed = reference_matrix_as_printed();
        assert!(!printed.is_symmetric());
        assert!(matrix_mode_linkage(&printed, 0.4).is_err());

        let m = printed.mirror_lower();
        let clusters = matrix_mode_linkage(&m, 0.4).unwrap();
        assert_eq!(
            sorted_partition(&clusters),
            labels(&[&[3, 5, 6, 7, 9], &[1, 4, 8], &[2]])
        );

        let mut trace: Vec<&MergeRecord> = clusters.iter().flat_map(|c| &c.merge_trace).collect();
        trace.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        assert_eq!(trace[0].left_members, ["7"]);
        assert_eq!(trace[0].right_members, ["9"]);
        assert_eq!(trace[0].similarity, 0.86);
        assert_eq!(clusters.len() + trace.len(), 9);
    }

    #[test]
    fn reference_trace_is_non_increasing() {
        let mut state =
            ClusterState::with_matrix(&reference_matrix_as_printed().mirror_lower()).unwrap();
        let mut sims = Vec::new();
        while let Some(r) = state.merge_step(0.4).unwrap() {
            sims.push(r.similarity);
        }
        assert_eq!(sims.len(), 6);
        assert!(sims.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn adaptive_threshold() {
        let ids: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let mut m = SimilarityMatrix::identity(ids);
        for i in 0..4 {
            for j in 0..i {
                m.set_symmetric(i, j, 0.5);
            }
        }
        assert_eq!(resolve_threshold(&m, &DynamicThreshold::default()), 0.5);
        assert_eq!(resolve_threshold(&m, &DynamicThreshold::fixed(0.4)), 0.4);

        // Oracle: mean and population stddev over the 36 printed entries.
        let fig = reference_matrix_as_printed().mirror_lower();
        let dt = resolve_threshold(&fig, &DynamicThreshold::default());
        assert!((dt - (0.3625 + 0.5 * 0.2032974695147756)).abs() < 1e-12);
    }

    #[test]
    fn threshold_validation() {
        assert!(DynamicThreshold::fixed(0.0).validate().is_err());
        assert!(DynamicThreshold::fixed(1.0).validate().is_err());
        assert!(DynamicThreshold::fixed(0.4).validate().is_ok());
    }

    #[test]
    fn degenerate_matrices() {
        let ids: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let identity = SimilarityMatrix::identity(ids.clone());
        assert_eq!(matrix_mode_linkage(&identity, 0.4).unwrap().len(), 5);

        let ones = SimilarityMatrix::from_rows(ids, vec![vec![1.0; 5]; 5]).unwrap();
        let clusters = matrix_mode_linkage(&ones, 0.4).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].merge_trace.len(), 4);

        let two = SimilarityMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.9], vec![0.9, 1.0]],
        )
        .unwrap();
        assert_eq!(matrix_mode_linkage(&two, 0.4).unwrap().len(), 1);
        let low = SimilarityMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.3], vec![0.3, 1.0]],
        )
        .unwrap();
        let mut state = ClusterState::with_matrix(&low).unwrap();
        assert!(state.merge_step(0.4).unwrap().is_none());
    }

    #[test]
    fn merged_representative_is_mean() {
        let a = SentimentSeries::from_values("a", &[0.2, 0.4]).unwrap();
        let b = SentimentSeries::from_values("b", &[0.4, 0.6]).unwrap();
        let rep = mean_series("r", &[&a, &b]).unwrap();
        assert!((rep.values()[0] - 0.3).abs() < 1e-12);
        assert!((rep.values()[1] - 0.5).abs() < 1e-12);

        let m = crate::spsi::spsi_matrix([&a, &b]).unwrap();
        let clusters = cluster_all(&m, &[a, b], 0.5).unwrap();
        assert_eq!(clusters.len(), 1);
        let rep = clusters[0].representative.as_ref().unwrap();
        assert!((rep.values()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn series_mode_groups_similar_shapes() {
        let shapes = [
            ("u1", vec![0.8, 0.3, 0.2, 0.3, 0.8]),
            ("n1", vec![0.2, 0.7, 0.9, 0.7, 0.2]),
            ("u2", vec![0.82, 0.32, 0.22, 0.3, 0.79]),
            ("n2", vec![0.22, 0.69, 0.88, 0.72, 0.2]),
        ];
        let series: Vec<SentimentSeries> = shapes
            .iter()
            .map(|(id, v)| SentimentSeries::from_values(*id, v).unwrap())
            .collect();
        let m = crate::spsi::spsi_matrix(&series).unwrap();
        let clusters = cluster_all(&m, &series, 0.95).unwrap();
        let parts = sorted_partition(&clusters);
        assert_eq!(
            parts,
            vec![
                vec!["n1".to_string(), "n2".into()],
                vec!["u1".into(), "u2".into()]
            ]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_and_merge_count(
                n in 2usize..12,
                raw in proptest::collection::vec(0.0f64..1.0, 66),
                dt in 0.05f64..0.95,
            ) {
                let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
                let mut m = SimilarityMatrix::identity(ids.clone());
                let mut k = 0;
                for i in 0..n {
                    for j in 0..i {
                        m.set_symmetric(i, j, raw[k]);
                        k += 1;
                    }
                }
                let clusters = matrix_mode_linkage(&m, dt).unwrap();
                let merges: usize = clusters.iter().map(|c| c.merge_trace.len()).sum();
                prop_assert_eq!(clusters.len() + merges, n);
                let mut all: Vec<String> = clusters.iter().flat_map(|c| c.members.clone()).collect();
                all.sort();
                let mut expected = ids.clone();
                expected.sort();
                prop_assert_eq!(all, expected);
                let again = matrix_mode_linkage(&m, dt).unwrap();
                prop_assert_eq!(clusters, again);
            }
        }
    }
}
