//! Indexing and search of narrative texts by the progression of sentiment
//! across character-interaction pivot points.
//!
//! The pipeline runs per book: [`ingest`] tokenizes and blocks the text,
//! [`characters`] finds the core characters, [`pivots`] locates pivot
//! points for each core pair and [`series`] turns the predominant pair's
//! pivots into a sentiment progression. Across books, [`spsi`] scores
//! progression similarity, [`cluster`] groups progressions and
//! [`catalogue`] persists and queries the resulting index.

pub mod baseline;
pub mod catalogue;
pub mod characters;
pub mod cluster;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod pivots;
pub mod series;
pub mod spsi;
pub mod synth;

pub use catalogue::{Catalogue, CatalogueEntry};
pub use characters::{CharacterProfile, CoOccurrenceEdge, CoreCharacterSet};
pub use cluster::{Cluster, DynamicThreshold};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use ingest::{AliasTable, BookDocument, LogicalBlock, SentimentLexicon};
pub use pivots::{PivotPoint, SentimentConfig};
pub use series::{Provenance, SentimentSeries};
pub use spsi::{SimilarityMatrix, SpsiBreakdown};
