//! Frequent-pathway mining for activity event logs.
//!
//! The pipeline turns a raw event log into per-student activity
//! sequences ([`eventlog`]), clusters those sequences under edit distance
//! ([`seqdist`], [`hac`]), and mines one directed transition graph per
//! cluster ([`pathgraph`]) whose light edges can be filtered away before
//! rendering ([`export`]). [`synth`] generates event logs with planted
//! groups for testing.
//!
//! ```
//! use pathmine::eventlog::SequenceTable;
//! use pathmine::hac::{agglomerate, cut_tree, Linkage};
//! use pathmine::pathgraph::mine_transition_graph;
//! use pathmine::seqdist::pairwise_distances;
//!
//! let table = SequenceTable::from_labeled(vec![
//!     ("s1".to_string(), vec!["a", "b", "c"]),
//!     ("s2".to_string(), vec!["a", "b", "c", "c"]),
//!     ("s3".to_string(), vec!["x", "y"]),
//! ])?;
//! let matrix = pairwise_distances(&table)?;
//! let dendrogram = agglomerate(&matrix, Linkage::WardSquared)?;
//! let clusters = cut_tree(&dendrogram, 2)?;
//! assert_eq!(clusters.labels(), [0, 0, 1]);
//!
//! let graph = mine_transition_graph(&table, Some((&clusters, 0)))?;
//! assert_eq!(graph.total_weight(), 5);
//! # Ok::<(), pathmine::Error>(())
//! ```

pub mod error;
pub mod eventlog;
pub mod export;
pub mod hac;
pub mod pathgraph;
pub mod seqdist;
pub mod synth;

pub use error::{Error, Result};
