//! Agglomerative hierarchical clustering over a condensed distance matrix.
//!
//! [`agglomerate`] always merges the globally closest pair of active
//! clusters, with ties going to the pair with the smallest
//! `(left, right)` node ids (leaves are `0..n`, merge `m` is `n + m`). It
//! keeps, for every active cluster, its nearest neighbour among the
//! clusters with a larger node id. Because a merged cluster always gets
//! the largest id so far, only clusters whose cached neighbour was
//! consumed by a merge need a rescan; everyone else just compares against
//! the new cluster.

mod assign;
mod dendrogram;
mod stats;

pub use assign::{cut_tree, ClusterAssignment};
pub use dendrogram::{Dendrogram, Merge, NodeRef};
pub use stats::{
    adjusted_rand_index, cluster_stats, mean_silhouette, silhouette_report, ClusterStatsRow,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdist::{condensed_index, condensed_len, CondensedDistanceMatrix};

/// Inter-cluster dissimilarity update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    /// Ward's criterion on squared input distances; heights are reported
    /// as the square root of the criterion (R's `ward.D2`).
    #[default]
    WardSquared,
    /// Ward's update applied to the raw distances (R's `ward.D`).
    WardRaw,
    Average,
    Complete,
    Single,
}

impl Linkage {
    pub const ALL: [Linkage; 5] = [
        Linkage::WardSquared,
        Linkage::WardRaw,
        Linkage::Average,
        Linkage::Complete,
        Linkage::Single,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::WardSquared => "ward-squared",
            Linkage::WardRaw => "ward-raw",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        }
    }

    /// Whether merge heights are guaranteed non-decreasing for any input.
    pub fn is_monotone(self) -> bool {
        !matches!(self, Linkage::WardRaw)
    }

    /// Maps an input distance into the working dissimilarity space.
    fn lift(self, d: f64) -> f64 {
        match self {
            Linkage::WardSquared => d * d,
            _ => d,
        }
    }

    /// Maps a working dissimilarity back into a merge height.
    fn height(self, w: f64) -> f64 {
        match self {
            Linkage::WardSquared => w.max(0.0).sqrt(),
            _ => w,
        }
    }

    /// Lance-Williams update: dissimilarity between `x` and the union of
    /// `a` and `b`.
    #[inline]
    fn update(self, d_ax: f64, d_bx: f64, d_ab: f64, n_a: f64, n_b: f64, n_x: f64) -> f64 {
        match self {
            Linkage::Single => d_ax.min(d_bx),
            Linkage::Complete => d_ax.max(d_bx),
            Linkage::Average => (n_a * d_ax + n_b * d_bx) / (n_a + n_b),
            Linkage::WardSquared | Linkage::WardRaw => {
                ((n_a + n_x) * d_ax + (n_b + n_x) * d_bx - n_x * d_ab) / (n_a + n_b + n_x)
            }
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ward-squared" | "ward_squared" | "ward" | "ward.d2" => Ok(Linkage::WardSquared),
            "ward-raw" | "ward_raw" | "ward.d" => Ok(Linkage::WardRaw),
            "average" | "upgma" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(Error::Parameter(format!("unknown linkage {other:?}"))),
        }
    }
}

/// Clusters the matrix with the given linkage.
pub fn agglomerate(matrix: &CondensedDistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let data: Vec<f64> = matrix.data().iter().map(|&d| f64::from(d)).collect();
    agglomerate_condensed(matrix.n(), &data, linkage)
}

/// Like [`agglomerate`], over raw condensed `f64` dissimilarities.
pub fn agglomerate_condensed(n: usize, condensed: &[f64], linkage: Linkage) -> Result<Dendrogram> {
    if n < 2 {
        return Err(Error::Size(format!("clustering needs at least 2 items, got {n}")));
    }
    if condensed.len() != condensed_len(n) {
        return Err(Error::Data(format!(
            "condensed matrix for n={n} needs {} entries, got {}",
            condensed_len(n),
            condensed.len()
        )));
    }
    if let Some(bad) = condensed.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::Data(format!("invalid dissimilarity {bad}")));
    }

    let mut work: Vec<f64> = condensed.iter().map(|&d| linkage.lift(d)).collect();
    let dist = |work: &[f64], x: usize, y: usize| {
        if x < y {
            work[condensed_index(n, x, y)]
        } else {
            work[condensed_index(n, y, x)]
        }
    };

    // Per slot: node id, leaf count, liveness, cached nearest neighbour
    // among active slots with a larger node id.
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let rescan = |work: &[f64],
                  id: &[usize],
                  active: &[bool],
                  x: usize|
     -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for y in 0..n {
            if !active[y] || id[y] <= id[x] {
                continue;
            }
            let d = dist(work, x, y);
            if d < best.1 || (d == best.1 && best.0 != usize::MAX && id[y] < id[best.0]) {
                best = (y, d);
            }
        }
        best
    };

    for x in 0..n - 1 {
        (nn[x], nn_dist[x]) = rescan(&work, &id, &active, x);
    }

    let mut merges = Vec::with_capacity(n - 1);
    let mut needs_rescan = Vec::new();
    for step in 0..n - 1 {
        // Closest pair, ties to the smallest left id.
        let mut a = usize::MAX;
        for x in 0..n {
            if !active[x] || nn[x] == usize::MAX {
                continue;
            }
            if a == usize::MAX
                || nn_dist[x] < nn_dist[a]
                || (nn_dist[x] == nn_dist[a] && id[x] < id[a])
            {
                a = x;
            }
        }
        let b = nn[a];
        let d_ab = nn_dist[a];
        let (n_a, n_b) = (size[a], size[b]);

        merges.push(Merge {
            left: NodeRef::from_id(id[a], n),
            right: NodeRef::from_id(id[b], n),
            height: linkage.height(d_ab),
            size: n_a + n_b,
        });

        needs_rescan.clear();
        needs_rescan.extend((0..n).filter(|&x| active[x] && x != a && x != b && (nn[x] == a || nn[x] == b)));

        // The merged cluster lives on in slot `b`.
        active[a] = false;
        for x in 0..n {
            if !active[x] || x == b {
                continue;
            }
            let d = linkage.update(
                dist(&work, a, x),
                dist(&work, b, x),
                d_ab,
                n_a as f64,
                n_b as f64,
                size[x] as f64,
            );
            let k = if x < b {
                condensed_index(n, x, b)
            } else {
                condensed_index(n, b, x)
            };
            work[k] = d;
        }
        id[b] = n + step;
        size[b] = n_a + n_b;
        nn[a] = usize::MAX;
        nn[b] = usize::MAX;
        nn_dist[b] = f64::INFINITY;

        for x in 0..n {
            if !active[x] || x == b || needs_rescan.contains(&x) {
                continue;
            }
            let d = dist(&work, x, b);
            // Equal distance keeps the older, smaller-id neighbour.
            if d < nn_dist[x] {
                nn[x] = b;
                nn_dist[x] = d;
            }
        }
        for &x in &needs_rescan {
            (nn[x], nn_dist[x]) = rescan(&work, &id, &active, x);
        }
    }

    Ok(Dendrogram::from_merges_unchecked(n, merges))
}
