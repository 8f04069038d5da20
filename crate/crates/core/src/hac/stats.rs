use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::SequenceTable;
use crate::seqdist::CondensedDistanceMatrix;

use super::{cut_tree, ClusterAssignment, Dendrogram};

/// Size and sequence-length summary of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStatsRow {
    pub cluster_id: usize,
    pub student_count: usize,
    pub mean_length: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for singletons.
    pub sd_length: f64,
}

pub fn cluster_stats(assign: &ClusterAssignment, table: &SequenceTable) -> Result<Vec<ClusterStatsRow>> {
    if assign.len() != table.len() {
        return Err(Error::Parameter(format!(
            "assignment covers {} students but the table has {}",
            assign.len(),
            table.len()
        )));
    }
    let lengths = table.lengths();
    Ok(assign
        .members()
        .into_iter()
        .enumerate()
        .map(|(cluster_id, members)| {
            let count = members.len();
            let mean = members.iter().map(|&i| lengths[i] as f64).sum::<f64>() / count as f64;
            let sd = if count > 1 {
                let ss: f64 = members
                    .iter()
                    .map(|&i| (lengths[i] as f64 - mean).powi(2))
                    .sum();
                (ss / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            ClusterStatsRow {
                cluster_id,
                student_count: count,
                mean_length: mean,
                sd_length: sd,
            }
        })
        .collect())
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two partitions of the same items.
///
/// Returns 1.0 when both partitions are identical, including the
/// degenerate cases where the index is otherwise undefined.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!(
            "partitions differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        // Both partitions trivial (all-in-one or all-singletons).
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Mean silhouette width of an assignment. `None` unless `2 <= k < n`.
pub fn mean_silhouette(matrix: &CondensedDistanceMatrix, assign: &ClusterAssignment) -> Result<Option<f64>> {
    let n = matrix.n();
    if assign.len() != n {
        return Err(Error::Parameter(format!(
            "assignment covers {} items but the matrix has {n}",
            assign.len()
        )));
    }
    let k = assign.k();
    if k < 2 || k >= n {
        return Ok(None);
    }
    let labels = assign.labels();
    let sizes: Vec<usize> = assign.members().iter().map(Vec::len).collect();
    let mut sums = vec![0f64; k];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += f64::from(matrix.get(i, j));
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let within = sums[own] / (sizes[own] - 1) as f64;
        let nearest = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = within.max(nearest);
        if denom > 0.0 {
            total += (nearest - within) / denom;
        }
    }
    Ok(Some(total / n as f64))
}

/// Mean silhouette for each `k` in `2..=max_k` (capped at `n - 1`).
pub fn silhouette_report(
    matrix: &CondensedDistanceMatrix,
    dendro: &Dendrogram,
    max_k: usize,
) -> Result<Vec<(usize, f64)>> {
    let n = dendro.leaf_count();
    let mut out = Vec::new();
    for k in 2..=max_k.min(n.saturating_sub(1)) {
        let assign = cut_tree(dendro, k)?;
        if let Some(s) = mean_silhouette(matrix, &assign)? {
            out.push((k, s));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(lengths: &[usize]) -> SequenceTable {
        SequenceTable::from_labeled(
            lengths
                .iter()
                .enumerate()
                .map(|(i, &l)| (format!("s{i:02}"), vec!["a"; l])),
        )
        .unwrap()
    }

    #[test]
    fn stats_of_one_cluster() {
        let rows = cluster_stats(&ClusterAssignment::from_raw_labels(&[0, 0, 0]), &table(&[2, 3, 4])).unwrap();
        assert_eq!(
            rows,
            [ClusterStatsRow {
                cluster_id: 0,
                student_count: 3,
                mean_length: 3.0,
                sd_length: 1.0
            }]
        );
    }

    #[test]
    fn singleton_has_zero_sd() {
        let rows = cluster_stats(&ClusterAssignment::from_raw_labels(&[0, 1, 1]), &table(&[7, 1, 3])).unwrap();
        assert_eq!(rows[0].student_count, 1);
        assert_eq!(rows[0].mean_length, 7.0);
        assert_eq!(rows[0].sd_length, 0.0);
        assert_eq!(rows[1].mean_length, 2.0);
        assert_eq!(rows.iter().map(|r| r.student_count).sum::<usize>(), 3);
    }

    #[test]
    fn stats_length_mismatch() {
        let err = cluster_stats(&ClusterAssignment::from_raw_labels(&[0, 0]), &table(&[1])).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn ari_known_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 3, 3]).unwrap(), 1.0);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((v - 4.0 / 7.0).abs() < 1e-12);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,1,0,1]) = -0.5
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn silhouette_of_separated_pairs() {
        // Two tight pairs far apart: a = 1, b = 10 for every point.
        let m = CondensedDistanceMatrix::from_condensed(4, vec![1.0, 10.0, 10.0, 10.0, 10.0, 1.0]).unwrap();
        let s = mean_silhouette(&m, &ClusterAssignment::from_raw_labels(&[0, 0, 1, 1]))
            .unwrap()
            .unwrap();
        assert!((s - 0.9).abs() < 1e-12);
        assert_eq!(
            mean_silhouette(&m, &ClusterAssignment::from_raw_labels(&[0, 0, 0, 0])).unwrap(),
            None
        );
    }
}
