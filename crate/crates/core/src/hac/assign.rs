use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::eventlog::SequenceTable;

use super::Dendrogram;

/// Cluster id per leaf, canonicalized so ids appear in increasing order
/// of first occurrence over the leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    /// Relabels arbitrary group ids by order of first appearance.
    pub fn from_raw_labels<T: Eq + std::hash::Hash>(raw: &[T]) -> Self {
        let mut seen: HashMap<&T, usize> = HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: seen.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of each cluster, in leaf order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// `student_id,cluster_id` rows, one per table entry.
    pub fn write_csv<W: Write>(&self, table: &SequenceTable, w: W) -> Result<()> {
        if table.len() != self.len() {
            return Err(Error::Parameter(format!(
                "assignment covers {} students but the table has {}",
                self.len(),
                table.len()
            )));
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["student_id", "cluster_id"])?;
        for (student, label) in table.student_ids().zip(&self.labels) {
            wtr.write_record([student, label.to_string().as_str()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `student_id,cluster_id` rows and aligns them to the table.
    ///
    /// Every table student must appear exactly once. Ids are
    /// re-canonicalized, so any integer labels are accepted.
    pub fn read_csv<R: Read>(table: &SequenceTable, r: R) -> Result<Self> {
        let mut by_student: HashMap<String, usize> = HashMap::new();
        let mut rdr = csv::Reader::from_reader(r);
        for row in rdr.records() {
            let row = row?;
            if row.len() != 2 {
                return Err(Error::Data(format!("assignment row has {} fields", row.len())));
            }
            let label: usize = row[1]
                .parse()
                .map_err(|_| Error::Data(format!("bad cluster id {:?}", &row[1])))?;
            if by_student.insert(row[0].to_owned(), label).is_some() {
                return Err(Error::Data(format!("student {:?} assigned twice", &row[0])));
            }
        }
        if by_student.len() != table.len() {
            return Err(Error::Data(format!(
                "assignment lists {} students but the table has {}",
                by_student.len(),
                table.len()
            )));
        }
        let raw = table
            .student_ids()
            .map(|s| {
                by_student
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("student {s:?} has no cluster")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_raw_labels(&raw))
    }
}

/// Undoes the last `k - 1` merges and labels the `k` remaining subtrees.
pub fn cut_tree(dendro: &Dendrogram, k: usize) -> Result<ClusterAssignment> {
    let n = dendro.leaf_count();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for (m, merge) in dendro.merges()[..n - k].iter().enumerate() {
        parent[merge.left.id(n)] = n + m;
        parent[merge.right.id(n)] = n + m;
    }
    // Parents always have larger ids, so resolving from the top down
    // finds every root in one pass.
    for id in (0..2 * n - 1).rev() {
        parent[id] = parent[parent[id]];
    }
    Ok(ClusterAssignment::from_raw_labels(&parent[..n]))
}
