use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reference to a dendrogram node: an original leaf or an earlier merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Leaf(usize),
    Merge(usize),
}

impl NodeRef {
    pub(crate) fn from_id(id: usize, n: usize) -> Self {
        if id < n {
            NodeRef::Leaf(id)
        } else {
            NodeRef::Merge(id - n)
        }
    }

    /// Flat node id: leaves are `0..n`, merge `m` is `n + m`.
    pub fn id(self, n: usize) -> usize {
        match self {
            NodeRef::Leaf(i) => i,
            NodeRef::Merge(m) => n + m,
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Leaf(i) => write!(f, "L{i}"),
            NodeRef::Merge(m) => write!(f, "M{m}"),
        }
    }
}

impl FromStr for NodeRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("bad dendrogram node reference {s:?}"));
        let (kind, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let idx: usize = rest.parse().map_err(|_| bad())?;
        match kind {
            "L" => Ok(NodeRef::Leaf(idx)),
            "M" => Ok(NodeRef::Merge(idx)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: NodeRef,
    pub right: NodeRef,
    pub height: f64,
    /// Leaves under the merged node.
    pub size: usize,
}

/// Merge history of an agglomerative clustering over `n` leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validates and wraps a merge list.
    pub fn new(n: usize, merges: Vec<Merge>) -> Result<Self> {
        if n < 1 || merges.len() != n - 1 {
            return Err(Error::Data(format!(
                "a dendrogram over {n} leaves needs {} merges, got {}",
                n.saturating_sub(1),
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut sizes = vec![1usize; 2 * n - 1];
        for (m, merge) in merges.iter().enumerate() {
            let mut total = 0;
            for node in [merge.left, merge.right] {
                let id = node.id(n);
                let valid = match node {
                    NodeRef::Leaf(i) => i < n,
                    NodeRef::Merge(j) => j < m,
                };
                if !valid {
                    return Err(Error::Data(format!("merge {m} references unknown node {node}")));
                }
                if std::mem::replace(&mut used[id], true) {
                    return Err(Error::Data(format!("node {node} merged twice")));
                }
                total += sizes[id];
            }
            if total != merge.size {
                return Err(Error::Data(format!(
                    "merge {m} has size {} but its children hold {total} leaves",
                    merge.size
                )));
            }
            if !merge.height.is_finite() || merge.height < 0.0 {
                return Err(Error::Data(format!("merge {m} has invalid height {}", merge.height)));
            }
            sizes[n + m] = total;
        }
        Ok(Self { n, merges })
    }

    pub(crate) fn from_merges_unchecked(n: usize, merges: Vec<Merge>) -> Self {
        debug_assert!(Self::new(n, merges.clone()).is_ok());
        Self { n, merges }
    }

    pub fn leaf_count(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.merges.iter().map(|m| m.height)
    }

    /// `merge_index,left,right,height,size` rows; leaves are `L<i>` and
    /// merges `M<j>`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["merge_index", "left", "right", "height", "size"])?;
        for (m, merge) in self.merges.iter().enumerate() {
            wtr.write_record([
                m.to_string(),
                merge.left.to_string(),
                merge.right.to_string(),
                merge.height.to_string(),
                merge.size.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut merges = Vec::new();
        for (m, row) in rdr.records().enumerate() {
            let row = row?;
            if row.len() != 5 {
                return Err(Error::Data(format!("dendrogram row {m} has {} fields", row.len())));
            }
            let num = |i: usize| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad number {:?} in dendrogram row {m}", &row[i])))
            };
            if row[0].parse::<usize>().ok() != Some(m) {
                return Err(Error::Data(format!("dendrogram row {m} is out of order")));
            }
            merges.push(Merge {
                left: row[1].parse()?,
                right: row[2].parse()?,
                height: num(3)?,
                size: row[4]
                    .parse()
                    .map_err(|_| Error::Data(format!("bad size in dendrogram row {m}")))?,
            });
        }
        Self::new(merges.len() + 1, merges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dendrogram {
        Dendrogram::new(
            3,
            vec![
                Merge {
                    left: NodeRef::Leaf(0),
                    right: NodeRef::Leaf(2),
                    height: 0.1 + 0.2,
                    size: 2,
                },
                Merge {
                    left: NodeRef::Leaf(1),
                    right: NodeRef::Merge(0),
                    height: 6.350852961085883,
                    size: 3,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_format_and_round_trip() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "merge_index,left,right,height,size\n\
             0,L0,L2,0.30000000000000004,2\n\
             1,L1,M0,6.350852961085883,3\n"
        );
        assert_eq!(Dendrogram::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn rejects_inconsistent_merges() {
        let bad_size = vec![Merge {
            left: NodeRef::Leaf(0),
            right: NodeRef::Leaf(1),
            height: 1.0,
            size: 3,
        }];
        assert!(Dendrogram::new(2, bad_size).is_err());

        let reused = vec![
            Merge {
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
                height: 1.0,
                size: 2,
            },
            Merge {
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(2),
                height: 1.0,
                size: 2,
            },
        ];
        assert!(Dendrogram::new(3, reused).is_err());

        let forward = vec![
            Merge {
                left: NodeRef::Leaf(0),
                right: NodeRef::Merge(0),
                height: 1.0,
                size: 2,
            },
            Merge {
                left: NodeRef::Leaf(1),
                right: NodeRef::Leaf(2),
                height: 1.0,
                size: 2,
            },
        ];
        assert!(Dendrogram::new(3, forward).is_err());
    }

    #[test]
    fn node_ref_parsing() {
        assert_eq!("L12".parse::<NodeRef>().unwrap(), NodeRef::Leaf(12));
        assert_eq!("M0".parse::<NodeRef>().unwrap(), NodeRef::Merge(0));
        assert!("X1".parse::<NodeRef>().is_err());
        assert!("L".parse::<NodeRef>().is_err());
        assert!("".parse::<NodeRef>().is_err());
    }
}
