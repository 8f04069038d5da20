//! Directed weighted transition graphs mined from activity sequences.
//!
//! The weight of edge `i -> j` counts how often activity `j` immediately
//! followed activity `i` over the selected students. Only non-zero cells
//! are stored.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::SequenceTable;
use crate::hac::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransitionGraph {
    labels: Vec<String>,
    /// Keyed by (source, target) node index.
    edges: BTreeMap<(u32, u32), u64>,
}

impl TransitionGraph {
    /// Builds a graph from labeled edges. Labels must be non-empty and
    /// unique; zero weights are dropped.
    pub fn from_labeled_edges<'a, I>(nodes: &[&str], edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, u64)>,
    {
        let mut index = HashMap::new();
        for (i, &label) in nodes.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Data("empty node label".into()));
            }
            if index.insert(label, i as u32).is_some() {
                return Err(Error::Data(format!("duplicate node label {label:?}")));
            }
        }
        let mut out = BTreeMap::new();
        for (src, dst, w) in edges {
            let lookup = |l: &str| {
                index
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("edge references unknown node {l:?}")))
            };
            if w > 0 {
                *out.entry((lookup(src)?, lookup(dst)?)).or_insert(0) += w;
            }
        }
        Ok(Self {
            labels: nodes.iter().map(|s| s.to_string()).collect(),
            edges: out,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: u32) -> &str {
        &self.labels[node as usize]
    }

    pub fn weight(&self, src: u32, dst: u32) -> u64 {
        self.edges.get(&(src, dst)).copied().unwrap_or(0)
    }

    /// Edges as `(source, target, weight)` in index order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.edges.iter().map(|(&(s, t), &w)| (s, t, w))
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Edges keyed by label pair, for comparisons independent of node order.
    pub fn labeled_edges(&self) -> BTreeMap<(&str, &str), u64> {
        self.edges()
            .map(|(s, t, w)| ((self.label(s), self.label(t)), w))
            .collect()
    }

    /// Same graph without self-loops (nodes are kept).
    pub fn without_self_loops(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .filter(|((s, t), _)| s != t)
                .map(|(&k, &w)| (k, w))
                .collect(),
        }
    }

    /// `source_activity_id,target_activity_id,weight`, sorted by labels.
    pub fn write_edge_list<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["source_activity_id", "target_activity_id", "weight"])?;
        for ((src, dst), weight) in self.labeled_edges() {
            wtr.write_record([src, dst, weight.to_string().as_str()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Counts consecutive activity pairs over the selected students.
///
/// `selection` restricts mining to the students of one cluster. Nodes are
/// exactly the activities that occur in the selected sequences, in
/// catalog order.
pub fn mine_transition_graph(
    table: &SequenceTable,
    selection: Option<(&ClusterAssignment, usize)>,
) -> Result<TransitionGraph> {
    if let Some((assign, cluster)) = selection {
        if assign.len() != table.len() {
            return Err(Error::Parameter(format!(
                "assignment covers {} students but the table has {}",
                assign.len(),
                table.len()
            )));
        }
        if cluster >= assign.k() {
            return Err(Error::Parameter(format!(
                "cluster {cluster} does not exist (k = {})",
                assign.k()
            )));
        }
    }
    let selected: Vec<&[u32]> = table
        .sequences()
        .enumerate()
        .filter(|(i, _)| selection.is_none_or(|(a, c)| a.labels()[*i] == c))
        .map(|(_, s)| s.items())
        .collect();

    let catalog_len = table.catalog().len();
    let (present, counts) = selected
        .par_iter()
        .fold(
            || (vec![false; catalog_len], HashMap::<(u32, u32), u64>::new()),
            |(mut present, mut counts), seq| {
                for &a in *seq {
                    present[a as usize] = true;
                }
                for pair in seq.windows(2) {
                    *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
                }
                (present, counts)
            },
        )
        .reduce(
            || (vec![false; catalog_len], HashMap::new()),
            |(mut p1, mut c1), (p2, c2)| {
                p1.iter_mut().zip(p2).for_each(|(a, b)| *a |= b);
                for (k, w) in c2 {
                    *c1.entry(k).or_insert(0) += w;
                }
                (p1, c1)
            },
        );

    let mut remap = vec![u32::MAX; catalog_len];
    let mut labels = Vec::new();
    for (idx, _) in present.iter().enumerate().filter(|(_, p)| **p) {
        remap[idx] = labels.len() as u32;
        labels.push(table.catalog().labels()[idx].clone());
    }
    let edges = counts
        .into_iter()
        .map(|((s, t), w)| ((remap[s as usize], remap[t as usize]), w))
        .collect();
    Ok(TransitionGraph { labels, edges })
}

/// Keeps edges with weight at least `min_weight`; with `drop_isolated`,
/// also removes nodes left without incident edges. Node indices are
/// re-densified, preserving relative order.
pub fn filter_edges(graph: &TransitionGraph, min_weight: u64, drop_isolated: bool) -> TransitionGraph {
    let min_weight = min_weight.max(1);
    let kept: Vec<((u32, u32), u64)> = graph
        .edges
        .iter()
        .filter(|(_, &w)| w >= min_weight)
        .map(|(&k, &w)| (k, w))
        .collect();
    if !drop_isolated {
        return TransitionGraph {
            labels: graph.labels.clone(),
            edges: kept.into_iter().collect(),
        };
    }
    let mut used = vec![false; graph.node_count()];
    for &((s, t), _) in &kept {
        used[s as usize] = true;
        used[t as usize] = true;
    }
    let mut remap = vec![u32::MAX; graph.node_count()];
    let mut labels = Vec::new();
    for (i, _) in used.iter().enumerate().filter(|(_, u)| **u) {
        remap[i] = labels.len() as u32;
        labels.push(graph.labels[i].clone());
    }
    let edges = kept
        .into_iter()
        .map(|((s, t), w)| ((remap[s as usize], remap[t as usize]), w))
        .collect();
    TransitionGraph { labels, edges }
}

/// Smallest absolute threshold whose surviving edges carry at least
/// `share` of the total weight. Edges tied at the threshold all survive.
pub fn relative_threshold(graph: &TransitionGraph, share: f64) -> Result<u64> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::Parameter(format!("weight share must be in (0, 1], got {share}")));
    }
    let mut weights: Vec<u64> = graph.edges.values().copied().collect();
    weights.sort_unstable_by(|a, b| b.cmp(a));
    let target = share * graph.total_weight() as f64;
    let mut acc = 0u64;
    for w in weights {
        acc += w;
        if acc as f64 >= target {
            return Ok(w);
        }
    }
    Ok(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeDegree {
    pub in_degree: usize,
    pub out_degree: usize,
    pub weighted_in: u64,
    pub weighted_out: u64,
}

impl NodeDegree {
    pub fn degree(&self) -> usize {
        self.in_degree + self.out_degree
    }

    /// Incident edge weight; a self-loop counts toward both directions.
    pub fn weighted_degree(&self) -> u64 {
        self.weighted_in + self.weighted_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub self_loop_count: usize,
    pub edge_count_without_self_loops: usize,
    pub total_weight: u64,
    pub max_weight: u64,
    pub degrees: Vec<NodeDegree>,
}

pub fn graph_stats(graph: &TransitionGraph) -> GraphStats {
    let mut degrees = vec![NodeDegree::default(); graph.node_count()];
    let mut self_loops = 0;
    for (s, t, w) in graph.edges() {
        degrees[s as usize].out_degree += 1;
        degrees[s as usize].weighted_out += w;
        degrees[t as usize].in_degree += 1;
        degrees[t as usize].weighted_in += w;
        if s == t {
            self_loops += 1;
        }
    }
    GraphStats {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        self_loop_count: self_loops,
        edge_count_without_self_loops: graph.edge_count() - self_loops,
        total_weight: graph.total_weight(),
        max_weight: graph.edges.values().copied().max().unwrap_or(0),
        degrees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(seqs: &[&[&str]]) -> SequenceTable {
        SequenceTable::from_labeled(
            seqs.iter()
                .enumerate()
                .map(|(i, s)| (format!("s{i:03}"), s.to_vec())),
        )
        .unwrap()
    }

    #[test]
    fn back_and_forth() {
        let g = mine_transition_graph(&table(&[&["a", "b", "a"]]), None).unwrap();
        assert_eq!(g.labels(), ["a", "b"]);
        assert_eq!(
            g.labeled_edges().into_iter().collect::<Vec<_>>(),
            [(("a", "b"), 1), (("b", "a"), 1)]
        );
        let s = graph_stats(&g);
        assert_eq!((s.node_count, s.edge_count, s.total_weight), (2, 2, 2));
    }

    #[test]
    fn repeats_make_self_loops() {
        let g = mine_transition_graph(&table(&[&["a", "a"]]), None).unwrap();
        assert_eq!(g.weight(0, 0), 1);
        let s = graph_stats(&g);
        assert_eq!(s.self_loop_count, 1);
        assert_eq!(s.edge_count_without_self_loops, 0);
        assert_eq!(s.degrees[0].weighted_degree(), 2);
        assert_eq!(g.without_self_loops().edge_count(), 0);
    }

    #[test]
    fn weights_accumulate_across_students() {
        let g = mine_transition_graph(&table(&[&["a", "b", "c"], &["a", "b"]]), None).unwrap();
        let e = g.labeled_edges();
        assert_eq!(e[&("a", "b")], 2);
        assert_eq!(e[&("b", "c")], 1);
        assert_eq!(g.total_weight(), 3);
    }

    #[test]
    fn singletons_add_nodes_only() {
        let g = mine_transition_graph(&table(&[&["z"], &["a", "b"]]), None).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn cluster_selection() {
        let t = table(&[&["a", "b"], &["c", "d"], &["a", "b"]]);
        let assign = ClusterAssignment::from_raw_labels(&[0, 1, 0]);
        let g = mine_transition_graph(&t, Some((&assign, 0))).unwrap();
        assert_eq!(g.labels(), ["a", "b"]);
        assert_eq!(g.weight(0, 1), 2);
        let g1 = mine_transition_graph(&t, Some((&assign, 1))).unwrap();
        assert_eq!(g1.labels(), ["c", "d"]);

        assert!(mine_transition_graph(&t, Some((&assign, 2))).is_err());
        let short = ClusterAssignment::from_raw_labels(&[0, 1]);
        assert!(matches!(
            mine_transition_graph(&t, Some((&short, 0))),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn filter_keeps_heavy_edges() {
        let g = TransitionGraph::from_labeled_edges(&["a", "b", "c"], [("a", "b", 5), ("b", "c", 1)]).unwrap();
        assert_eq!(filter_edges(&g, 1, true), g);
        let f = filter_edges(&g, 2, true);
        assert_eq!(f.labels(), ["a", "b"]);
        assert_eq!(f.labeled_edges().into_iter().collect::<Vec<_>>(), [(("a", "b"), 5)]);
        let kept_nodes = filter_edges(&g, 2, false);
        assert_eq!(kept_nodes.node_count(), 3);
        assert_eq!(kept_nodes.edge_count(), 1);
    }

    #[test]
    fn relative_threshold_covers_share() {
        let g = TransitionGraph::from_labeled_edges(
            &["a", "b", "c"],
            [("a", "b", 6), ("b", "c", 3), ("c", "a", 1)],
        )
        .unwrap();
        assert_eq!(relative_threshold(&g, 0.5).unwrap(), 6);
        assert_eq!(relative_threshold(&g, 0.61).unwrap(), 3);
        assert_eq!(relative_threshold(&g, 1.0).unwrap(), 1);
        assert!(relative_threshold(&g, 0.0).is_err());
        assert_eq!(relative_threshold(&TransitionGraph::default(), 0.5).unwrap(), 1);
    }

    #[test]
    fn empty_graph_stats() {
        assert_eq!(graph_stats(&TransitionGraph::default()), GraphStats::default());
    }

    #[test]
    fn edge_list_is_sorted_by_label() {
        let g = TransitionGraph::from_labeled_edges(&["z", "a"], [("z", "a", 2), ("a", "z", 1)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source_activity_id,target_activity_id,weight\na,z,1\nz,a,2\n"
        );
    }
}
