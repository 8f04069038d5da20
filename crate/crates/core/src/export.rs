//! DOT and GraphML serialization of transition graphs.
//!
//! Edge thickness follows edge weight and node size follows weighted
//! degree. Nodes and edges are emitted sorted by activity label, so the
//! same graph and options always produce the same bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgraph::{graph_stats, TransitionGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Linear,
    /// Maps `ln(1 + value)` instead of the raw value.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub min_penwidth: f64,
    pub max_penwidth: f64,
    pub min_node_size: f64,
    pub max_node_size: f64,
    pub scale_mode: ScaleMode,
    pub include_weights_as_labels: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            min_penwidth: 0.5,
            max_penwidth: 8.0,
            min_node_size: 0.3,
            max_node_size: 2.0,
            scale_mode: ScaleMode::Linear,
            include_weights_as_labels: false,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("penwidth", self.min_penwidth, self.max_penwidth),
            ("node size", self.min_node_size, self.max_node_size),
        ] {
            if !(lo > 0.0 && hi.is_finite() && lo < hi) {
                return Err(Error::Parameter(format!(
                    "{name} range must satisfy 0 < min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn transform(&self, v: f64) -> f64 {
        match self.scale_mode {
            ScaleMode::Linear => v,
            ScaleMode::Log => v.ln_1p(),
        }
    }
}

/// Affine map of `value` from `[lo, hi]` into `[out_lo, out_hi]`; a
/// degenerate input range maps to `out_lo`.
fn scale(opts: &RenderOptions, value: u64, lo: u64, hi: u64, out_lo: f64, out_hi: f64) -> f64 {
    if hi <= lo {
        return out_lo;
    }
    let (v, lo, hi) = (
        opts.transform(value as f64),
        opts.transform(lo as f64),
        opts.transform(hi as f64),
    );
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

struct Layout {
    /// Node indices sorted by label.
    nodes: Vec<u32>,
    /// Position of each node index in `nodes`.
    rank: Vec<usize>,
    /// Edges sorted by (source label, target label).
    edges: Vec<(u32, u32, u64)>,
}

impl Layout {
    fn new(graph: &TransitionGraph) -> Self {
        let mut nodes: Vec<u32> = (0..graph.node_count() as u32).collect();
        nodes.sort_by(|&a, &b| graph.label(a).cmp(graph.label(b)));
        let mut rank = vec![0; nodes.len()];
        for (pos, &n) in nodes.iter().enumerate() {
            rank[n as usize] = pos;
        }
        let mut edges: Vec<_> = graph.edges().collect();
        edges.sort_by_key(|&(s, t, _)| (rank[s as usize], rank[t as usize]));
        Self { nodes, rank, edges }
    }

    fn weight_range(&self) -> (u64, u64) {
        let min = self.edges.iter().map(|e| e.2).min().unwrap_or(0);
        let max = self.edges.iter().map(|e| e.2).max().unwrap_or(0);
        (min, max)
    }
}

fn dot_quote(label: &str) -> String {
    let mut out = String::with_capacity(label.len() + 2);
    out.push('"');
    for c in label.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders the graph as a Graphviz digraph.
pub fn export_dot(graph: &TransitionGraph, opts: &RenderOptions) -> String {
    let layout = Layout::new(graph);
    let stats = graph_stats(graph);
    let wdeg: Vec<u64> = stats.degrees.iter().map(|d| d.weighted_degree()).collect();
    let (deg_lo, deg_hi) = (
        wdeg.iter().copied().min().unwrap_or(0),
        wdeg.iter().copied().max().unwrap_or(0),
    );
    let (w_lo, w_hi) = layout.weight_range();

    let mut out = String::from("digraph G {\n");
    for &n in &layout.nodes {
        let width = scale(opts, wdeg[n as usize], deg_lo, deg_hi, opts.min_node_size, opts.max_node_size);
        let _ = writeln!(out, "  {} [width={width:.3}];", dot_quote(graph.label(n)));
    }
    for &(s, t, w) in &layout.edges {
        let pen = scale(opts, w, w_lo, w_hi, opts.min_penwidth, opts.max_penwidth);
        let _ = write!(
            out,
            "  {} -> {} [penwidth={pen:.3}",
            dot_quote(graph.label(s)),
            dot_quote(graph.label(t))
        );
        if opts.include_weights_as_labels {
            let _ = write!(out, ", label=\"{w}\"");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const GRAPHML_KEYS: &[(&str, &str, &str, &str)] = &[
    ("d0", "node", "activity_id", "string"),
    ("d1", "node", "in_degree", "long"),
    ("d2", "node", "out_degree", "long"),
    ("d3", "node", "weighted_degree", "long"),
    ("d4", "node", "size", "double"),
    ("d5", "edge", "weight", "long"),
    ("d6", "edge", "penwidth", "double"),
];

/// Renders the graph as a GraphML 1.0 document.
pub fn export_graphml(graph: &TransitionGraph, opts: &RenderOptions) -> String {
    let layout = Layout::new(graph);
    let stats = graph_stats(graph);
    let wdeg: Vec<u64> = stats.degrees.iter().map(|d| d.weighted_degree()).collect();
    let (deg_lo, deg_hi) = (
        wdeg.iter().copied().min().unwrap_or(0),
        wdeg.iter().copied().max().unwrap_or(0),
    );
    let (w_lo, w_hi) = layout.weight_range();

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for (id, domain, name, ty) in GRAPHML_KEYS {
        let _ = writeln!(
            out,
            "  <key id=\"{id}\" for=\"{domain}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    for (pos, &n) in layout.nodes.iter().enumerate() {
        let deg = &stats.degrees[n as usize];
        let size = scale(opts, wdeg[n as usize], deg_lo, deg_hi, opts.min_node_size, opts.max_node_size);
        let _ = writeln!(out, "    <node id=\"n{pos}\">");
        let _ = writeln!(out, "      <data key=\"d0\">{}</data>", xml_escape(graph.label(n)));
        let _ = writeln!(out, "      <data key=\"d1\">{}</data>", deg.in_degree);
        let _ = writeln!(out, "      <data key=\"d2\">{}</data>", deg.out_degree);
        let _ = writeln!(out, "      <data key=\"d3\">{}</data>", deg.weighted_degree());
        let _ = writeln!(out, "      <data key=\"d4\">{size:.3}</data>");
        out.push_str("    </node>\n");
    }
    for (e, &(s, t, w)) in layout.edges.iter().enumerate() {
        let pen = scale(opts, w, w_lo, w_hi, opts.min_penwidth, opts.max_penwidth);
        let _ = writeln!(
            out,
            "    <edge id=\"e{e}\" source=\"n{}\" target=\"n{}\">",
            layout.rank[s as usize], layout.rank[t as usize]
        );
        let _ = writeln!(out, "      <data key=\"d5\">{w}</data>");
        let _ = writeln!(out, "      <data key=\"d6\">{pen:.3}</data>");
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
