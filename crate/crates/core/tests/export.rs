use std::collections::{BTreeMap, HashMap};

use dot_parser::{ast, canonical};
use pathmine::eventlog::SequenceTable;
use pathmine::export::{export_dot, export_graphml, RenderOptions, ScaleMode};
use pathmine::pathgraph::{mine_transition_graph, TransitionGraph};
use pathmine_testkit::{random_corpus, rng};

fn random_graph(seed: u64) -> TransitionGraph {
    let mut r = rng(seed);
    let table = SequenceTable::from_labeled(random_corpus(&mut r, 40, 12, 15)).unwrap();
    mine_transition_graph(&table, None).unwrap()
}

fn expected_edges(g: &TransitionGraph) -> BTreeMap<(String, String), u64> {
    g.labeled_edges()
        .into_iter()
        .map(|((s, t), w)| ((s.to_owned(), t.to_owned()), w))
        .collect()
}

/// Reads edges back with an independent XML parser.
fn graphml_edges(xml: &str) -> BTreeMap<(String, String), u64> {
    let doc = roxmltree::Document::parse(xml).expect("well-formed GraphML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "graphml");
    let keys: HashMap<&str, &str> = root
        .children()
        .filter(|n| n.has_tag_name("key"))
        .map(|k| (k.attribute("id").unwrap(), k.attribute("attr.name").unwrap()))
        .collect();
    let data = |node: roxmltree::Node, name: &str| -> String {
        node.children()
            .filter(|c| c.has_tag_name("data"))
            .find(|c| keys[c.attribute("key").unwrap()] == name)
            .and_then(|c| c.text())
            .unwrap_or_default()
            .to_owned()
    };
    let graph = root.children().find(|n| n.has_tag_name("graph")).unwrap();
    assert_eq!(graph.attribute("edgedefault"), Some("directed"));
    let labels: HashMap<&str, String> = graph
        .children()
        .filter(|n| n.has_tag_name("node"))
        .map(|n| (n.attribute("id").unwrap(), data(n, "activity_id")))
        .collect();
    let mut edges = BTreeMap::new();
    for e in graph.children().filter(|n| n.has_tag_name("edge")) {
        let key = (
            labels[e.attribute("source").unwrap()].clone(),
            labels[e.attribute("target").unwrap()].clone(),
        );
        let weight: u64 = data(e, "weight").parse().unwrap();
        assert!(edges.insert(key, weight).is_none(), "edge listed twice");
    }
    edges
}

#[test]
fn graphml_round_trips_through_independent_parser() {
    for seed in 0..20 {
        let g = random_graph(seed);
        let xml = export_graphml(&g, &RenderOptions::default());
        assert_eq!(graphml_edges(&xml), expected_edges(&g), "seed {seed}");
    }
}

#[test]
fn graphml_escapes_markup_in_labels() {
    let g = TransitionGraph::from_labeled_edges(&["<a&b>", "\"q\""], [("<a&b>", "\"q\"", 2)]).unwrap();
    let xml = export_graphml(&g, &RenderOptions::default());
    assert_eq!(graphml_edges(&xml), expected_edges(&g));
}

fn unquote(id: &str) -> String {
    id.trim_matches('"').replace("\\\"", "\"").replace("\\\\", "\\")
}

#[test]
fn dot_parses_under_external_grammar() {
    for (seed, mode) in [(1, ScaleMode::Linear), (2, ScaleMode::Log), (3, ScaleMode::Linear)] {
        let g = random_graph(seed);
        let opts = RenderOptions {
            scale_mode: mode,
            include_weights_as_labels: seed == 3,
            ..RenderOptions::default()
        };
        let dot = export_dot(&g, &opts);
        let parsed = ast::Graph::try_from(dot.as_str()).expect("valid DOT");
        let parsed = canonical::Graph::from(parsed);
        assert!(parsed.is_digraph);
        assert_eq!(parsed.nodes.set.len(), g.node_count());
        let mut edges: Vec<(String, String)> = parsed
            .edges
            .set
            .iter()
            .map(|e| (unquote(&e.from), unquote(&e.to)))
            .collect();
        edges.sort();
        let want: Vec<(String, String)> = expected_edges(&g).into_keys().collect();
        assert_eq!(edges, want);
        for e in &parsed.edges.set {
            let attrs: Vec<String> = e.attr.elems.iter().map(|(k, _)| k.clone().into()).collect();
            assert!(attrs.iter().any(|k| k == "penwidth"), "{attrs:?}");
        }
    }
}

#[test]
fn empty_and_escaped_dot_parse() {
    let empty = export_dot(&TransitionGraph::default(), &RenderOptions::default());
    assert!(ast::Graph::try_from(empty.as_str()).is_ok());

    let g = TransitionGraph::from_labeled_edges(&["a \"b\"", "c\\d"], [("a \"b\"", "c\\d", 1)]).unwrap();
    let dot = export_dot(&g, &RenderOptions::default());
    assert!(ast::Graph::try_from(dot.as_str()).is_ok(), "{dot}");
}

#[test]
fn output_is_independent_of_node_order() {
    let a = TransitionGraph::from_labeled_edges(&["x", "y", "z"], [("x", "y", 3), ("y", "z", 1), ("z", "x", 7)]).unwrap();
    let b = TransitionGraph::from_labeled_edges(&["z", "x", "y"], [("z", "x", 7), ("x", "y", 3), ("y", "z", 1)]).unwrap();
    let opts = RenderOptions::default();
    assert_eq!(export_dot(&a, &opts), export_dot(&b, &opts));
    assert_eq!(export_graphml(&a, &opts), export_graphml(&b, &opts));
}

#[test]
fn weights_survive_scaling_untouched() {
    let g = random_graph(7);
    let opts = RenderOptions {
        scale_mode: ScaleMode::Log,
        include_weights_as_labels: true,
        ..RenderOptions::default()
    };
    let dot = export_dot(&g, &opts);
    for ((s, t), w) in expected_edges(&g) {
        let needle = format!("\"{s}\" -> \"{t}\" [");
        let line = dot.lines().find(|l| l.contains(&needle)).unwrap();
        assert!(line.ends_with(&format!("label=\"{w}\"];")), "{line}");
    }
    assert_eq!(dot.matches(" -> ").count(), g.edge_count());
}
