use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use pathmine::eventlog::{ingest, IngestConfig, SequenceTable};
use pathmine::export::{export_dot, export_graphml, RenderOptions};
use pathmine::hac::{
    adjusted_rand_index, agglomerate, cluster_stats, cut_tree, silhouette_report, ClusterAssignment, Dendrogram,
    Linkage,
};
use pathmine::pathgraph::{filter_edges, graph_stats, mine_transition_graph, relative_threshold, TransitionGraph};
use pathmine::seqdist::{pairwise_distances, CondensedDistanceMatrix};
use pathmine::synth::{generate_corpus, write_event_log, SynthSpec};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::workspace::{self as ws, atomic_write, sha256_bytes, sha256_file, StageKey, Workspace};

/// Progress lines for the user; each command returns its own.
pub type Report = Vec<String>;

fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text.into_bytes()
}

fn read_config_file(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {what} {}: {e}", path.display())))
}

/// Loads an ingestion config; `.json` files are JSON, anything else TOML.
pub fn load_ingest_config(path: &Path) -> CliResult<IngestConfig> {
    let text = read_config_file(path, "config")?;
    let parsed: Result<IngestConfig, String> = if has_json_extension(path) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    let config = parsed.map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

fn has_json_extension(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_sequences(ws: &Workspace) -> CliResult<SequenceTable> {
    let file = File::open(ws.path(ws::SEQUENCES))
        .map_err(|_| CliError::config("workspace has no sequences; run `pathmine extract` first"))?;
    Ok(SequenceTable::read_csv(BufReader::new(file))?)
}

fn load_matrix(ws: &Workspace) -> CliResult<CondensedDistanceMatrix> {
    let file = File::open(ws.path(ws::DISTANCES))
        .map_err(|_| CliError::config("workspace has no distance matrix; run `pathmine distances` first"))?;
    Ok(CondensedDistanceMatrix::read_binary(BufReader::new(file))?)
}

fn load_dendrogram(ws: &Workspace) -> CliResult<Dendrogram> {
    let file = File::open(ws.path(ws::DENDROGRAM))
        .map_err(|_| CliError::config("workspace has no dendrogram; run `pathmine cluster` first"))?;
    Ok(Dendrogram::read_csv(BufReader::new(file))?)
}

fn load_assignments(ws: &Workspace, table: &SequenceTable) -> CliResult<ClusterAssignment> {
    let file = File::open(ws.path(ws::ASSIGNMENTS))
        .map_err(|_| CliError::config("workspace has no cluster assignments; run `pathmine cluster` first"))?;
    Ok(ClusterAssignment::read_csv(table, BufReader::new(file))?)
}

fn csv_bytes<F>(write: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> pathmine::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct RowErrorReport<'a> {
    line: u64,
    message: &'a str,
}

#[derive(Serialize)]
struct IngestReport<'a> {
    records: usize,
    filtered: usize,
    row_errors: usize,
    students: usize,
    activities: usize,
    events_in_sequences: usize,
    first_errors: Vec<RowErrorReport<'a>>,
}

pub fn extract(workspace: &Path, log: &Path, config_path: &Path, seed: Option<u64>) -> CliResult<Report> {
    let mut config = load_ingest_config(config_path)?;
    if let Some(seed) = seed {
        config.sample_seed = seed;
    }
    let log_hash =
        sha256_file(log).map_err(|e| CliError::data(format!("cannot read event log {}: {e}", log.display())))?;
    let config_hash = sha256_bytes(&serde_json::to_vec(&config).expect("config serializes"));

    let mut ws = Workspace::open(workspace)?;
    let key = StageKey::default().input("log", log_hash).input("config", config_hash.clone());
    if ws.is_fresh("extract", &key) {
        return Ok(vec!["extract: fresh".into()]);
    }

    let file = File::open(log).map_err(|e| CliError::data(format!("cannot open {}: {e}", log.display())))?;
    let (table, parsed) = ingest(BufReader::new(file), &config)?;
    let mut report = vec![format!(
        "extract: {} records kept, {} filtered, {} rejected rows",
        parsed.records.len(),
        parsed.filtered,
        parsed.error_count()
    )];
    for e in parsed.errors.iter().take(5) {
        report.push(format!("  line {}: {}", e.line, e.message));
    }
    if table.is_empty() {
        return Err(CliError::data(format!(
            "no student sequences survived ingestion of {} ({} rejected rows)",
            log.display(),
            parsed.error_count()
        )));
    }

    let seq_hash = ws.write_artifact(ws::SEQUENCES, &csv_bytes(|b| table.write_csv(b))?)?;
    let lengths = table.lengths();
    let summary = IngestReport {
        records: parsed.records.len(),
        filtered: parsed.filtered,
        row_errors: parsed.error_count(),
        students: table.len(),
        activities: table.catalog().len(),
        events_in_sequences: lengths.iter().sum(),
        first_errors: parsed
            .errors
            .iter()
            .take(20)
            .map(|e| RowErrorReport {
                line: e.line,
                message: &e.message,
            })
            .collect(),
    };
    let report_hash = ws.write_artifact(ws::INGEST_REPORT, &to_json(&summary))?;
    ws.set_config_hash(config_hash);
    ws.record(
        "extract",
        key,
        [(ws::SEQUENCES.into(), seq_hash), (ws::INGEST_REPORT.into(), report_hash)].into(),
    )?;
    report.push(format!(
        "extract: wrote {} ({} students, {} activities)",
        ws::SEQUENCES,
        table.len(),
        table.catalog().len()
    ));
    Ok(report)
}

pub fn distances(workspace: &Path, text: bool) -> CliResult<Report> {
    let mut ws = Workspace::open(workspace)?;
    let key = StageKey::default()
        .input(ws::SEQUENCES, ws.hash_artifact(ws::SEQUENCES)?)
        .param("text", text);
    if ws.is_fresh("distances", &key) {
        return Ok(vec!["distances: fresh".into()]);
    }
    let table = load_sequences(&ws)?;
    let matrix = pairwise_distances(&table)?;
    let mut outputs = BTreeMap::new();
    outputs.insert(
        ws::DISTANCES.to_owned(),
        ws.write_artifact_with(ws::DISTANCES, |w| matrix.write_binary(w))?,
    );
    if text {
        outputs.insert(
            ws::DISTANCES_TEXT.to_owned(),
            ws.write_artifact_with(ws::DISTANCES_TEXT, |w| matrix.write_text(w))?,
        );
    }
    ws.record("distances", key, outputs)?;
    Ok(vec![format!(
        "distances: wrote {} ({} sequences, {} pairs)",
        ws::DISTANCES,
        matrix.n(),
        matrix.data().len()
    )])
}

pub fn cluster(workspace: &Path, k: usize, linkage: Linkage, truth: Option<&Path>) -> CliResult<Report> {
    let mut ws = Workspace::open(workspace)?;
    let mut report = Report::new();

    let dendro_key = StageKey::default()
        .input(ws::DISTANCES, ws.hash_artifact(ws::DISTANCES)?)
        .param("linkage", linkage);
    if ws.is_fresh("dendrogram", &dendro_key) {
        report.push("dendrogram: fresh".into());
    } else {
        let matrix = load_matrix(&ws)?;
        let dendro = agglomerate(&matrix, linkage)?;
        let hash = ws.write_artifact(ws::DENDROGRAM, &csv_bytes(|b| dendro.write_csv(b))?)?;
        ws.record("dendrogram", dendro_key, [(ws::DENDROGRAM.into(), hash)].into())?;
        report.push(format!("dendrogram: wrote {} ({linkage})", ws::DENDROGRAM));
    }

    let key = StageKey::default()
        .input(ws::DENDROGRAM, ws.hash_artifact(ws::DENDROGRAM)?)
        .input(ws::SEQUENCES, ws.hash_artifact(ws::SEQUENCES)?)
        .param("k", k);
    let table = load_sequences(&ws)?;
    if ws.is_fresh("cluster", &key) {
        report.push("cluster: fresh".into());
    } else {
        let dendro = load_dendrogram(&ws)?;
        if dendro.leaf_count() != table.len() {
            return Err(CliError::data(format!(
                "dendrogram has {} leaves but the workspace has {} sequences; rerun `pathmine distances`",
                dendro.leaf_count(),
                table.len()
            )));
        }
        let assign = cut_tree(&dendro, k)?;
        let stats = cluster_stats(&assign, &table)?;
        let a_hash = ws.write_artifact(ws::ASSIGNMENTS, &csv_bytes(|b| assign.write_csv(&table, b))?)?;
        let s_hash = ws.write_artifact(ws::CLUSTER_STATS, &to_json(&stats))?;
        ws.record(
            "cluster",
            key,
            [(ws::ASSIGNMENTS.into(), a_hash), (ws::CLUSTER_STATS.into(), s_hash)].into(),
        )?;
        report.push(format!("cluster: wrote {} and {} (k = {k})", ws::ASSIGNMENTS, ws::CLUSTER_STATS));
    }

    if let Some(truth) = truth {
        let file = File::open(truth)
            .map_err(|e| CliError::config(format!("cannot open truth labels {}: {e}", truth.display())))?;
        let truth = ClusterAssignment::read_csv(&table, BufReader::new(file))?;
        let assign = load_assignments(&ws, &table)?;
        let ari = adjusted_rand_index(assign.labels(), truth.labels())?;
        report.push(format!("adjusted_rand_index: {ari:.6}"));
    }
    Ok(report)
}

#[derive(Serialize)]
struct SilhouetteRow {
    k: usize,
    mean_silhouette: f64,
}

pub fn stats(workspace: &Path, silhouette_max_k: Option<usize>) -> CliResult<Report> {
    let mut ws = Workspace::open(workspace)?;
    let table = load_sequences(&ws)?;
    let assign = load_assignments(&ws, &table)?;
    let rows = cluster_stats(&assign, &table)?;
    let mut report = vec![format!("{:>8} {:>10} {:>12} {:>10}", "cluster", "students", "mean_length", "sd_length")];
    for r in &rows {
        report.push(format!(
            "{:>8} {:>10} {:>12.2} {:>10.2}",
            r.cluster_id, r.student_count, r.mean_length, r.sd_length
        ));
    }
    if let Some(max_k) = silhouette_max_k {
        let key = StageKey::default()
            .input(ws::DISTANCES, ws.hash_artifact(ws::DISTANCES)?)
            .input(ws::DENDROGRAM, ws.hash_artifact(ws::DENDROGRAM)?)
            .param("max_k", max_k);
        if !ws.is_fresh("silhouette", &key) {
            let matrix = load_matrix(&ws)?;
            let dendro = load_dendrogram(&ws)?;
            let sil: Vec<SilhouetteRow> = silhouette_report(&matrix, &dendro, max_k)?
                .into_iter()
                .map(|(k, mean_silhouette)| SilhouetteRow { k, mean_silhouette })
                .collect();
            let hash = ws.write_artifact(ws::SILHOUETTE, &to_json(&sil))?;
            ws.record("silhouette", key, [(ws::SILHOUETTE.into(), hash)].into())?;
        }
        let text = fs::read_to_string(ws.path(ws::SILHOUETTE))
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", ws::SILHOUETTE)))?;
        let sil: Vec<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| CliError::data(format!("corrupt {}: {e}", ws::SILHOUETTE)))?;
        report.push(format!("{:>8} {:>16}", "k", "mean_silhouette"));
        for row in sil {
            report.push(format!("{:>8} {:>16.4}", row["k"].as_u64().unwrap_or(0), row["mean_silhouette"].as_f64().unwrap_or(f64::NAN)));
        }
    }
    Ok(report)
}

/// Which students a mined graph covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    All,
    /// The whole population plus every cluster separately.
    Each,
    Cluster(usize),
}

impl std::str::FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "each" => Ok(Self::Each),
            _ => s
                .parse()
                .map(Self::Cluster)
                .map_err(|_| format!("expected `all`, `each` or a cluster id, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphFormat {
    Dot,
    Graphml,
    #[default]
    Both,
    /// Edge list and stats only.
    None,
}

impl GraphFormat {
    fn dot(self) -> bool {
        matches!(self, Self::Dot | Self::Both)
    }

    fn graphml(self) -> bool {
        matches!(self, Self::Graphml | Self::Both)
    }
}

#[derive(Debug, Clone)]
pub struct MineOptions {
    pub selection: Selection,
    pub min_weight: u64,
    /// When set, overrides `min_weight` with the threshold keeping this
    /// share of total weight.
    pub top_share: Option<f64>,
    pub drop_isolated: bool,
    pub drop_self_loops: bool,
    pub format: GraphFormat,
    pub render: RenderOptions,
}

impl Default for MineOptions {
    fn default() -> Self {
        Self {
            selection: Selection::All,
            min_weight: 1,
            top_share: None,
            drop_isolated: false,
            drop_self_loops: false,
            format: GraphFormat::Both,
            render: RenderOptions::default(),
        }
    }
}

#[derive(Serialize)]
struct GraphSummaryRow {
    selection: String,
    nodes: usize,
    edges: usize,
}

#[derive(Serialize)]
struct NodeStatsRow<'a> {
    activity_id: &'a str,
    in_degree: usize,
    out_degree: usize,
    weighted_in: u64,
    weighted_out: u64,
}

#[derive(Serialize)]
struct FilteredGraphStats<'a> {
    selection: &'a str,
    students: usize,
    min_weight: u64,
    unfiltered_nodes: usize,
    unfiltered_edges: usize,
    node_count: usize,
    edge_count: usize,
    self_loop_count: usize,
    edge_count_without_self_loops: usize,
    total_weight: u64,
    max_weight: u64,
    nodes: Vec<NodeStatsRow<'a>>,
}

pub fn graph_file(tag: &str, ext: &str) -> String {
    format!("graph_{tag}.{ext}")
}

pub fn mine(workspace: &Path, opts: &MineOptions) -> CliResult<Report> {
    opts.render.validate()?;
    let mut ws = Workspace::open(workspace)?;
    let needs_clusters = opts.selection != Selection::All;
    let mut key = StageKey::default()
        .input(ws::SEQUENCES, ws.hash_artifact(ws::SEQUENCES)?)
        .param("selection", format!("{:?}", opts.selection))
        .param("min_weight", opts.min_weight)
        .param("top_share", format!("{:?}", opts.top_share))
        .param("drop_isolated", opts.drop_isolated)
        .param("drop_self_loops", opts.drop_self_loops)
        .param("format", format!("{:?}", opts.format))
        .param("render", serde_json::to_string(&opts.render).expect("options serialize"));
    if needs_clusters {
        key = key.input(ws::ASSIGNMENTS, ws.hash_artifact(ws::ASSIGNMENTS)?);
    }
    if ws.is_fresh("mine", &key) {
        return Ok(vec!["mine: fresh".into()]);
    }

    let table = load_sequences(&ws)?;
    let assign = if needs_clusters { Some(load_assignments(&ws, &table)?) } else { None };
    let mut selections: Vec<(String, Option<usize>)> = Vec::new();
    match opts.selection {
        Selection::All => selections.push(("all".into(), None)),
        Selection::Cluster(c) => selections.push((format!("cluster_{c}"), Some(c))),
        Selection::Each => {
            selections.push(("all".into(), None));
            let k = assign.as_ref().map_or(0, |a| a.k());
            selections.extend((0..k).map(|c| (format!("cluster_{c}"), Some(c))));
        }
    }

    let mut report = Report::new();
    let mut outputs = BTreeMap::new();
    let mut summary = Vec::new();
    for (tag, cluster) in &selections {
        let selection = cluster.map(|c| (assign.as_ref().expect("assignments loaded"), c));
        let graph = mine_transition_graph(&table, selection)?;
        let students = match selection {
            Some((a, c)) => a.labels().iter().filter(|&&l| l == c).count(),
            None => table.len(),
        };
        summary.push(GraphSummaryRow {
            selection: tag.clone(),
            nodes: graph.node_count(),
            edges: graph.edge_count(),
        });
        let base = if opts.drop_self_loops { graph.without_self_loops() } else { graph.clone() };
        let threshold = match opts.top_share {
            Some(share) => relative_threshold(&base, share)?,
            None => opts.min_weight.max(1),
        };
        let filtered = filter_edges(&base, threshold, opts.drop_isolated);
        write_graph(&ws, tag, students, &graph, threshold, &filtered, opts, &mut outputs)?;
        report.push(format!(
            "mine: {tag}: {} nodes, {} edges; kept {} nodes, {} edges at min weight {threshold}",
            graph.node_count(),
            graph.edge_count(),
            filtered.node_count(),
            filtered.edge_count()
        ));
    }
    outputs.insert(ws::GRAPH_SUMMARY.into(), ws.write_artifact(ws::GRAPH_SUMMARY, &to_json(&summary))?);
    ws.record("mine", key, outputs)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn write_graph(
    ws: &Workspace,
    tag: &str,
    students: usize,
    unfiltered: &TransitionGraph,
    min_weight: u64,
    graph: &TransitionGraph,
    opts: &MineOptions,
    outputs: &mut BTreeMap<String, String>,
) -> CliResult<()> {
    let mut put = |name: String, bytes: &[u8]| -> CliResult<()> {
        let hash = ws.write_artifact(&name, bytes)?;
        outputs.insert(name, hash);
        Ok(())
    };
    put(graph_file(tag, "edges.csv"), &csv_bytes(|b| graph.write_edge_list(b))?)?;

    let s = graph_stats(graph);
    let stats = FilteredGraphStats {
        selection: tag,
        students,
        min_weight,
        unfiltered_nodes: unfiltered.node_count(),
        unfiltered_edges: unfiltered.edge_count(),
        node_count: s.node_count,
        edge_count: s.edge_count,
        self_loop_count: s.self_loop_count,
        edge_count_without_self_loops: s.edge_count_without_self_loops,
        total_weight: s.total_weight,
        max_weight: s.max_weight,
        nodes: graph
            .labels()
            .iter()
            .zip(&s.degrees)
            .map(|(label, d)| NodeStatsRow {
                activity_id: label,
                in_degree: d.in_degree,
                out_degree: d.out_degree,
                weighted_in: d.weighted_in,
                weighted_out: d.weighted_out,
            })
            .collect(),
    };
    put(graph_file(tag, "stats.json"), &to_json(&stats))?;
    if opts.format.dot() {
        put(graph_file(tag, "dot"), export_dot(graph, &opts.render).as_bytes())?;
    }
    if opts.format.graphml() {
        put(graph_file(tag, "graphml"), export_graphml(graph, &opts.render).as_bytes())?;
    }
    Ok(())
}

/// Default location of the ground-truth labels written next to a
/// synthetic log: `log.csv` gets `log.labels.csv`.
pub fn default_labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.labels.csv"))
}

pub fn load_synth_spec(path: &Path) -> CliResult<SynthSpec> {
    let text = read_config_file(path, "synth spec")?;
    let spec: Result<SynthSpec, String> = if has_json_extension(path) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    spec.map_err(|e| CliError::config(format!("invalid synth spec {}: {e}", path.display())))
}

pub fn synth(spec_path: &Path, out: &Path, labels: Option<&Path>, seed: Option<u64>) -> CliResult<Report> {
    let mut spec = load_synth_spec(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (table, truth) = generate_corpus(&spec)?;
    let labels = labels.map_or_else(|| default_labels_path(out), Path::to_owned);
    let mut log = Vec::new();
    write_event_log(&table, &mut log)?;
    atomic_write(out, &log)?;
    atomic_write(&labels, &csv_bytes(|b| truth.write_csv(&table, b))?)?;
    let mut report = vec![format!(
        "synth: wrote {} ({} students, {} events) and {}",
        out.display(),
        table.len(),
        table.lengths().iter().sum::<usize>(),
        labels.display()
    )];
    report.extend(
        truth
            .members()
            .iter()
            .enumerate()
            .map(|(g, m)| format!("  group {g}: {} students", m.len())),
    );
    Ok(report)
}

/// Writes each report line to `out`.
pub fn print_report<W: Write>(mut out: W, report: &Report) -> std::io::Result<()> {
    for line in report {
        writeln!(out, "{line}")?;
    }
    Ok(())
}
