use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathmine::export::{RenderOptions, ScaleMode};
use pathmine::hac::Linkage;
use pathmine_cli::commands::{self, GraphFormat, MineOptions, Selection};
use pathmine_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "pathmine", version, about = "Cluster learner activity sequences and mine their transition graphs")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the config or synth spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct WorkspaceArg {
    /// Workspace directory holding pipeline artifacts.
    #[arg(long, short = 'w')]
    workspace: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an event log into per-student activity sequences.
    Extract {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// Delimited event log (comma or tab separated, with header).
        #[arg(long)]
        log: PathBuf,
        /// Ingestion config, TOML or JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the pairwise edit-distance matrix.
    Distances {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// Also write the matrix as an `i,j,distance` CSV.
        #[arg(long)]
        text: bool,
    },
    /// Build the dendrogram and cut it into k clusters.
    Cluster {
        #[command(flatten)]
        ws: WorkspaceArg,
        #[arg(long, short)]
        k: usize,
        /// ward-squared, ward-raw, average, complete or single.
        #[arg(long, default_value = "ward-squared")]
        linkage: Linkage,
        /// Reference labels (`student_id,cluster_id`) to score with the adjusted Rand index.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Print per-cluster sequence-length statistics.
    Stats {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// Also report mean silhouette for k = 2..=N.
        #[arg(long, value_name = "N")]
        silhouette: Option<usize>,
    },
    /// Mine, filter and export transition graphs.
    Mine {
        #[command(flatten)]
        ws: WorkspaceArg,
        /// `all`, `each` (population plus every cluster) or a cluster id.
        #[arg(long, default_value = "all")]
        cluster: Selection,
        #[arg(long, default_value_t = 1)]
        min_weight: u64,
        /// Keep the heaviest edges carrying this share of total weight (overrides --min-weight).
        #[arg(long, value_name = "SHARE")]
        top_share: Option<f64>,
        #[arg(long)]
        drop_isolated: bool,
        #[arg(long)]
        drop_self_loops: bool,
        #[arg(long, value_enum, default_value_t = FormatArg::Both)]
        format: FormatArg,
        #[arg(long, value_enum, default_value_t = ScaleArg::Linear)]
        scale: ScaleArg,
        /// Print edge weights as DOT labels.
        #[arg(long)]
        edge_labels: bool,
    },
    /// Generate a synthetic event log with planted groups.
    Synth {
        /// Synth spec, JSON or TOML.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write ground-truth labels (default: `<out stem>.labels.csv`).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Graphml,
    Both,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

fn run(cli: Cli) -> CliResult<commands::Report> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))?;
    }
    match cli.command {
        Command::Extract { ws, log, config } => commands::extract(&ws.workspace, &log, &config, cli.seed),
        Command::Distances { ws, text } => commands::distances(&ws.workspace, text),
        Command::Cluster { ws, k, linkage, truth } => {
            commands::cluster(&ws.workspace, k, linkage, truth.as_deref())
        }
        Command::Stats { ws, silhouette } => commands::stats(&ws.workspace, silhouette),
        Command::Mine {
            ws,
            cluster,
            min_weight,
            top_share,
            drop_isolated,
            drop_self_loops,
            format,
            scale,
            edge_labels,
        } => {
            let opts = MineOptions {
                selection: cluster,
                min_weight,
                top_share,
                drop_isolated,
                drop_self_loops,
                format: match format {
                    FormatArg::Dot => GraphFormat::Dot,
                    FormatArg::Graphml => GraphFormat::Graphml,
                    FormatArg::Both => GraphFormat::Both,
                    FormatArg::None => GraphFormat::None,
                },
                render: RenderOptions {
                    scale_mode: match scale {
                        ScaleArg::Linear => ScaleMode::Linear,
                        ScaleArg::Log => ScaleMode::Log,
                    },
                    include_weights_as_labels: edge_labels,
                    ..RenderOptions::default()
                },
            };
            commands::mine(&ws.workspace, &opts)
        }
        Command::Synth { spec, out, labels } => commands::synth(&spec, &out, labels.as_deref(), cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(report) => {
            let _ = commands::print_report(io::stdout().lock(), &report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
