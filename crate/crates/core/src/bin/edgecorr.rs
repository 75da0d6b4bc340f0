use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use edgecorr::config::KeyValues;
use edgecorr::correlation::CorrelationMatrix;
use edgecorr::graphgen::GeneratorConfig;
use edgecorr::ingest::{run_pipeline, PipelineConfig};
use edgecorr::phylo::{distance_from_correlation, neighbor_joining, tree_move_distance, PhyloTree};
use edgecorr::search::{search, SearchParams};
use edgecorr::store::Store;

#[derive(Parser)]
#[command(name = "edgecorr", version, about = "Cluster detection and content correlation over edge streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dynamic edge stream as edge lines.
    Generate(GenerateArgs),
    /// Replay edge streams through windows, clusters and correlations.
    Run(RunArgs),
    /// Print the stored correlation matrix.
    Correlate(AtArgs),
    /// Build the stream phylogeny and print it as Newick.
    Tree(TreeArgs),
    /// Estimate the move distance between two Newick trees.
    Treedist(TreedistArgs),
    /// Rank tags by correlation with the query tags.
    Search(SearchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// key=value generator config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ticks: Option<u64>,
    /// uniform, concentrated or step.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    /// Plant the top-degree nodes: this many of them.
    #[arg(long)]
    planted_top: Option<usize>,
    #[arg(long)]
    planted_skip: Option<usize>,
    #[arg(long)]
    step_start: Option<u64>,
    #[arg(long)]
    step_length: Option<u64>,
    #[arg(long)]
    tick_interval: Option<f64>,
    #[arg(long)]
    prefix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    min_store: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key=value pipeline config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A stream as NAME=PATH; repeatable.
    #[arg(long = "stream")]
    streams: Vec<String>,
    /// Read every --stream source as tweet lines.
    #[arg(long)]
    tweets: bool,
    /// Comma-separated times at which to print the correlation matrix.
    #[arg(long)]
    report_times: Option<String>,
    /// Directory for summary.txt and the CSV series.
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct AtArgs {
    #[arg(long)]
    data_dir: PathBuf,
    /// Query time; latest when absent.
    #[arg(long)]
    at: Option<f64>,
}

#[derive(Args)]
struct TreeArgs {
    /// Tab-separated correlation matrix instead of the store.
    #[arg(long, conflicts_with = "data_dir")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    at: Option<f64>,
}

#[derive(Args)]
struct TreedistArgs {
    /// Newick text or a file holding it.
    first: String,
    second: String,
    #[arg(long, default_value_t = edgecorr::phylo::DEFAULT_K)]
    k: usize,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    at: f64,
    #[arg(long, default_value_t = edgecorr::search::DEFAULT_LIMIT)]
    limit: usize,
    #[arg(long, default_value_t = edgecorr::search::DEFAULT_HORIZON)]
    horizon: usize,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
    #[arg(required = true)]
    tags: Vec<String>,
}

/// Config file text followed by override lines; later keys win.
fn layered(config: Option<&Path>, overrides: &[(&str, Option<String>)]) -> Result<String> {
    let mut text = match config {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    text.push('\n');
    for (key, value) in overrides {
        if let Some(v) = value {
            text.push_str(&format!("{key} = {v}\n"));
        }
    }
    Ok(text)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let text = layered(
        args.config.as_deref(),
        &[
            ("n", args.n.map(|v| v.to_string())),
            ("ticks", args.ticks.map(|v| v.to_string())),
            ("mode", args.mode),
            ("q", args.q.map(|v| v.to_string())),
            ("p_in", args.p_in.map(|v| v.to_string())),
            ("planted_top", args.planted_top.map(|v| v.to_string())),
            ("planted_skip", args.planted_skip.map(|v| v.to_string())),
            ("step_start", args.step_start.map(|v| v.to_string())),
            ("step_length", args.step_length.map(|v| v.to_string())),
            ("tick_interval", args.tick_interval.map(|v| v.to_string())),
            ("tag_prefix", args.prefix),
            ("seed", args.seed.map(|v| v.to_string())),
        ],
    )?;
    let cfg = GeneratorConfig::from_key_values(&KeyValues::parse(&text)?)?;
    let out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    for edge in cfg.stream()? {
        writeln!(out, "{edge}")?;
    }
    out.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let e = &args.engine;
    let mut overrides: Vec<(String, Option<String>)> = vec![
        ("tau".into(), e.tau.map(|v| v.to_string())),
        ("lambda".into(), e.lambda.map(|v| v.to_string())),
        ("k".into(), e.k.map(|v| v.to_string())),
        ("gamma".into(), e.gamma.map(|v| v.to_string())),
        ("alpha".into(), e.alpha.map(|v| v.to_string())),
        ("min_store".into(), e.min_store.map(|v| v.to_string())),
        ("seed".into(), e.seed.map(|v| v.to_string())),
        ("report_times".into(), args.report_times.clone()),
    ];
    for s in &args.streams {
        let Some((name, path)) = s.split_once('=') else {
            bail!("--stream expects NAME=PATH, got {s:?}");
        };
        overrides.push((format!("stream.{name}"), Some(path.to_owned())));
        if args.tweets {
            overrides.push((format!("format.{name}"), Some("tweets".into())));
        }
    }
    let borrowed: Vec<(&str, Option<String>)> =
        overrides.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let text = layered(args.config.as_deref(), &borrowed)?;
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or(Path::new("."))
        .to_owned();
    let mut cfg = PipelineConfig::from_key_values(&KeyValues::parse(&text)?, &base)?;
    // paths given on the command line are relative to the working directory
    for s in &mut cfg.streams {
        if let Some(arg) = args.streams.iter().find_map(|a| a.strip_prefix(&format!("{}=", s.name))) {
            s.path = PathBuf::from(arg);
        }
    }
    if let Some(dir) = &e.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    if cfg.streams.is_empty() {
        bail!("no streams configured; pass --stream NAME=PATH or a config with stream.<name> keys");
    }
    let (report, _store) = run_pipeline(&cfg)?;
    print!("{}", report.to_text());
    if let Some(dir) = &args.report_dir {
        report.write_files(dir)?;
    }
    Ok(())
}

fn latest_time(store: &Store) -> f64 {
    store
        .correlation_pairs()
        .filter_map(|(a, b)| store.correlation_history(a, b).last().map(|&(_, t)| t))
        .chain(store.all_clusters().iter().map(|c| c.timestamp))
        .fold(0.0, f64::max)
}

fn stored_matrix(data_dir: &Path, at: Option<f64>) -> Result<CorrelationMatrix> {
    let store = Store::open(data_dir)?;
    let t = at.unwrap_or_else(|| latest_time(&store));
    Ok(store.correlation_matrix(t))
}

fn read_newick(arg: &str) -> Result<PhyloTree> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg)?
    } else {
        arg.to_owned()
    };
    Ok(PhyloTree::from_newick(&text)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate(args) => generate(args)?,
        Command::Run(args) => run(args)?,
        Command::Correlate(args) => {
            print!("{}", stored_matrix(&args.data_dir, args.at)?.to_text());
        }
        Command::Tree(args) => {
            let matrix = match (&args.matrix, &args.data_dir) {
                (Some(path), _) => CorrelationMatrix::parse_text(&fs::read_to_string(path)?)?,
                (None, Some(dir)) => stored_matrix(dir, args.at)?,
                (None, None) => bail!("pass --matrix FILE or --data-dir DIR"),
            };
            let tree = neighbor_joining(&distance_from_correlation(&matrix)?)?;
            println!("{}", tree.to_newick());
        }
        Command::Treedist(args) => {
            let (a, b) = (read_newick(&args.first)?, read_newick(&args.second)?);
            println!("{}", tree_move_distance(&a, &b, args.k));
        }
        Command::Search(args) => {
            let store = Store::open(&args.data_dir)?;
            let matrix = store.correlation_matrix(args.at);
            let tree = if matrix.is_empty() {
                None
            } else {
                Some(neighbor_joining(&distance_from_correlation(&matrix)?)?)
            };
            let tags: Vec<&str> = args.tags.iter().map(String::as_str).collect();
            let params = SearchParams {
                limit: args.limit,
                horizon: args.horizon,
            };
            let outcome = search(&store, tree.as_ref(), &tags, args.at, &params)?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&outcome)?);
            } else {
                print!("{}", outcome.to_text());
            }
        }
    }
    Ok(())
}
