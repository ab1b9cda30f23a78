//! Command-line entry points. Human-readable output goes to stdout,
//! diagnostics to stderr; see `Error::exit_code` for exit statuses.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gfuse_core::features::assemble_features;
use gfuse_core::solver::{argmax, ChannelPrediction};
use gfuse_core::synth::{contextual_sbm, SbmConfig};
use gfuse_core::trainer::{
    channel_predictions, evaluate, inductive_infer, label_propagation_search, mean_agg, split_accuracies, train,
};
use gfuse_core::{ChannelSpec, Error as CoreError, GraphDataset, Matrix, PropagationConfig, SolveConfig, Split};
use serde_json::{json, Map, Value};

use crate::cache::{load_channels, CacheStatus};
use crate::config::{train_config_json, RunConfig};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::histogram::write_histograms;
use crate::metrics::MetricsDoc;
use crate::model_file::{load_model, save_model};

#[derive(Parser, Debug)]
#[command(name = "gfuse", version, about = "Fully-inductive node classification with attention over closed-form graph channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Propagate and cache channel features.
    Preprocess(PreprocessArgs),
    /// Train the attention model on one graph.
    Train(TrainArgs),
    /// Apply a trained model to a graph and write per-node predictions.
    Infer(InferArgs),
    /// Apply a trained model to a graph and report accuracy.
    Eval(InferArgs),
    /// Run a non-parametric method (labelprop, linear, sgc1, sgc2, hgc1, hgc2, meanagg).
    Baseline(BaselineArgs),
    /// Write histograms of the similarity features.
    ExportFeatures(ExportArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long, default_value = "cache")]
    pub cache_dir: PathBuf,
}

/// Every setting may come from `--config`; flags win.
#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<String>,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub n_batches: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub hidden_dims: Option<String>,
    #[arg(long)]
    pub n_layers: Option<String>,
    #[arg(long)]
    pub entropy: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub mask_hgc: Option<String>,
    #[arg(long)]
    pub rcond: Option<String>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<String>,
    /// Metrics JSON; defaults to `<out>.metrics.json`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Must equal the model's channel list when given.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub rcond: Option<f64>,
    /// Predictions TSV (infer only); defaults to `predictions.tsv`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Channels averaged by `meanagg`.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub entropy: f64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Histogram TSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-node feature TSV.
    #[arg(long)]
    pub values: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub feat_dim: usize,
    #[arg(long, default_value_t = 6.0)]
    pub degree: f64,
    #[arg(long, default_value_t = 0.8)]
    pub homophily: f64,
    #[arg(long, default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a, true),
        Command::Eval(a) => cmd_infer(a, false),
        Command::Baseline(a) => cmd_baseline(a),
        Command::ExportFeatures(a) => cmd_export(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(Error::Config(format!("unknown split `{s}`"))),
    }
}

fn specs_or_default(list: Option<&str>) -> Result<Vec<ChannelSpec>> {
    match list {
        Some(l) => Ok(ChannelSpec::parse_list(l)?),
        None => Ok(ChannelSpec::default_set()),
    }
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or_else(|| "n/a".into(), |a| format!("{:.2}%", 100.0 * a))
}

fn cmd_preprocess(a: PreprocessArgs) -> Result<()> {
    let specs = specs_or_default(a.channels.as_deref())?;
    let graph = load_dataset(&a.dataset)?;
    let (_, log) = load_channels(&graph, &specs, &PropagationConfig::default(), Some(&a.cache_dir))?;
    for l in log {
        let status = match l.status {
            CacheStatus::Hit => "cache hit",
            CacheStatus::Miss => "computed",
            CacheStatus::Corrupt => "recomputed (corrupt cache)",
            CacheStatus::Uncached => "computed (uncached)",
        };
        println!("{}\t{status}\t{:.1} ms", l.name, l.ms);
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let flags = [
        ("dataset", &a.dataset),
        ("cache_dir", &a.cache_dir),
        ("channels", &a.channels),
        ("n_batches", &a.n_batches),
        ("batch_size", &a.batch_size),
        ("lr", &a.lr),
        ("hidden_dims", &a.hidden_dims),
        ("n_layers", &a.n_layers),
        ("entropy", &a.entropy),
        ("seed", &a.seed),
        ("mask_hgc", &a.mask_hgc),
        ("rcond", &a.rcond),
        ("out", &a.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    let train_cfg = cfg.train_config()?;
    let dataset = cfg.dataset()?.to_path_buf();
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.gany"));

    let t = Instant::now();
    let graph = load_dataset(&dataset)?;
    let load_ms = ms_since(t);
    let t = Instant::now();
    let (channels, _) = load_channels(&graph, &train_cfg.channels, &PropagationConfig::default(), cfg.cache_dir.as_deref())?;
    let prop_ms = ms_since(t);
    let t = Instant::now();
    let (model, trained) = train(&graph, &channels, &train_cfg)?;
    let train_ms = ms_since(t);
    save_model(&model, &out)?;
    let t = Instant::now();
    let inf = inductive_infer(&model, &graph, &channels, &train_cfg.solve_config())?;
    let accuracy = split_accuracies(&inf.probs, &graph)?;
    let infer_ms = ms_since(t);

    let mut config = match train_config_json(&train_cfg) {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    config.insert("dataset".into(), json!(dataset.display().to_string()));
    config.insert("out".into(), json!(out.display().to_string()));
    let doc = MetricsDoc {
        command: "train".into(),
        dataset: graph.name().into(),
        seed: Some(train_cfg.seed),
        channels: model.channel_names.clone(),
        accuracy,
        mean_attention: inf.mean_attention(),
        timings_ms: vec![
            ("load".into(), load_ms),
            ("propagate".into(), prop_ms),
            ("train".into(), train_ms),
            ("infer".into(), infer_ms),
        ],
        config,
        loss_trace: Some(trained.loss_trace.clone()),
    };
    let metrics_path = a.metrics.unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".metrics.json");
        p.into()
    });
    doc.write(&metrics_path)?;
    let last = trained.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} batches on {}: final loss {last:.4}, train {} val {} test {}",
        train_cfg.n_batches,
        graph.name(),
        fmt_acc(accuracy.train),
        fmt_acc(accuracy.val),
        fmt_acc(accuracy.test)
    );
    println!("model: {}", out.display());
    println!("metrics: {}", metrics_path.display());
    Ok(())
}

fn cmd_infer(a: InferArgs, write_predictions: bool) -> Result<()> {
    let split = parse_split(&a.split)?;
    let model = load_model(&a.model)?;
    if let Some(list) = &a.channels {
        let names: Vec<String> = ChannelSpec::parse_list(list)?.into_iter().map(|s| s.name).collect();
        model.check_channels(&names)?;
    }
    let specs = model
        .channel_names
        .iter()
        .map(|n| ChannelSpec::parse(n))
        .collect::<gfuse_core::Result<Vec<_>>>()?;
    let solve = SolveConfig {
        rcond: a.rcond.unwrap_or(SolveConfig::default().rcond),
        ..SolveConfig::default()
    };

    let t = Instant::now();
    let graph = load_dataset(&a.dataset)?;
    let load_ms = ms_since(t);
    let nodes = graph.split(split).to_vec();
    if nodes.is_empty() {
        return Err(CoreError::EmptySplit(split.name()).into());
    }
    let t = Instant::now();
    let (channels, _) = load_channels(&graph, &specs, &PropagationConfig::default(), a.cache_dir.as_deref())?;
    let prop_ms = ms_since(t);
    let t = Instant::now();
    let inf = inductive_infer(&model, &graph, &channels, &solve)?;
    let accuracy = split_accuracies(&inf.probs, &graph)?;
    let infer_ms = ms_since(t);

    if write_predictions {
        let path = a.predictions.clone().unwrap_or_else(|| PathBuf::from("predictions.tsv"));
        write_predictions_tsv(&inf.probs, &nodes, &path)?;
        println!("predictions: {} ({} nodes)", path.display(), nodes.len());
    }
    let chosen = evaluate(&inf.probs, &graph, split)?;
    println!("{} accuracy on {}: {:.2}%", split.name(), graph.name(), 100.0 * chosen);
    for (name, w) in model.channel_names.iter().zip(inf.mean_attention()) {
        println!("attention\t{name}\t{w:.4}");
    }
    if let Some(path) = &a.metrics {
        let mut config = Map::new();
        config.insert("model".into(), json!(a.model.display().to_string()));
        config.insert("split".into(), json!(split.name()));
        config.insert("rcond".into(), json!(solve.rcond));
        config.insert("entropy".into(), json!(model.entropy_target));
        MetricsDoc {
            command: if write_predictions { "infer" } else { "eval" }.into(),
            dataset: graph.name().into(),
            seed: None,
            channels: model.channel_names.clone(),
            accuracy,
            mean_attention: inf.mean_attention(),
            timings_ms: vec![
                ("load".into(), load_ms),
                ("propagate".into(), prop_ms),
                ("infer".into(), infer_ms),
            ],
            config,
            loss_trace: None,
        }
        .write(path)?;
    }
    Ok(())
}

pub fn write_predictions_tsv(probs: &Matrix, nodes: &[usize], path: &Path) -> Result<()> {
    let mut out = String::from("node_id\tpredicted_class\tp_max\n");
    for &u in nodes {
        let row = probs.row(u);
        let k = argmax(row);
        writeln!(out, "{u}\t{k}\t{}", row[k]).expect("string write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub const BASELINES: [&str; 7] = ["labelprop", "linear", "sgc1", "sgc2", "hgc1", "hgc2", "meanagg"];

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let method = a.method.to_ascii_lowercase();
    if !BASELINES.contains(&method.as_str()) {
        return Err(Error::UnknownMethod(a.method));
    }
    let t = Instant::now();
    let graph = load_dataset(&a.dataset)?;
    let load_ms = ms_since(t);
    let solve = SolveConfig::default();
    let t = Instant::now();
    let mut config = Map::new();
    config.insert("method".into(), json!(method));
    let (probs, channels) = match method.as_str() {
        "labelprop" => {
            let sel = label_propagation_search(&graph)?;
            println!(
                "labelprop: alpha {} hops {} (val {:.2}%)",
                sel.alpha,
                sel.hops,
                100.0 * sel.val_accuracy
            );
            config.insert("alpha".into(), json!(sel.alpha));
            config.insert("hops".into(), json!(sel.hops));
            (sel.prediction.probs, vec![])
        }
        "meanagg" => {
            let specs = specs_or_default(a.channels.as_deref())?;
            let (ch, _) = load_channels(&graph, &specs, &PropagationConfig::default(), a.cache_dir.as_deref())?;
            let preds = channel_predictions(&graph, &ch, &solve)?;
            (mean_agg(&preds)?, specs.into_iter().map(|s| s.name).collect())
        }
        single => {
            let spec = ChannelSpec::parse(single)?;
            let (ch, _) = load_channels(&graph, std::slice::from_ref(&spec), &PropagationConfig::default(), a.cache_dir.as_deref())?;
            let mut preds: Vec<ChannelPrediction> = channel_predictions(&graph, &ch, &solve)?;
            (preds.remove(0).probs, vec![spec.name])
        }
    };
    let run_ms = ms_since(t);
    let accuracy = split_accuracies(&probs, &graph)?;
    println!("{method} on {}: test accuracy {}", graph.name(), fmt_acc(accuracy.test));
    if let Some(path) = &a.metrics {
        let mean_attention = if method == "meanagg" {
            vec![1.0 / channels.len() as f64; channels.len()]
        } else {
            vec![1.0; channels.len()]
        };
        MetricsDoc {
            command: "baseline".into(),
            dataset: graph.name().into(),
            seed: None,
            channels,
            accuracy,
            mean_attention,
            timings_ms: vec![("load".into(), load_ms), ("run".into(), run_ms)],
            config,
            loss_trace: None,
        }
        .write(path)?;
    }
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let specs = specs_or_default(a.channels.as_deref())?;
    let graph = load_dataset(&a.dataset)?;
    let (ch, _) = load_channels(&graph, &specs, &PropagationConfig::default(), a.cache_dir.as_deref())?;
    let preds = channel_predictions(&graph, &ch, &SolveConfig::default())?;
    let feats = assemble_features(&preds, a.entropy)?;
    write_histograms(&feats.values, a.bins, &a.out)?;
    println!("histograms: {} ({} dims x {} bins)", a.out.display(), feats.values.cols(), a.bins);
    if let Some(path) = &a.values {
        let t = specs.len();
        let mut out = String::from("node_id");
        for i in 0..t {
            for j in (0..t).filter(|&j| j != i) {
                write!(out, "\tp({}|{})", specs[j].name, specs[i].name).expect("string write");
            }
        }
        out.push('\n');
        for u in 0..feats.values.rows() {
            write!(out, "{u}").expect("string write");
            for v in feats.values.row(u) {
                write!(out, "\t{v}").expect("string write");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
        println!("features: {}", path.display());
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let name = a
        .out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    let graph: GraphDataset = contextual_sbm(&SbmConfig {
        name,
        num_nodes: a.nodes,
        num_classes: a.classes,
        feat_dim: a.feat_dim,
        avg_degree: a.degree,
        homophily: a.homophily,
        train_per_class: a.train_per_class,
        seed: a.seed,
        ..SbmConfig::default()
    })?;
    write_dataset(&graph, &a.out)?;
    println!(
        "wrote {} ({} nodes, {} edges, {} classes)",
        a.out.display(),
        graph.num_nodes(),
        graph.adjacency().nnz() / 2,
        graph.num_classes()
    );
    Ok(())
}
