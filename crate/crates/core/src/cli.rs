//! The `covertrain` command line.
//!
//! Every artifact embeds a [`RunManifest`]: JSON outputs carry it under a
//! `manifest` key and text outputs start with a `# manifest: {...}` comment
//! line, which all text readers in this crate skip.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cover::{self, ConcaveFn};
use crate::data::{self, Dataset, Format, Standardizer, SynthConfig};
use crate::error::{Error, ErrorKind, Result};
use crate::eval::{bag_accuracy, cross_validate, CvConfig};
use crate::graph;
use crate::loss::LossKind;
use crate::lsvm::{decision, Model, TrainConfig};
use crate::optim::OptConfig;
use crate::pipeline::{self, discover, CoverSettings, InitMode, Method};
use crate::smooth::{Omega, SmoothConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "covertrain", version, about = "Submodular cover discovery and latent SVM training")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object whose keys supply default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Record the wall-clock time in manifests.
    #[arg(long, global = true)]
    pub timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the neighbor graph, run the greedy cover and extract positives.
    Cover(CoverCmd),
    /// Train a classifier.
    Train(TrainCmd),
    /// Bag accuracy of a saved model.
    Eval(EvalCmd),
    /// k-fold cross-validation over C and mu grids.
    Cv(CvCmd),
    /// Generate a planted-signal dataset.
    Synth(SynthCmd),
    /// Export the neighbor graph.
    Graph(GraphCmd),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Cover(_) => "cover",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Cv(_) => "cv",
            Command::Synth(_) => "synth",
            Command::Graph(_) => "graph",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// dense-csv or sparse-bag.
    #[arg(long, default_value = "dense-csv")]
    pub format: Format,
    /// Center and l2-normalize features before use.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoverArgs {
    /// Nearest-neighbor budget per instance.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Per-bag coverage threshold.
    #[arg(long, default_value_t = 1)]
    pub t: u32,
    /// Fraction of the total objective to reach.
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// identity, sqrt or log1p.
    #[arg(long, default_value = "identity")]
    pub g: ConcaveFn,
    /// Number of selected nodes turned into positive clusters.
    #[arg(long, default_value_t = 3)]
    pub n_clusters: usize,
}

impl CoverArgs {
    fn settings(&self) -> CoverSettings {
        CoverSettings {
            k: self.k,
            t: self.t,
            alpha: self.alpha,
            g: self.g,
            n_clusters: self.n_clusters,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptArgs {
    /// L-BFGS history length.
    #[arg(long, default_value_t = 10)]
    pub memory: usize,
    /// Stop when the gradient infinity-norm falls below this.
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

impl OptArgs {
    fn config(&self) -> OptConfig {
        OptConfig {
            memory: self.memory,
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
            ..OptConfig::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Cover,
    Bagavg,
    Negmine,
}

impl InitKind {
    fn mode(self, cover: &CoverArgs) -> InitMode {
        match self {
            InitKind::Cover => InitMode::Cover(cover.settings()),
            InitKind::Bagavg => InitMode::Bagavg,
            InitKind::Negmine => InitMode::Negmine,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoverCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cover: CoverArgs,
    /// Directory receiving cover.json and positives.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LsvmArgs {
    /// Loss weight.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// hinge, squared_hinge or logistic.
    #[arg(long, default_value = "hinge")]
    pub loss: LossKind,
    /// Fit an unregularized bias.
    #[arg(long)]
    pub bias: bool,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// Relative objective decrease that ends the alternation.
    #[arg(long, default_value_t = 1e-6)]
    pub outer_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SmoothArgs {
    /// Number of top-scoring instances per bag (0 evaluates all).
    #[arg(long, default_value_t = 0)]
    pub n_top: usize,
    /// euclidean or entropy.
    #[arg(long, default_value = "euclidean")]
    pub omega: Omega,
    /// Smooth loss of the smoothed objective.
    #[arg(long, default_value = "squared_hinge")]
    pub smooth_loss: LossKind,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// svm, lsvm or slsvm.
    #[arg(long, default_value = "lsvm")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "cover")]
    pub init: InitKind,
    #[command(flatten)]
    pub cover: CoverArgs,
    #[command(flatten)]
    pub lsvm: LsvmArgs,
    /// Smoothing parameter.
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    pub opt: OptArgs,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Standardizer JSON written by `train --standardize`.
    #[arg(long)]
    pub standardizer: Option<PathBuf>,
    /// Output report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional text report.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasChoice {
    No,
    Yes,
    Both,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CvCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "dense-csv")]
    pub format: Format,
    /// Skip per-fold standardization.
    #[arg(long)]
    pub raw: bool,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "lsvm,slsvm")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    pub c_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10")]
    pub mu_grid: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub bias: BiasChoice,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "bagavg")]
    pub init: InitKind,
    #[command(flatten)]
    pub cover: CoverArgs,
    #[arg(long, default_value = "hinge")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub outer_tol: f64,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[command(flatten)]
    pub opt: OptArgs,
    /// Directory receiving cv.json and cv.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthCmd {
    #[arg(long, default_value_t = 40)]
    pub n_pos: usize,
    #[arg(long, default_value_t = 40)]
    pub n_neg: usize,
    #[arg(long, default_value_t = 10)]
    pub bag_size: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 6.0)]
    pub signal_sep: f64,
    /// Add one unshared clutter instance per positive bag at this distance.
    #[arg(long, default_value_t = 0.0)]
    pub clutter_sep: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dense-csv")]
    pub format: Format,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar (default: `<out>.truth`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GraphCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Include edge distances in the text export.
    #[arg(long)]
    pub distances: bool,
    /// Text edge list.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary.
    #[arg(long)]
    pub summary: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub dataset: Option<DatasetDigest>,
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch; only recorded with `--timestamp`.
    pub timestamp: Option<u64>,
}

impl RunManifest {
    fn comment_line(&self) -> String {
        format!("# manifest: {}\n", serde_json::to_string(self).unwrap_or_default())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files written by a command; removed again unless [`Outputs::commit`] runs.
struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            written: Vec::new(),
            committed: false,
        }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.written.push(path.to_path_buf());
        std::fs::write(path, contents)?;
        Ok(())
    }

    fn write_json(&mut self, path: &Path, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, &text)
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

struct Ctx {
    timestamp: bool,
}

impl Ctx {
    fn manifest<P: Serialize>(
        &self,
        command: &str,
        params: &P,
        dataset: Option<&Path>,
        seed: Option<u64>,
    ) -> Result<RunManifest> {
        let dataset = dataset
            .map(|p| {
                Ok::<_, Error>(DatasetDigest {
                    path: p.to_path_buf(),
                    sha256: sha256_file(p)?,
                })
            })
            .transpose()?;
        let timestamp = self.timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Ok(RunManifest {
            command: command.to_string(),
            params: serde_json::to_value(params)?,
            dataset,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        })
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, Option<Standardizer>)> {
    let ds = data::load_dataset(&args.data, args.format)?;
    if args.standardize {
        let st = Standardizer::fit(&ds)?;
        let ds = st.apply(&ds)?;
        Ok((ds, Some(st)))
    } else {
        Ok((ds, None))
    }
}

fn cmd_cover(ctx: &Ctx, cmd: &CoverCmd) -> Result<()> {
    let (ds, _) = load(&cmd.data)?;
    let settings = cmd.cover.settings();
    let cfg = settings.cover_config();
    let mut manifest = ctx.manifest("cover", cmd, Some(&cmd.data.data), None)?;
    let mode = if cfg.is_min_cost_cover() {
        "min_cost_cover"
    } else {
        "partial_cover"
    };
    manifest.params["mode"] = json!(mode);
    let found = discover(&ds, &settings)?;
    let satisfied = found.result.f_final >= cfg.alpha * found.result.f_total;
    let report = json!({
        "manifest": manifest,
        "mode": mode,
        "graph": found.graph.summary(),
        "approx_bound": cover::approx_bound(&cfg)?,
        "satisfied": satisfied,
        "result": found.result,
        "n_clusters": found.n_clusters,
        "clusters": found.clusters,
    });
    let mut listing = manifest.comment_line();
    listing.push_str("# cluster bag_id instance_id\n");
    for (ci, cluster) in found.clusters.iter().enumerate() {
        for r in cluster {
            let _ = writeln!(listing, "{ci} {} {}", r.bag_id, r.instance_id);
        }
    }
    let mut out = Outputs::new();
    out.write_json(&cmd.out_dir.join("cover.json"), &report)?;
    out.write(&cmd.out_dir.join("positives.txt"), &listing)?;
    out.commit();
    Ok(())
}

fn standardizer_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".standardizer.json");
    PathBuf::from(s)
}

fn cmd_train(ctx: &Ctx, cmd: &TrainCmd) -> Result<()> {
    let (ds, st) = load(&cmd.data)?;
    let manifest = ctx.manifest("train", cmd, Some(&cmd.data.data), None)?;
    let tcfg = TrainConfig {
        c: cmd.lsvm.c,
        loss: cmd.lsvm.loss,
        use_bias: cmd.lsvm.bias,
        max_outer: cmd.lsvm.max_outer,
        outer_tol: cmd.lsvm.outer_tol,
        inner: cmd.opt.config(),
    };
    let mode = cmd.init.mode(&cmd.cover);
    let scfg = SmoothConfig {
        mu: cmd.mu,
        n_top: cmd.smooth.n_top,
        omega: cmd.smooth.omega,
        loss: cmd.smooth.smooth_loss,
        c: cmd.lsvm.c,
    };
    let trained = pipeline::train(&ds, cmd.method, &mode, &tcfg, &scfg)?;
    let model = trained.model;
    let mut report = json!({
        "manifest": manifest,
        "method": cmd.method,
        "init": mode.name(),
        "initial_svm": trained.initial,
    });
    if let Some(r) = trained.lsvm {
        report["lsvm"] = serde_json::to_value(r)?;
    }
    if let Some(r) = trained.slsvm {
        report["slsvm"] = serde_json::to_value(r)?;
    }
    report["train_accuracy"] = json!(bag_accuracy(&model, &ds)?);

    let mut out = Outputs::new();
    let mut text = manifest.comment_line();
    text.push_str(&model.to_text());
    out.write(&cmd.model, &text)?;
    if let Some(st) = st {
        let sidecar = json!({ "manifest": manifest, "standardizer": st });
        out.write_json(&standardizer_path(&cmd.model), &sidecar)?;
    }
    out.write_json(&cmd.report, &report)?;
    out.commit();
    Ok(())
}

fn cmd_eval(ctx: &Ctx, cmd: &EvalCmd) -> Result<()> {
    let ds = data::load_dataset(&cmd.data.data, cmd.data.format)?;
    let ds = match &cmd.standardizer {
        Some(p) => {
            let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            let st: Standardizer = serde_json::from_value(v["standardizer"].clone())?;
            st.apply(&ds)?
        }
        None if cmd.data.standardize => data::standardize(&ds)?,
        None => ds,
    };
    let model = Model::load(&cmd.model)?;
    if model.dim() != ds.dim {
        eprintln!(
            "model {} has dimension {}, dataset {} has dimension {}",
            cmd.model.display(),
            model.dim(),
            cmd.data.data.display(),
            ds.dim
        );
        return Err(Error::DimensionMismatch {
            expected: ds.dim,
            found: model.dim(),
        });
    }
    let manifest = ctx.manifest("eval", cmd, Some(&cmd.data.data), None)?;
    let mut decisions = Vec::with_capacity(ds.bags.len());
    let mut correct = 0usize;
    for bag in &ds.bags {
        let d = decision(&model, bag)?;
        if d.label == bag.label {
            correct += 1;
        }
        decisions.push(json!({
            "bag_id": bag.id,
            "label": bag.label,
            "predicted": d.label,
            "argmax": d.argmax,
            "score": d.score,
        }));
    }
    let accuracy = bag_accuracy(&model, &ds)?;
    let report = json!({
        "manifest": manifest,
        "model_sha256": sha256_file(&cmd.model)?,
        "n_bags": ds.bags.len(),
        "correct": correct,
        "accuracy": accuracy,
        "decisions": decisions,
    });
    let mut out = Outputs::new();
    out.write_json(&cmd.out, &report)?;
    if let Some(p) = &cmd.text {
        let mut text = manifest.comment_line();
        let _ = writeln!(text, "dataset   {}", ds.name);
        let _ = writeln!(text, "bags      {}", ds.bags.len());
        let _ = writeln!(text, "correct   {correct}");
        let _ = writeln!(text, "accuracy  {accuracy:.2}%");
        out.write(p, &text)?;
    }
    out.commit();
    Ok(())
}

fn cmd_cv(ctx: &Ctx, cmd: &CvCmd) -> Result<()> {
    let ds = data::load_dataset(&cmd.data, cmd.format)?;
    let manifest = ctx.manifest("cv", cmd, Some(&cmd.data), Some(cmd.seed))?;
    let cfg = CvConfig {
        methods: cmd.methods.clone(),
        bias_variants: match cmd.bias {
            BiasChoice::No => vec![false],
            BiasChoice::Yes => vec![true],
            BiasChoice::Both => vec![false, true],
        },
        c_grid: cmd.c_grid.clone(),
        mu_grid: cmd.mu_grid.clone(),
        k: cmd.folds,
        seed: cmd.seed,
        init: cmd.init.mode(&cmd.cover),
        lsvm_loss: cmd.loss,
        smooth_loss: cmd.smooth.smooth_loss,
        omega: cmd.smooth.omega,
        n_top: cmd.smooth.n_top,
        max_outer: cmd.max_outer,
        outer_tol: cmd.outer_tol,
        opt: cmd.opt.config(),
        standardize: !cmd.raw,
    };
    let report = cross_validate(&ds, &cfg)?;
    let mut table = manifest.comment_line();
    table.push_str(&report.to_table());
    let json = json!({ "manifest": manifest, "report": report });
    let mut out = Outputs::new();
    out.write_json(&cmd.out_dir.join("cv.json"), &json)?;
    out.write(&cmd.out_dir.join("cv.txt"), &table)?;
    out.commit();
    Ok(())
}

fn cmd_synth(ctx: &Ctx, cmd: &SynthCmd) -> Result<()> {
    let cfg = SynthConfig {
        n_pos: cmd.n_pos,
        n_neg: cmd.n_neg,
        bag_size: cmd.bag_size,
        dim: cmd.dim,
        signal_sep: cmd.signal_sep,
        clutter_sep: cmd.clutter_sep,
        seed: cmd.seed,
    };
    let (ds, truth) = data::synth_generate(&cfg)?;
    let manifest = ctx.manifest("synth", cmd, None, Some(cmd.seed))?;
    let truth_path = cmd.truth.clone().unwrap_or_else(|| {
        let mut s = cmd.out.as_os_str().to_owned();
        s.push(".truth");
        PathBuf::from(s)
    });
    let mut out = Outputs::new();
    let mut text = manifest.comment_line();
    text.push_str(&data::write_dataset(&ds, cmd.format));
    out.write(&cmd.out, &text)?;
    let mut t = manifest.comment_line();
    t.push_str(&truth.to_text());
    out.write(&truth_path, &t)?;
    out.commit();
    Ok(())
}

fn cmd_graph(ctx: &Ctx, cmd: &GraphCmd) -> Result<()> {
    let (ds, _) = load(&cmd.data)?;
    let manifest = ctx.manifest("graph", cmd, Some(&cmd.data.data), None)?;
    let built = graph::build_graph_with_distances(&ds, cmd.k)?;
    let mut text = manifest.comment_line();
    text.push_str(
        &built
            .graph
            .export_text(cmd.distances.then_some(built.edge_distances.as_slice())),
    );
    let summary = json!({ "manifest": manifest, "summary": built.graph.summary() });
    let mut out = Outputs::new();
    out.write(&cmd.out, &text)?;
    out.write_json(&cmd.summary, &summary)?;
    out.commit();
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// Finds `--config PATH` or `--config=PATH` anywhere in the arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Translates a JSON object into `--key value` arguments.
fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let Value::Object(map) = v else {
        return Err(Error::invalid("config file must hold a JSON object"));
    };
    let mut out = Vec::new();
    for (key, value) in map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let text = match value {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                out.push(flag.into());
                continue;
            }
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => return Err(Error::invalid(format!("config key {key:?} holds an object"))),
        };
        out.push(flag.into());
        out.push(text.into());
    }
    Ok(out)
}

/// Inserts config-derived arguments right after the subcommand name so that
/// explicit flags, which come later, override them.
fn merge_config(args: Vec<OsString>, extra: Vec<OsString>) -> Vec<OsString> {
    const SUBCOMMANDS: [&str; 6] = ["cover", "train", "eval", "cv", "synth", "graph"];
    let mut skip_value = false;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if s == "--config" || s == "--threads" {
            skip_value = true;
            continue;
        }
        if SUBCOMMANDS.contains(&s.as_ref()) {
            let mut merged = args[..=i].to_vec();
            merged.extend(extra);
            merged.extend_from_slice(&args[i + 1..]);
            return merged;
        }
    }
    args
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        timestamp: cli.timestamp,
    };
    match &cli.command {
        Command::Cover(c) => cmd_cover(&ctx, c),
        Command::Train(c) => cmd_train(&ctx, c),
        Command::Eval(c) => cmd_eval(&ctx, c),
        Command::Cv(c) => cmd_cv(&ctx, c),
        Command::Synth(c) => cmd_synth(&ctx, c),
        Command::Graph(c) => cmd_graph(&ctx, c),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Some(path) = config_path(&args) {
        match config_args(&path) {
            Ok(extra) => args = merge_config(args, extra),
            Err(e) => {
                eprintln!("error: config {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
