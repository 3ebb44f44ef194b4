//! `hetgnn`: dataset tooling, synthetic generation, training and benchmarking.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hetgnn::bench::{
    cm_csv, cm_svg, cmd_bench, cmd_cm, cmd_search, degree_report, run_model, scaling_check,
    timing_of, BenchReport, CmMode, ModelRun, RunConfig, SearchSpace, DEGREE_BUCKETS,
};
use hetgnn::error::ErrorKind;
use hetgnn::fsio;
use hetgnn::graph::{
    edge_homophily, generate_splits, load_dataset, load_splits, node_homophily, observed_cm,
    save_splits, Split,
};
use hetgnn::synth::{self, GaussianBase, Pattern, SynthSpec};
use hetgnn::{Error, Graph, Result};

#[derive(Parser)]
#[command(
    name = "hetgnn",
    version,
    about = "Heterophilous graph learning toolkit"
)]
struct Cli {
    /// Base seed; overrides the seed of --config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// RunConfig JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for JSON, CSV and SVG artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for splits and trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset inspection and split generation.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Synthetic graph generation.
    Synth {
        #[command(subcommand)]
        cmd: SynthCmd,
    },
    /// Train one model on one split.
    Train(TrainArgs),
    /// Train on every selected split and aggregate mean and std.
    Bench(DataArgs),
    /// Per-degree-bucket accuracy of stored runs.
    DegreeReport(DegreeArgs),
    /// Random hyperparameter search.
    Search(SearchArgs),
    /// Compatibility matrix as CSV and SVG heatmap.
    Cm(CmArgs),
    /// Per-epoch wall-clock report and hidden-size scaling check.
    Timing(TimingArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Print size, homophily and compatibility statistics.
    Inspect { dir: PathBuf },
    /// Generate random 48/32/20 splits.
    Split {
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_splits: usize,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Generate a dataset from a target compatibility matrix on a Gaussian base.
    Gen(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Diagonal of the target matrix.
    #[arg(long)]
    homophily: f64,
    #[arg(long, default_value = "easy")]
    pattern: Pattern,
    #[arg(long, default_value_t = 18.0)]
    degree: f64,
    #[arg(long, default_value_t = GaussianBase::default().n_nodes)]
    nodes: usize,
    #[arg(long, default_value_t = GaussianBase::default().n_classes)]
    classes: usize,
    #[arg(long, default_value_t = GaussianBase::default().n_features)]
    features: usize,
    #[arg(long, default_value_t = GaussianBase::default().separation)]
    separation: f64,
    #[arg(long, default_value_t = 10)]
    n_splits: usize,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory; overrides the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Model name or spec path; overrides the config.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    split: usize,
}

#[derive(Args)]
struct DegreeArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Run JSON files (from `train`) or bench reports.
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEGREE_BUCKETS)]
    buckets: usize,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of trials.
    #[arg(long)]
    budget: usize,
    /// SearchSpace JSON; defaults to the standard space.
    #[arg(long)]
    space: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Observed,
    Estimated,
    KnnReneighbored,
}

#[derive(Args)]
struct CmArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "observed")]
    mode: ModeArg,
    /// Neighbours per node in knn-reneighbored mode.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Trained CMGNN run (or bench report) for estimated mode.
    #[arg(long)]
    run: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    split: usize,
    /// Report on a stored run instead of training one.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Also time a fixed number of epochs at nhidden and 2 * nhidden.
    #[arg(long)]
    scaling_epochs: Option<usize>,
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn with(&self, data: &DataArgs) -> RunConfig {
        let mut cfg = self.cfg.clone();
        if let Some(d) = &data.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(m) = &data.model {
            cfg.model = m.clone();
        }
        cfg
    }

    fn dataset(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.cfg.dataset.clone())
            .ok_or_else(|| Error::Config("no dataset: pass --dataset or set it in --config".into()))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        match &self.out {
            Some(dir) => fsio::write_json(&dir.join(name), value),
            None => Ok(()),
        }
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(dir) => fsio::write_atomic(&dir.join(name), text.as_bytes()),
            None => Ok(()),
        }
    }
}

fn load_with_splits(dir: &Path) -> Result<(Graph, Vec<Split>)> {
    let g = load_dataset(dir)?;
    let splits = load_splits(dir, g.n_nodes())?;
    Ok((g, splits))
}

fn json_of<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

#[derive(Serialize)]
struct Inspection {
    name: String,
    n_nodes: usize,
    n_edges: usize,
    n_features: usize,
    n_classes: usize,
    directed: bool,
    labeled: usize,
    class_counts: Vec<usize>,
    edge_homophily: Option<f64>,
    node_homophily: Option<f64>,
    cm_diagonal_mean: Option<f64>,
    n_splits: usize,
}

fn inspect(ctx: &Ctx, dir: &Path) -> Result<()> {
    let (g, splits) = load_with_splits(dir)?;
    let mut class_counts = vec![0; g.n_classes()];
    for y in g.labels().iter().flatten() {
        class_counts[*y] += 1;
    }
    let rep = Inspection {
        name: g.name().to_string(),
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        n_features: g.n_features(),
        n_classes: g.n_classes(),
        directed: g.is_directed(),
        labeled: class_counts.iter().sum(),
        class_counts,
        edge_homophily: edge_homophily(&g).ok(),
        node_homophily: node_homophily(&g).ok(),
        cm_diagonal_mean: observed_cm(&g).ok().map(|m| m.diagonal_mean()),
        n_splits: splits.len(),
    };
    ctx.write_json("inspect.json", &rep)?;
    println!("{}", json_of(&rep));
    Ok(())
}

fn split(ctx: &Ctx, dir: &Path, n_splits: usize) -> Result<()> {
    let g = load_dataset(dir)?;
    let splits = generate_splits(&g, n_splits, ctx.seed)?;
    let target = ctx.out.as_deref().unwrap_or(dir);
    save_splits(target, &splits)?;
    println!(
        "wrote {n_splits} splits to {}",
        target.join("splits").display()
    );
    Ok(())
}

fn synth_gen(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let out = ctx
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("synth gen needs --out <dir>".into()))?;
    let base = GaussianBase {
        n_nodes: a.nodes,
        n_classes: a.classes,
        n_features: a.features,
        separation: a.separation,
    };
    let (labels, features) = synth::gaussian_base(&base, ctx.seed)?;
    let target = synth::build_target_cm(a.classes, a.homophily, a.pattern)?;
    let name = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synth".into());
    let g = synth::generate(&SynthSpec {
        name,
        target: target.clone(),
        mean_degree: a.degree,
        labels,
        features,
        seed: ctx.seed,
    })?;
    let report = synth::verify(&g, &target)?;
    let splits = generate_splits(&g, a.n_splits, ctx.seed)?;
    synth::write_dataset(&g, &report, out, &splits)?;
    println!(
        "{} nodes, {} edges, edge homophily {:.4}, max row TV {:.4}",
        g.n_nodes(),
        g.n_edges(),
        report.edge_homophily,
        report.max_row_tv
    );
    Ok(())
}

fn curves_csv(run: &ModelRun) -> String {
    let mut s = String::from("epoch,loss,val_accuracy,ms\n");
    for (e, ((l, v), ms)) in run
        .loss_curve
        .iter()
        .zip(&run.val_curve)
        .zip(&run.epoch_ms)
        .enumerate()
    {
        s.push_str(&format!("{e},{l:.6},{v:.6},{ms:.3}\n"));
    }
    s
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let cfg = ctx.with(&a.data);
    let (g, splits) = load_with_splits(&ctx.dataset(&cfg.dataset)?)?;
    let s = splits
        .get(a.split)
        .ok_or_else(|| Error::Range(format!("split {} of {}", a.split, splits.len())))?;
    let run = run_model(&g, s, a.split, &cfg)?;
    ctx.write_json("run.json", &run)?;
    ctx.write_text("curves.csv", &curves_csv(&run))?;
    if let Some(msg) = &run.diverged {
        eprintln!("warning: training diverged: {msg}");
    }
    println!(
        "{} split {}: test {:.2}, best val {:.2} at epoch {} of {}",
        run.model,
        run.split_id,
        100.0 * run.test_accuracy,
        100.0 * run.best_val_accuracy,
        run.best_epoch,
        run.epochs_run
    );
    Ok(())
}

fn bench(ctx: &Ctx, a: &DataArgs) -> Result<()> {
    let cfg = ctx.with(a);
    let (g, splits) = load_with_splits(&ctx.dataset(&cfg.dataset)?)?;
    let rep = cmd_bench(&g, &splits, &cfg)?;
    let text = rep.to_text();
    ctx.write_json("bench.json", &rep)?;
    ctx.write_text("bench.txt", &text)?;
    print!("{text}");
    if !rep.diverged_splits.is_empty() {
        eprintln!(
            "warning: diverged splits {:?} excluded",
            rep.diverged_splits
        );
    }
    Ok(())
}

/// Runs from a `train` artifact or every run of a bench report.
fn read_runs(path: &Path) -> Result<Vec<ModelRun>> {
    let value: serde_json::Value = fsio::read_json(path)?;
    let parsed = if value.get("runs").is_some() {
        serde_json::from_value::<BenchReport>(value).map(|r| r.runs)
    } else {
        serde_json::from_value::<ModelRun>(value).map(|r| vec![r])
    };
    parsed.map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn degree(ctx: &Ctx, a: &DegreeArgs) -> Result<()> {
    let g = load_dataset(&ctx.dataset(&a.dataset)?)?;
    let mut runs = Vec::new();
    for p in &a.runs {
        runs.extend(read_runs(p)?);
    }
    let rep = degree_report(&g, &runs, a.buckets)?;
    ctx.write_json("degree_report.json", &rep)?;
    println!(
        "{:>6}  {:>9}  {:>8}  {:>8}",
        "bucket", "degree", "size", "accuracy"
    );
    for (b, st) in rep.buckets.iter().enumerate() {
        println!(
            "{b:>6}  {:>4}-{:<4}  {:>8.1}  {:>8.2}",
            st.min_degree,
            st.max_degree,
            st.size,
            100.0 * st.accuracy
        );
    }
    println!(
        "{:>6}  {:>9}  {:>8}  {:>8.2}",
        "all",
        "",
        "",
        100.0 * rep.overall
    );
    Ok(())
}

fn search(ctx: &Ctx, a: &SearchArgs) -> Result<()> {
    let cfg = ctx.with(&a.data);
    let (g, splits) = load_with_splits(&ctx.dataset(&cfg.dataset)?)?;
    let space = match &a.space {
        Some(p) => fsio::read_json::<SearchSpace>(p)?,
        None => SearchSpace::default(),
    };
    let board = ctx.out.as_ref().map(|d| d.join("leaderboard.jsonl"));
    let res = cmd_search(
        &g,
        &splits,
        &space,
        &cfg,
        a.budget,
        ctx.seed,
        board.as_deref(),
    )?;
    ctx.write_json("search.json", &res)?;
    ctx.write_json("best_config.json", &res.best.config)?;
    println!(
        "strategy: {} search, {} trials",
        res.strategy,
        res.leaderboard.len()
    );
    println!("{:>5}  {:>8}  {:>8}", "trial", "val", "test");
    for t in &res.leaderboard {
        let test = t
            .mean_test
            .map_or("diverged".into(), |v| format!("{:.2}", 100.0 * v));
        println!("{:>5}  {:>8.2}  {:>8}", t.trial, 100.0 * t.mean_val, test);
    }
    println!("best config:\n{}", json_of(&res.best.config));
    Ok(())
}

fn cm(ctx: &Ctx, a: &CmArgs) -> Result<()> {
    let g = load_dataset(&ctx.dataset(&a.dataset)?)?;
    let mode = match a.mode {
        ModeArg::Observed => CmMode::Observed,
        ModeArg::Estimated => CmMode::Estimated,
        ModeArg::KnnReneighbored => CmMode::KnnReneighbored { k: a.k },
    };
    let estimate = match (&a.run, mode) {
        (Some(p), CmMode::Estimated) => {
            let runs = read_runs(p)?;
            let snap = runs.into_iter().find_map(|r| r.estimate).ok_or_else(|| {
                Error::InvalidArgument(format!("{} holds no compatibility estimate", p.display()))
            })?;
            Some(snap)
        }
        _ => None,
    };
    let res = cmd_cm(&g, mode, estimate.as_ref())?;
    let label = match mode {
        CmMode::Observed => "observed".to_string(),
        CmMode::Estimated => "estimated".to_string(),
        CmMode::KnnReneighbored { k } => format!("knn-{k}"),
    };
    ctx.write_text("cm.csv", &cm_csv(&res.matrix))?;
    ctx.write_text(
        "cm.svg",
        &cm_svg(&res.matrix, &format!("{} ({label})", g.name())),
    )?;
    if let Some(o) = &res.observed {
        ctx.write_text("cm_observed.csv", &cm_csv(o))?;
        ctx.write_text(
            "cm_observed.svg",
            &cm_svg(o, &format!("{} (observed)", g.name())),
        )?;
    }
    ctx.write_json("cm.json", &res)?;
    print!("{}", cm_csv(&res.matrix));
    println!("diagonal mean {:.4}", res.diagonal_mean);
    if let Some(d) = res.max_abs_diff {
        println!("max |estimated - observed| {d:.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct TimingOutput {
    timing: hetgnn::bench::TimingReport,
    scaling: Option<hetgnn::bench::ScalingReport>,
}

fn timing(ctx: &Ctx, a: &TimingArgs) -> Result<()> {
    let cfg = ctx.with(&a.data);
    let needs_data = a.run.is_none() || a.scaling_epochs.is_some();
    let data = if needs_data {
        Some(load_with_splits(&ctx.dataset(&cfg.dataset)?)?)
    } else {
        None
    };
    let pick = |splits: &[Split]| {
        splits
            .get(a.split)
            .cloned()
            .ok_or_else(|| Error::Range(format!("split {} of {}", a.split, splits.len())))
    };
    let run = match &a.run {
        Some(p) => read_runs(p)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("{} holds no runs", p.display())))?,
        None => {
            let (g, splits) = data.as_ref().expect("loaded");
            run_model(g, &pick(splits)?, a.split, &cfg)?
        }
    };
    let t = timing_of(&run)?;
    println!(
        "{} epochs, {:.3} ms/epoch, {} compatibility refreshes",
        t.epochs, t.ms_per_epoch, t.refresh_count
    );
    if let Some(r) = t.refresh_ms_per_epoch {
        println!("refresh epochs {r:.3} ms/epoch");
    }
    let scaling = match (a.scaling_epochs, &data) {
        (Some(epochs), Some((g, splits))) => {
            let s = scaling_check(g, &pick(splits)?, &cfg, epochs)?;
            println!(
                "nhidden {} -> {}: {:.3} -> {:.3} ms/epoch, ratio {:.2}",
                s.hidden,
                2 * s.hidden,
                s.base.ms_per_epoch,
                s.doubled.ms_per_epoch,
                s.ratio
            );
            Some(s)
        }
        _ => None,
    };
    ctx.write_json("timing.json", &TimingOutput { timing: t, scaling })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let ctx = Ctx {
        seed: cfg.seed,
        cfg,
        out: cli.out,
    };
    match &cli.cmd {
        Command::Dataset {
            cmd: DatasetCmd::Inspect { dir },
        } => inspect(&ctx, dir),
        Command::Dataset {
            cmd: DatasetCmd::Split { dir, n_splits },
        } => split(&ctx, dir, *n_splits),
        Command::Synth {
            cmd: SynthCmd::Gen(a),
        } => synth_gen(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
        Command::DegreeReport(a) => degree(&ctx, a),
        Command::Search(a) => search(&ctx, a),
        Command::Cm(a) => cm(&ctx, a),
        Command::Timing(a) => timing(&ctx, a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
