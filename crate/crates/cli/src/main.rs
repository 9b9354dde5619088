use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use pilot_core::eval::{gen_additive, gen_linear, gen_piecewise, kfold_cv, EvalReport, Method};
use pilot_core::numfmt::format_f64;
use pilot_core::{
    build_tree, feature_importance, ingest_csv, load_model, read_aligned_csv, render_text, save_model, write_predictions, Hyperparams, KindSet,
    ModelKind, SCHEMA_VERSION,
};

/// Linear model trees: train, predict, evaluate and inspect.
#[derive(Debug, Parser)]
#[command(name = "pilot")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a tree on a CSV file and write the model as JSON.
    Train(TrainArgs),
    /// Predict with a saved model; writes a `prediction` CSV.
    Predict(PredictArgs),
    /// k-fold cross-validation of PILOT and CART mode.
    Eval(EvalArgs),
    /// Print normalized feature importances of a saved model.
    Importance(ModelArg),
    /// Print a saved model as indented text.
    Print(ModelArg),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// All five node models.
    Full,
    /// CON and PCON only.
    Cart,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    target: String,
    /// Treat these columns as categorical even if they parse as numbers.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
}

#[derive(Debug, Args)]
struct HyperArgs {
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    min_fit: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    min_leaf: Option<u64>,
    /// Comma-separated subset of CON,LIN,PCON,BLIN,PLIN (CON is always kept).
    #[arg(long, value_delimiter = ',', conflicts_with = "mode", value_parser = parse_kind)]
    allowed_kinds: Vec<ModelKind>,
    #[arg(long)]
    min_unique_for_lin_blin: Option<usize>,
    #[arg(long)]
    min_unique_per_child_for_plin: Option<usize>,
    #[arg(long)]
    rss_floor_scale: Option<f64>,
    #[arg(long)]
    max_lin_chain: Option<usize>,
    #[arg(long)]
    min_rel_gain_lin: Option<f64>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::ALL
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown model kind '{s}' (expected CON, LIN, PCON, BLIN or PLIN)"))
}

impl HyperArgs {
    fn hyperparams(&self) -> anyhow::Result<Hyperparams> {
        let mut hp = match self.mode {
            Mode::Full => Hyperparams::default(),
            Mode::Cart => Hyperparams::cart(),
        };
        if !self.allowed_kinds.is_empty() {
            hp.allowed_kinds = KindSet::from_kinds(&self.allowed_kinds);
        }
        let set = |dst: &mut usize, v: Option<u64>| {
            if let Some(v) = v {
                *dst = v as usize;
            }
        };
        set(&mut hp.max_depth, self.max_depth);
        set(&mut hp.min_fit, self.min_fit);
        set(&mut hp.min_leaf, self.min_leaf);
        hp.min_unique_for_lin_blin = self.min_unique_for_lin_blin.unwrap_or(hp.min_unique_for_lin_blin);
        hp.min_unique_per_child_for_plin = self.min_unique_per_child_for_plin.unwrap_or(hp.min_unique_per_child_for_plin);
        hp.rss_floor_scale = self.rss_floor_scale.unwrap_or(hp.rss_floor_scale);
        hp.max_lin_chain = self.max_lin_chain.unwrap_or(hp.max_lin_chain);
        hp.min_rel_gain_lin = self.min_rel_gain_lin.unwrap_or(hp.min_rel_gain_lin);
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the training columns; the target column may be present and is ignored.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Synthetic {
    Linear,
    Additive,
    Piecewise,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Input CSV (needs --target).
    #[arg(long, requires = "target", conflicts_with = "generate")]
    data: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Use a synthetic dataset instead of --data.
    #[arg(long, value_enum, required_unless_present = "data")]
    generate: Option<Synthetic>,
    /// Rows for --generate.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    /// Seeds the fold shuffle and any synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also evaluate both methods on Yeo-Johnson transformed predictors.
    #[arg(long, action = ArgAction::SetTrue)]
    yeo_johnson: bool,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Write the report as CSV here; the aligned table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArg {
    #[arg(long)]
    model: PathBuf,
}

fn check_readable(path: &Path) -> anyhow::Result<()> {
    std::fs::metadata(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(())
}

fn check_writable(path: &Path) -> anyhow::Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        bail!("output directory {} does not exist", parent.display());
    }
    Ok(())
}

fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let hp = args.hyper.hyperparams()?;
    check_readable(&args.data.data)?;
    check_writable(&args.out)?;
    let overrides: HashSet<String> = args.data.categorical.iter().cloned().collect();
    let ds = ingest_csv(&args.data.data, &args.data.target, &overrides)?;
    let tree = build_tree(&ds, &hp)?;
    save_model(&tree, &args.out)?;
    let s = &tree.stats;
    println!(
        "nodes={} leaves={} depth={} train_rss={}",
        s.n_nodes,
        s.n_leaves,
        s.max_depth,
        format_f64(s.train_rss)
    );
    Ok(())
}

fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    check_readable(&args.model)?;
    check_readable(&args.data)?;
    if let Some(out) = &args.out {
        check_writable(out)?;
    }
    let tree = load_model(&args.model)?;
    let table = read_aligned_csv(&args.data, &tree.columns, &[tree.target.as_str()])?;
    let preds = tree.predict_table(&table)?;
    match &args.out {
        Some(path) => pilot_core::save_predictions(path, &preds)?,
        None => write_predictions(std::io::stdout().lock(), &preds)?,
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<bool> {
    let hp = args.hyper.hyperparams()?;
    if let Some(out) = &args.out {
        check_writable(out)?;
    }
    let (name, ds) = match (&args.data, args.generate) {
        (Some(path), _) => {
            check_readable(path)?;
            let overrides: HashSet<String> = args.categorical.iter().cloned().collect();
            let target = args.target.as_deref().expect("clap requires --target");
            let name = path.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
            (name, ingest_csv(path, target, &overrides)?)
        }
        (None, Some(kind)) => {
            let n = args.n as usize;
            let ds = match kind {
                Synthetic::Linear => gen_linear(n, 5, &[1.0, -2.0, 0.5, 3.0, -1.5], 0.1, args.seed)?,
                Synthetic::Additive => gen_additive(n, args.seed)?,
                Synthetic::Piecewise => gen_piecewise(n, args.seed)?,
            };
            (format!("{kind:?}").to_lowercase(), ds)
        }
        (None, None) => unreachable!("clap requires --data or --generate"),
    };
    let pilot = Method {
        hyperparams: hp,
        ..Method::pilot()
    };
    let mut methods = vec![pilot, Method::cart()];
    if args.yeo_johnson {
        let yj: Vec<Method> = methods
            .iter()
            .map(|m| Method {
                name: format!("{}-yj", m.name),
                yeo_johnson: true,
                ..m.clone()
            })
            .collect();
        methods.extend(yj);
    }
    let report: EvalReport = kfold_cv(&name, &ds, args.folds as usize, &methods, args.seed)?;
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_csv()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    print!("{}", report.to_text());
    Ok(!report.any_failed())
}

fn importance(args: &ModelArg) -> anyhow::Result<()> {
    check_readable(&args.model)?;
    let tree = load_model(&args.model)?;
    let imp = feature_importance(&tree);
    let mut out = std::io::stdout().lock();
    for (meta, v) in tree.columns.iter().zip(imp) {
        writeln!(out, "{},{}", meta.name, format_f64(v))?;
    }
    Ok(())
}

fn print_model(args: &ModelArg) -> anyhow::Result<()> {
    check_readable(&args.model)?;
    let tree = load_model(&args.model)?;
    print!("{}", render_text(&tree));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Train(a) => train(a)?,
        Command::Predict(a) => predict(a)?,
        Command::Eval(a) => return eval(a),
        Command::Importance(a) => importance(a)?,
        Command::Print(a) => print_model(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let version = format!("{} (schema_version {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
    let version: &'static str = Box::leak(version.into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: at least one method failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
