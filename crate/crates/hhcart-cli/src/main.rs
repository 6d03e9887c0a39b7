//! Command-line front end: train, predict, evaluate, and scaling-probe
//! subcommands over CSV data with plain-text schema files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hhcart::data::{load_csv, load_schema, read_rows, split_holdout, write_labels};
use hhcart::eval::{cross_validate, scaling_probe, train_test, EvalConfig};
use hhcart::prune::{prune_sequence, select_subtree};
use hhcart::splitter::SplitterParams;
use hhcart::tree::{grow, load, save, GrowParams};
use hhcart::Variant;

#[derive(Parser)]
#[command(name = "hhcart", version, about = "Oblique decision trees via Householder reflections")]
struct Cli {
    /// Worker threads for split search and fold evaluation (0 = all cores).
    /// Output is identical regardless of the thread count.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a tree, prune it against a holdout, and write the model file.
    Train(TrainArgs),
    /// Load a model and write one predicted label per input row.
    Predict(PredictArgs),
    /// Cross-validate (or train/test with --test) and write a report.
    Eval(EvalArgs),
    /// Time single-node split searches over a (p, n) grid.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "UPPER")]
enum CliVariant {
    A,
    D,
    Ap,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Variant {
        match v {
            CliVariant::A => Variant::A,
            CliVariant::D => Variant::D,
            CliVariant::Ap => Variant::AxisParallel,
        }
    }
}

#[derive(Args)]
struct GrowOpts {
    /// Split search variant: A (all eigenvectors), D (dominant only),
    /// AP (axis-parallel baseline).
    #[arg(long, value_enum, default_value_t = CliVariant::A, ignore_case = true)]
    variant: CliVariant,
    #[arg(long, default_value_t = 2)]
    min_parent: usize,
    #[arg(long, default_value_t = 0.0)]
    mis_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    /// Oblique splits only at nodes with more than this many examples per
    /// feature.
    #[arg(long, default_value_t = 2)]
    min_oblique: usize,
    /// Falls back to the HHCART_SEED environment variable, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

impl GrowOpts {
    fn grow_params(&self) -> Result<GrowParams> {
        if self.min_parent < 2 {
            bail!("--min-parent must be at least 2");
        }
        if !(0.0..1.0).contains(&self.mis_rate) {
            bail!("--mis-rate must lie in [0, 1)");
        }
        if self.tau <= 0.0 {
            bail!("--tau must be positive");
        }
        let mut splitter = SplitterParams::new(self.variant.into());
        splitter.tau = self.tau;
        splitter.min_oblique_n = self.min_oblique;
        Ok(GrowParams {
            min_parent: self.min_parent,
            mis_rate: self.mis_rate,
            splitter,
            seed: self.seed_value()?,
        })
    }

    fn seed_value(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("HHCART_SEED") {
            Ok(v) => v.parse().with_context(|| format!("HHCART_SEED=`{v}` is not an integer")),
            Err(_) => Ok(0),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of the training data held out for pruning (0 disables
    /// pruning).
    #[arg(long, default_value_t = 0.1)]
    prune_fraction: f64,
    #[command(flatten)]
    grow: GrowOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Fixed test set: switches from cross-validation to the repeated
    /// train/test protocol.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Dataset name in the report (defaults to the data file stem).
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0.1)]
    prune_fraction: f64,
    /// Report file (delimited; summary row plus one row per run).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grow: GrowOpts,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    p_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grow: GrowOpts,
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let schema = load_schema(&args.schema)
        .with_context(|| format!("reading schema {}", args.schema.display()))?;
    let ds = load_csv(&args.data, &schema)
        .with_context(|| format!("reading data {}", args.data.display()))?;
    let params = args.grow.grow_params()?;
    let part = split_holdout(&ds, args.prune_fraction, params.seed)?;
    let full = grow(&ds, &part.grow_idx, &params);
    let selected = if part.prune_idx.is_empty() {
        full.clone()
    } else {
        select_subtree(&prune_sequence(&full), &ds, &part.prune_idx)?.tree
    };
    save(&selected, &args.out)?;
    let all: Vec<usize> = (0..ds.n()).collect();
    println!(
        "trained on {} rows ({} features, {} classes): grown {} leaves, pruned {} leaves, \
         training accuracy {:.1}%",
        ds.n(),
        ds.p(),
        ds.n_classes(),
        full.size(),
        selected.size(),
        100.0 * selected.accuracy(&ds, &all)?
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let tree =
        load(&args.model).with_context(|| format!("reading model {}", args.model.display()))?;
    let (rows, _) = read_rows(&args.data, &tree.schema, false)
        .with_context(|| format!("reading data {}", args.data.display()))?;
    let labels: Vec<&str> = rows.iter().map(|r| tree.predict_label(r)).collect::<Result<_, _>>()?;
    write_labels(&labels, &args.out)?;
    println!("{} predictions written to {}", labels.len(), args.out.display());
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let schema = load_schema(&args.schema)
        .with_context(|| format!("reading schema {}", args.schema.display()))?;
    let ds = load_csv(&args.data, &schema)
        .with_context(|| format!("reading data {}", args.data.display()))?;
    let name = match &args.name {
        Some(n) => n.clone(),
        None => args
            .data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
    };
    let grow = args.grow.grow_params()?;
    let cfg = EvalConfig {
        folds: args.folds,
        repeats: args.repeats,
        prune_fraction: args.prune_fraction,
        seed: grow.seed,
        grow,
    };
    let report = match &args.test {
        Some(test_path) => {
            let test = load_csv(test_path, &schema)
                .with_context(|| format!("reading test data {}", test_path.display()))?;
            train_test(&ds, &test, &name, &cfg)?
        }
        None => cross_validate(&ds, &name, &cfg)?,
    };
    println!("{}", report.summary());
    if let Some(out) = &args.out {
        report.write_csv(out)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn run_probe(args: &ProbeArgs) -> Result<()> {
    if args.p_list.is_empty() || args.n_list.is_empty() || args.classes < 2 {
        bail!("probe needs a nonempty grid and at least two classes");
    }
    let params = args.grow.grow_params()?;
    let report =
        scaling_probe(&args.p_list, &args.n_list, args.classes, &params.splitter, params.seed);
    print!("{}", report.summary());
    if let Some(out) = &args.out {
        std::fs::write(out, report.summary())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("building thread pool")?;
    }
    match &cli.command {
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Eval(args) => run_eval(args),
        Command::Probe(args) => run_probe(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // usage errors exit with status 2
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
