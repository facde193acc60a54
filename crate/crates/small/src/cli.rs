//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use small_core::baseline::{BaselineConfig, Penalty};
use small_core::dnf::extract_rules;
use small_core::{solver, Dataset, GradientMode, SolverConfig, TrainedModel};

use crate::data::{self, align_columns, load_csv, LabelColumn, SplitPlan};
use crate::harness::{self, Budget, Format};
use crate::model_io;

#[derive(Debug, Parser)]
#[command(name = "small", version, about = "Sparse multiprototype linear classifiers")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a CSV file.
    Train(TrainArgs),
    /// Score every row of a CSV file.
    Predict(PredictArgs),
    /// Report the accuracy of a model on a labelled CSV file.
    Eval(EvalArgs),
    /// Cross-validate a hyperparameter grid.
    Cv(CvArgs),
    /// Print the features each prototype uses.
    Explain(ExplainArgs),
    /// Compare SMaLL with sparse logistic-regression baselines over repeated splits.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Consistent,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Rows,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Rows => Format::Rows,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column name, or "last".
    #[arg(long = "label-col", default_value = "last")]
    pub label_col: LabelColumn,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Non-zero weights allowed per prototype.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Number of prototypes.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Mask step size.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Dual step size.
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    /// Projection tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-optimize the weights on the selected features after rounding.
    #[arg(long)]
    pub refit: bool,
    /// Give each prototype a bias term that does not count against k.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long = "gradient-mode", value_enum, default_value_t = ModeArg::Consistent)]
    pub gradient_mode: ModeArg,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            k: self.k,
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iters,
            tol: self.tol,
            seed: self.seed,
            gradient_mode: match self.gradient_mode {
                ModeArg::Consistent => GradientMode::Consistent,
                ModeArg::Reduced => GradientMode::Reduced,
            },
            refit: self.refit,
            intercept: self.intercept,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
    /// Where to write the solver trace (tab-separated).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iterations between trace records.
    #[arg(long = "checkpoint-every", default_value_t = 100)]
    pub checkpoint_every: usize,
    /// Record duality-gap estimates in the trace.
    #[arg(long = "trace-gap")]
    pub trace_gap: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV file containing (at least) the model's feature columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Grid such as "alpha=0.1,0.01;beta=0.001" over alpha, beta, lambda, k, p.
    /// Defaults to the alpha x beta step grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Train the selected configuration on all rows and write it here.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Largest number of features listed per prototype.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Write decision values over a grid of two features as `x,y,score` rows.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Feature indices spanning the surface grid.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0, 1])]
    pub axes: Vec<usize>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// SMaLL grid, as for `cv`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Baseline regularization coefficients.
    #[arg(long = "baseline-grid", value_delimiter = ',', default_values_t = harness::DEFAULT_BASELINE_GRID)]
    pub baseline_grid: Vec<f64>,
    /// Features kept when retraining baselines: a count, or "half".
    #[arg(long, default_value = "half")]
    pub budget: String,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    /// Training fraction of each split.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Report file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

/// Parses `"alpha=0.1,0.01;beta=0.001"` into the cross product of the listed
/// values over `base`; keys are applied in the order given.
pub fn parse_grid(spec: &str, base: &SolverConfig) -> anyhow::Result<Vec<SolverConfig>> {
    let mut grid = vec![base.clone()];
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .with_context(|| format!("grid entry {part:?} is not key=values"))?;
        let key = key.trim();
        let values: Vec<&str> = values.split(',').map(str::trim).collect();
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for cfg in &grid {
            for v in &values {
                let mut c = cfg.clone();
                let real = || v.parse::<f64>().with_context(|| format!("grid value {v:?} for {key}"));
                let count = || v.parse::<usize>().with_context(|| format!("grid value {v:?} for {key}"));
                match key {
                    "alpha" => c.alpha = real()?,
                    "beta" => c.beta = real()?,
                    "lambda" => c.lambda = real()?,
                    "k" => c.k = count()?,
                    "p" => c.p = count()?,
                    _ => bail!("unknown grid key {key:?} (expected alpha, beta, lambda, k, p)"),
                }
                next.push(c);
            }
        }
        grid = next;
    }
    Ok(grid)
}

fn parse_budget(s: &str) -> anyhow::Result<Budget> {
    if s == "half" {
        return Ok(Budget::Half);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => bail!("budget must be \"half\" or a positive count, got {s:?}"),
        Ok(b) => Ok(Budget::Fixed(b)),
    }
}

fn load(args: &DataArgs) -> anyhow::Result<Dataset> {
    load_csv(&args.data, &args.label_col).with_context(|| format!("loading {}", args.data.display()))
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn sparsity_lines(model: &TrainedModel) -> String {
    let r = model.sparsity_report();
    let sizes: Vec<String> = r.support_sizes.iter().map(usize::to_string).collect();
    format!(
        "support per prototype: {}\nfeatures: {} total, {} distinct\n",
        sizes.join(" "),
        r.total,
        r.distinct
    )
}

/// Runs a parsed command, writing reports to `stdout` and notes to `stderr`.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(a, stdout, stderr),
        Command::Predict(a) => predict(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Cv(a) => cv(a, stdout, stderr),
        Command::Explain(a) => explain(a, stdout),
        Command::Bench(a) => bench(a, stdout, stderr),
    }
}

fn train(a: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let cfg = SolverConfig {
        checkpoint_every: a.checkpoint_every,
        trace_gap: a.trace_gap,
        ..a.solver.config()
    };
    cfg.validate(d.n_features())?;
    let start = Instant::now();
    let (model, trace) = solver::fit(&d, &cfg)?;
    let elapsed = start.elapsed();
    for w in &trace.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    model_io::save(&model, &a.model)?;
    if let Some(out) = &a.out {
        model_io::write_atomic(out, trace.to_tsv().as_bytes())?;
    }
    writeln!(stdout, "train accuracy: {:.4}", model.accuracy(&d)?)?;
    write!(stdout, "{}", sparsity_lines(&model))?;
    writeln!(stdout, "objective: {:.6}", model.metadata().objective)?;
    writeln!(stderr, "wall time: {:.2} s", elapsed.as_secs_f64())?;
    Ok(())
}

fn predict(a: PredictArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let model = model_io::load(&a.model)?;
    let x = data::load_features(&a.data, model.feature_names())?;
    let mut out = String::from("row,label,max,winner");
    for j in 0..model.prototypes() {
        out.push_str(&format!(",score{j}"));
    }
    out.push('\n');
    for (i, row) in x.row_iter().enumerate() {
        let dec = model.decision_values(row)?;
        out.push_str(&format!("{i},{},{},{}", dec.label().sign(), dec.max, dec.winner));
        for s in &dec.scores {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    write_output(a.out.as_deref(), &out, stdout)
}

fn eval(a: EvalArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let model = model_io::load(&a.model)?;
    let d = align_columns(&load(&a.data)?, model.feature_names())?;
    let predicted = model.predict_dataset(&d)?;
    let correct = predicted.iter().zip(d.labels()).filter(|(p, y)| p == y).count();
    let acc = correct as f64 / d.n_examples() as f64;
    match a.format {
        FormatArg::Table => writeln!(stdout, "accuracy: {acc:.4} ({correct}/{})", d.n_examples())?,
        FormatArg::Rows => {
            writeln!(stdout, "dataset\taccuracy\tcorrect\trows")?;
            writeln!(stdout, "{}\t{acc:.6}\t{correct}\t{}", d.id(), d.n_examples())?;
        }
    }
    Ok(())
}

fn grid_for(spec: Option<&str>, base: &SolverConfig) -> anyhow::Result<Vec<SolverConfig>> {
    match spec {
        Some(s) => parse_grid(s, base),
        None => Ok(harness::default_step_grid(base)),
    }
}

fn cv(a: CvArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let base = a.solver.config();
    let grid = grid_for(a.grid.as_deref(), &base)?;
    for cfg in &grid {
        cfg.validate(d.n_features())?;
    }
    let outcome = harness::cross_validate(&d, &grid, a.folds, base.seed, harness::fit_small)?;
    for w in &outcome.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    let mut text = String::new();
    match a.format {
        FormatArg::Table => {
            text.push_str(&format!(
                "{:>8} {:>8} {:>8} {:>3} {:>3} {:>9} {:>9}\n",
                "alpha", "beta", "lambda", "k", "p", "accuracy", "features"
            ));
            for (cfg, s) in grid.iter().zip(&outcome.scores) {
                text.push_str(&format!(
                    "{:>8} {:>8} {:>8} {:>3} {:>3} {:>9.4} {:>9.2}\n",
                    cfg.alpha, cfg.beta, cfg.lambda, cfg.k, cfg.p, s.mean_accuracy, s.mean_features
                ));
            }
            text.push_str(&format!("best: grid point {}\n", outcome.best_index));
        }
        FormatArg::Rows => {
            text.push_str("index\talpha\tbeta\tlambda\tk\tp\taccuracy\tfeatures\tbest\n");
            for (g, (cfg, s)) in grid.iter().zip(&outcome.scores).enumerate() {
                text.push_str(&format!(
                    "{g}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.4}\t{}\n",
                    cfg.alpha,
                    cfg.beta,
                    cfg.lambda,
                    cfg.k,
                    cfg.p,
                    s.mean_accuracy,
                    s.mean_features,
                    u8::from(g == outcome.best_index)
                ));
            }
        }
    }
    stdout.write_all(text.as_bytes())?;
    if let Some(path) = &a.model {
        let model = harness::fit_small(&d, &outcome.best)?;
        model_io::save(&model, path)?;
    }
    Ok(())
}

fn explain(a: ExplainArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let model = model_io::load(&a.model)?;
    write!(stdout, "{}", extract_rules(&model, a.top))?;
    if let Some(path) = &a.surface {
        let text = surface(&model, a.axes[0], a.axes[1], a.resolution)?;
        model_io::write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

/// Max decision value over a grid spanning three standard deviations around
/// the mean of two features; the remaining features sit at their means.
pub fn surface(model: &TrainedModel, ax: usize, ay: usize, resolution: usize) -> anyhow::Result<String> {
    let n = model.n_features();
    if ax >= n || ay >= n || ax == ay {
        bail!("surface axes {ax},{ay} must be two distinct feature indices below {n}");
    }
    if resolution < 2 {
        bail!("surface resolution must be at least 2");
    }
    let s = model.standardizer();
    let names = model.feature_names();
    let span = |c: usize, t: usize| s.mean()[c] + s.scale()[c] * (-3.0 + 6.0 * t as f64 / (resolution - 1) as f64);
    let mut out = format!("{},{},score\n", names[ax], names[ay]);
    let mut x = s.mean().to_vec();
    for i in 0..resolution {
        for j in 0..resolution {
            x[ax] = span(ax, i);
            x[ay] = span(ay, j);
            let dec = model.decision_values(&x)?;
            out.push_str(&format!("{},{},{}\n", x[ax], x[ay], dec.max));
        }
    }
    Ok(out)
}

fn bench(a: BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let d = load(&a.data)?;
    let base = a.solver.config();
    let grid = grid_for(a.grid.as_deref(), &base)?;
    for cfg in &grid {
        cfg.validate(d.n_features())?;
    }
    if a.baseline_grid.is_empty() || a.baseline_grid.iter().any(|c| !(*c > 0.0)) {
        bail!("baseline coefficients must be positive");
    }
    let budget = parse_budget(&a.budget)?;
    let plan = SplitPlan::holdout(a.ratio, a.splits, base.seed);
    let name = a
        .data
        .data
        .file_stem()
        .map_or_else(|| d.id().to_string(), |s| s.to_string_lossy().into_owned());

    let mut reports = Vec::new();
    log::info!("SMaLL: {} grid points", grid.len());
    let small = harness::evaluate_protocol(&d, &plan, &grid, a.folds, harness::fit_small)?;
    for w in &small.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    reports.push(small.report(&name, "SMaLL"));
    for (penalty, label) in [(Penalty::L1, "L1"), (Penalty::ElasticNet, "EN")] {
        log::info!("{label} baseline");
        let configs: Vec<BaselineConfig> =
            a.baseline_grid.iter().map(|&c| BaselineConfig::new(penalty, c)).collect();
        let outcome = harness::evaluate_protocol(&d, &plan, &configs, a.folds, |train, cfg| {
            harness::fit_baseline(train, cfg, budget)
        })?;
        reports.push(outcome.report(&name, label));
    }
    write_output(a.out.as_deref(), &harness::format_reports(&reports, a.format.into()), stdout)
}
