//! The `gcann` command line.
//!
//! Exit codes: 0 on success, 1 for usage and data errors, 2 for numerical failures (divergence or
//! exponential overflow).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{load_csv, paper_split, save_csv, standard_protocols, synthesize, Split};
use crate::document::{data_hash, summary, ModelDocument, Provenance};
use crate::error::{Error, Result};
use crate::kinematics::{DeformationState, Orientation};
use crate::objective::{evaluate, floor_fraction};
use crate::report::{build_panels, write_report};
use crate::stress::{predict, CovarianceMode};
use crate::trainer::{select_index, sweep_with_hook, FitResult, StepInfo, TrainConfig};

/// Directory searched for data files given by relative path, and for `biaxial.csv` when no
/// `--data` flag is passed.
pub const DATA_DIR_ENV: &str = "GCANN_DATA_DIR";
pub const DEFAULT_DATA_FILE: &str = "biaxial.csv";

#[derive(Parser, Debug)]
#[command(name = "gcann", version, about = "Gaussian constitutive neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model on the fixed train/dev split.
    Fit(FitArgs),
    /// Train over a list of regularization strengths and select one.
    Sweep(SweepArgs),
    /// Evaluate a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Predict the stress distribution at one stretch state.
    Predict(PredictArgs),
    /// Generate a synthetic dataset from a saved model.
    Synth(SynthArgs),
    /// Write per-panel prediction bands for plotting.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Det,
    Indep,
    Corr,
}

impl From<ModeArg> for CovarianceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Det => CovarianceMode::Deterministic,
            ModeArg::Indep => CovarianceMode::IndependentDiag,
            ModeArg::Corr => CovarianceMode::CorrelatedFull,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    All,
}

fn parse_epochs(text: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|e| format!("`{a}`: {e}"))?,
            b.parse().map_err(|e| format!("`{b}`: {e}"))?,
        )),
        _ => Err(format!("expected PRETRAIN,REGULARIZED, got `{text}`")),
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "corr")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pretraining and regularized epochs.
    #[arg(long, value_parser = parse_epochs, default_value = "2000,2000")]
    epochs: (usize, usize),
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    zero_threshold: f64,
    /// Emit a progress record every N epochs.
    #[arg(long)]
    progress_every: Option<usize>,
    /// Write progress records to this file instead of standard output.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    /// Sweep table (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for one model file per α.
    #[arg(long)]
    models_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dev")]
    split: SplitArg,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Evaluate with every curve's stored split instead of the fixed train/dev split.
    #[arg(long)]
    keep_split: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    lambda1: f64,
    #[arg(long)]
    lambda2: f64,
    #[arg(long, default_value = "0-90")]
    orientation: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.2)]
    lambda_max: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also render one SVG per panel.
    #[arg(long)]
    svg: bool,
}

type Out<'a> = &'a mut (dyn Write + Send);

/// Runs the command line with explicit output streams and returns the exit code.
pub fn run<I, T>(args: I, stdout: Out, stderr: Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let Error::Diverged { snapshot, .. } = &e {
                let _ = write!(stderr, "last parameters:\n{}", summary(snapshot));
            }
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: Out) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Resolves the data file: an existing path as given, otherwise relative to the data directory
/// named by [`DATA_DIR_ENV`].
fn resolve_data(path: Option<&Path>) -> Result<PathBuf> {
    let env_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    let candidate = match (path, &env_dir) {
        (Some(p), _) if p.exists() || p.is_absolute() => p.to_path_buf(),
        (Some(p), Some(dir)) => dir.join(p),
        (Some(p), None) => p.to_path_buf(),
        (None, Some(dir)) => dir.join(DEFAULT_DATA_FILE),
        (None, None) => {
            return Err(Error::Data(format!(
                "no data file given: pass --data or set {DATA_DIR_ENV}"
            )))
        }
    };
    Ok(candidate)
}

fn load_split(path: Option<&Path>) -> Result<(crate::data::BiaxialDataset, String)> {
    let path = resolve_data(path)?;
    let data = load_csv(&path)?;
    let hash = data_hash(&std::fs::read(&path)?);
    Ok((paper_split(&data)?, hash))
}

fn config_from(a: &TrainArgs, alpha: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        epochs_pretrain: a.epochs.0,
        epochs_regularized: a.epochs.1,
        batch_size: a.batch_size,
        alpha,
        mode: a.mode.into(),
        seed: a.seed,
        zero_threshold: a.zero_threshold,
        ..TrainConfig::default()
    }
}

/// Runs a sweep, streaming progress records to the log file or `out`.
fn train(a: &TrainArgs, alphas: &[f64], data: &crate::data::BiaxialDataset, out: Out) -> Result<Vec<FitResult>> {
    let config = config_from(a, alphas[0]);
    let Some(every) = a.progress_every.filter(|n| *n > 0) else {
        return sweep_with_hook(alphas, &config, data, None);
    };
    let mut file;
    let sink: Out = match &a.log {
        Some(p) => {
            file = std::fs::File::create(p)?;
            &mut file
        }
        None => out,
    };
    let sink = Mutex::new(sink);
    let hook = |info: &StepInfo| {
        if let Some(r) = info.epoch_record {
            if r.epoch % every == 0 {
                let phase = match r.phase {
                    crate::trainer::Phase::Pretrain => "pretrain",
                    crate::trainer::Phase::Regularized => "regularized",
                };
                let mut w = sink.lock().unwrap_or_else(|e| e.into_inner());
                let _ = writeln!(
                    w,
                    "epoch={} phase={phase} alpha={} loss={:.6} penalty={:.6}",
                    r.epoch, info.alpha, r.train_loss, r.penalty
                );
            }
        }
    };
    sweep_with_hook(alphas, &config, data, Some(&hook))
}

const TABLE_HEADER: &str = "mode,alpha,terms,train_nll,dev_nll,floor_fraction";

fn table_row(mode: CovarianceMode, r: &FitResult, data: &crate::data::BiaxialDataset) -> Result<String> {
    let floor = floor_fraction(&r.model, data, Split::All)?;
    let dev = r.dev_nll.map(|v| format!("{v:.4}")).unwrap_or_default();
    Ok(format!(
        "{},{},{},{:.4},{dev},{:.4}",
        mode.tag(),
        r.alpha,
        r.n_active_terms,
        r.train_nll,
        floor
    ))
}

fn document_for(r: &FitResult, seed: u64, hash: &str) -> ModelDocument {
    ModelDocument::from_model(
        &r.model,
        Provenance {
            alpha: Some(r.alpha),
            seed: Some(seed),
            data_hash: Some(hash.to_string()),
            train_nll: Some(r.train_nll),
            dev_nll: r.dev_nll,
        },
    )
}

fn cmd_fit(a: FitArgs, out: Out) -> Result<()> {
    let (data, hash) = load_split(a.train.data.as_deref())?;
    let result = train(&a.train, &[a.alpha], &data, out)?.remove(0);
    let mode: CovarianceMode = a.train.mode.into();
    writeln!(out, "{TABLE_HEADER}")?;
    writeln!(out, "{}", table_row(mode, &result, &data)?)?;
    if let Some(path) = &a.out {
        document_for(&result, a.train.seed, &hash).save(path)?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, out: Out) -> Result<()> {
    let (data, hash) = load_split(a.train.data.as_deref())?;
    let results = train(&a.train, &a.alphas, &data, out)?;
    let rows: Vec<_> = results.iter().map(FitResult::selection_row).collect();
    let selected = select_index(&rows);
    let mode: CovarianceMode = a.train.mode.into();
    let mut table = format!("{TABLE_HEADER},selected\n");
    for (i, r) in results.iter().enumerate() {
        let mark = if Some(i) == selected { "*" } else { "" };
        table.push_str(&format!("{},{mark}\n", table_row(mode, r, &data)?));
    }
    out.write_all(table.as_bytes())?;
    if let Some(path) = &a.out {
        std::fs::write(path, &table)?;
    }
    if let Some(dir) = &a.models_dir {
        std::fs::create_dir_all(dir)?;
        for r in &results {
            let name = format!("model-{}-alpha{}.json", mode.tag(), r.alpha);
            document_for(r, a.train.seed, &hash).save(dir.join(name))?;
        }
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, out: Out) -> Result<()> {
    let model = ModelDocument::load(&a.model)?.to_model()?;
    let path = resolve_data(a.data.as_deref())?;
    let mut data = load_csv(&path)?;
    if !a.keep_split {
        data = paper_split(&data)?;
    }
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Dev => Split::Dev,
        SplitArg::All => Split::All,
    };
    let b = evaluate(&model, &data, split, a.alpha)?;
    write!(out, "{}", summary(&model))?;
    writeln!(out, "nll={:.6} reg={:.6} total={:.6}", b.nll, b.reg, b.total)?;
    writeln!(out, "floor_fraction={:.4}", floor_fraction(&model, &data, split)?)?;
    for (id, v) in &b.per_curve_nll {
        writeln!(out, "curve {id} nll={v:.6}")?;
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs, out: Out) -> Result<()> {
    let model = ModelDocument::load(&a.model)?.to_model()?;
    let orientation = Orientation::from_tag(&a.orientation).ok_or_else(|| {
        Error::Domain(format!("orientation must be 0-90 or pm45, got `{}`", a.orientation))
    })?;
    let state = DeformationState::new(a.lambda1, a.lambda2, orientation)?;
    let p = predict(&model, &state)?;
    writeln!(out, "mu11={}", p.mu11)?;
    writeln!(out, "mu22={}", p.mu22)?;
    writeln!(out, "std11={}", p.std11())?;
    writeln!(out, "std22={}", p.std22())?;
    Ok(())
}

fn cmd_synth(a: SynthArgs, out: Out) -> Result<()> {
    let model = ModelDocument::load(&a.model)?.to_model()?;
    let data = synthesize(&model, &standard_protocols(a.lambda_max), a.samples, a.points, a.seed)?;
    save_csv(&data, &a.out)?;
    writeln!(
        out,
        "wrote {} observations in {} curves to {}",
        data.n_observations(Split::All),
        data.curves.len(),
        a.out.display()
    )?;
    Ok(())
}

fn cmd_report(a: ReportArgs, out: Out) -> Result<()> {
    let model = ModelDocument::load(&a.model)?.to_model()?;
    let data = load_csv(resolve_data(a.data.as_deref())?)?;
    let panels = build_panels(&model, &data)?;
    let files = write_report(&panels, &a.out_dir, a.svg)?;
    for p in &panels {
        let extra: Vec<String> = p
            .extra_nll
            .iter()
            .map(|(d, v)| format!("{d}:{v:.3}"))
            .collect();
        writeln!(out, "{:<12} extra_nll {}", p.experiment, extra.join(" "))?;
    }
    writeln!(out, "wrote {} files to {}", files.len(), a.out_dir.display())?;
    Ok(())
}
