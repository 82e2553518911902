//! The `facexpr` command line.
//!
//! Exit status is 0 when the requested outputs were fully written, 2 for
//! usage errors (caught before any work starts) and 1 for everything else.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::canny::CannyConfig;
use crate::error::Error;
use crate::imgio::{read_pgm_file, save_pgm};
use crate::mlp::{history_csv, TrainConfig};
use crate::pipeline::{
    build_features, grid_search, preprocess, split, synth_dataset, train_model, ExpressionModel,
    Manifest, PipelineConfig, Split, DEFAULT_HIDDEN_GRID, DEFAULT_RATE_GRID,
};

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "facexpr",
    version,
    about = "Facial expression classification from grayscale face images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Crop, equalize and run Canny on one image; write the edge map as PGM.
    Edges(EdgesArgs),
    /// Split a manifest, fit features and train a model.
    Train(TrainArgs),
    /// Train and score one network per (hidden, rate) cell.
    Grid(GridArgs),
    /// Print the predicted label and the seven output activations.
    Classify(ClassifyArgs),
    /// Score a model on a manifest.
    Eval(EvalArgs),
    /// Write a synthetic face corpus and its manifest.
    Synth(SynthArgs),
    /// Build a manifest from a directory of JAFFE-named PGM files.
    Prep(PrepArgs),
    /// Write a copy of a manifest with stratified train/test tags.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// JSON file overriding the crop, Canny thresholds, region layout or
    /// PCA components.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitOpts {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Held-out images per class when the manifest carries no split tags.
    #[arg(long, default_value_t = 10)]
    pub per_class_test: usize,
}

#[derive(Args, Debug)]
pub struct EdgesArgs {
    pub image: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Absolute low threshold on gradient magnitude (requires --high).
    #[arg(long)]
    pub low: Option<f64>,
    /// Absolute high threshold on gradient magnitude (requires --low).
    #[arg(long)]
    pub high: Option<f64>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    pub manifest: PathBuf,
    /// Model file to write.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Epoch history CSV; defaults to `<out stem>.history.csv` next to the model.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Also write the held-out records as a tagged manifest.
    #[arg(long)]
    pub test_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.3)]
    pub rate: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub target_error: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_epochs: usize,
    #[command(flatten)]
    pub split: SplitOpts,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    pub manifest: PathBuf,
    /// Grid CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Comma-separated learning rates.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATE_GRID.to_vec())]
    pub rates: Vec<f64>,
    /// Comma-separated hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN_GRID.to_vec())]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 200_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub target_error: f64,
    /// Cells trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub split: SplitOpts,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    pub model: PathBuf,
    pub image: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum EvalSubset {
    /// Records tagged `test`, or every record when nothing is tagged.
    Auto,
    Test,
    Train,
    All,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub manifest: PathBuf,
    /// Machine-readable confusion matrix and per-class accuracies.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalSubset::Auto)]
    pub subset: EvalSubset,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u16).range(2..))]
    pub per_class: u16,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct PrepArgs {
    /// Directory of PGM files named like `KA.AN1.39.pgm`.
    pub dir: PathBuf,
    /// Manifest CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    pub manifest: PathBuf,
    /// Tagged manifest CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitOpts,
}

/// A failed command: usage errors exit with 2, stage failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage { stage: &'static str, source: Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Stage { stage, source } => write!(f, "{stage} failed: {source}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Removes the files it tracks unless disarmed, so a failing command leaves
/// no partial outputs behind.
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn write(&mut self, path: &Path, bytes: &[u8], stage: &'static str) -> CliResult<()> {
        crate::write_atomic(path, bytes).stage(stage)?;
        self.0.push(path.to_path_buf());
        Ok(())
    }

    fn commit(mut self) {
        self.0.clear();
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn load_pipeline(args: &PipelineArgs) -> CliResult<PipelineConfig> {
    match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(usage),
        None => Ok(PipelineConfig::default()),
    }
}

fn train_config(
    rate: f64,
    max_epochs: usize,
    target_error: f64,
    seed: u64,
) -> CliResult<TrainConfig> {
    let cfg = TrainConfig {
        learning_rate: rate,
        max_epochs,
        target_error,
        seed,
    };
    cfg.validate().map_err(usage)?;
    if cfg.rate_is_unusual() {
        eprintln!("warning: learning rate {rate} is above 1");
    }
    Ok(cfg)
}

/// Train and test halves: the manifest's own tags when it has any, a
/// seeded stratified split otherwise.
fn train_test(manifest: &Manifest, opts: &SplitOpts) -> CliResult<(Manifest, Manifest)> {
    if manifest.has_split_tags() {
        Ok(manifest.by_tag())
    } else {
        split(manifest, opts.seed, opts.per_class_test).stage("splitting manifest")
    }
}

fn cmd_edges(args: EdgesArgs) -> CliResult<()> {
    let mut cfg = load_pipeline(&args.pipeline)?;
    match (args.low, args.high) {
        (Some(low), Some(high)) => cfg.canny = CannyConfig::absolute(low, high).map_err(usage)?,
        (None, None) => {}
        _ => return Err(usage("--low and --high must be given together")),
    }
    let img = read_pgm_file(&args.image).stage("reading image")?;
    let (_, edges) = preprocess(&img, &cfg).stage("edge detection")?;
    let mut out = Outputs(Vec::new());
    out.write(&args.out, &save_pgm(&edges.to_image()), "writing edge map")?;
    out.commit();
    println!("{} edge pixels", edges.count());
    Ok(())
}

fn default_history_path(model: &Path) -> PathBuf {
    let stem = model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    model.with_file_name(format!("{stem}.history.csv"))
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let cfg = train_config(
        args.rate,
        args.max_epochs,
        args.target_error,
        args.split.seed,
    )?;
    if args.hidden == 0 {
        return Err(usage("--hidden must be positive"));
    }
    let manifest = Manifest::load(&args.manifest).stage("loading manifest")?;
    let (train_m, test_m) = train_test(&manifest, &args.split)?;
    let data = build_features(&train_m, &test_m, &pipeline).stage("feature extraction")?;
    let (model, report) = train_model(&data, &pipeline, args.hidden, &cfg).stage("training")?;

    let history = args
        .history
        .unwrap_or_else(|| default_history_path(&args.out));
    let mut out = Outputs(Vec::new());
    out.write(
        &args.out,
        model.to_json().stage("writing model")?.as_bytes(),
        "writing model",
    )?;
    out.write(
        &history,
        history_csv(&report.history).as_bytes(),
        "writing history",
    )?;
    if let Some(path) = &args.test_manifest {
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let bytes = test_m
            .rebased(base)
            .and_then(|m| m.to_csv())
            .stage("writing test manifest")?;
        out.write(path, &bytes, "writing test manifest")?;
    }
    out.commit();

    println!(
        "train images: {}, test images: {}",
        data.train.len(),
        data.test.len()
    );
    println!("epochs run: {}", report.epochs_run);
    println!("final MSE: {:e}", report.final_mse);
    if !data.test.is_empty() {
        let eval = model.evaluate(&data.test).stage("evaluation")?;
        println!(
            "test accuracy: {:.2}% pooled, {:.2}% per-class average",
            eval.pooled, eval.average_per_class
        );
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> CliResult<()> {
    let pipeline = load_pipeline(&args.pipeline)?;
    if args.rates.is_empty() || args.hidden.is_empty() {
        return Err(usage("--rates and --hidden need at least one value"));
    }
    if args.hidden.contains(&0) {
        return Err(usage("--hidden values must be positive"));
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let mut unusual = false;
    for &rate in &args.rates {
        let cfg = TrainConfig {
            learning_rate: rate,
            max_epochs: args.max_epochs,
            target_error: args.target_error,
            seed: args.split.seed,
        };
        cfg.validate().map_err(usage)?;
        unusual |= cfg.rate_is_unusual();
    }
    if unusual {
        eprintln!("warning: some learning rates are above 1");
    }
    let manifest = Manifest::load(&args.manifest).stage("loading manifest")?;
    let (train_m, test_m) = train_test(&manifest, &args.split)?;
    if test_m.is_empty() {
        return Err(usage(
            "grid search needs held-out images; use --per-class-test > 0",
        ));
    }
    let data = build_features(&train_m, &test_m, &pipeline).stage("feature extraction")?;
    let result = grid_search(
        &data,
        &args.rates,
        &args.hidden,
        args.max_epochs,
        args.target_error,
        args.split.seed,
        args.jobs,
    )
    .stage("grid search")?;
    let mut out = Outputs(Vec::new());
    out.write(&args.out, result.to_csv().as_bytes(), "writing grid")?;
    out.commit();
    let best = result.best_cell();
    println!(
        "best: hidden {} rate {} accuracy {:.2}%",
        best.hidden, best.rate, best.accuracy_percent
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> CliResult<()> {
    let model = ExpressionModel::load(&args.model).stage("loading model")?;
    let img = read_pgm_file(&args.image).stage("reading image")?;
    let (label, outputs) = model.classify_image(&img).stage("classification")?;
    println!("label: {label}");
    for (i, (l, y)) in model.labels.iter().zip(&outputs).enumerate() {
        println!("Y{} {:<10} {:.6}", i + 1, l.title(), y);
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let model = ExpressionModel::load(&args.model).stage("loading model")?;
    let manifest = Manifest::load(&args.manifest).stage("loading manifest")?;
    let subset = match args.subset {
        EvalSubset::Auto if manifest.has_split_tags() => manifest.filter(Some(Split::Test)),
        EvalSubset::Auto | EvalSubset::All => manifest,
        EvalSubset::Test => manifest.filter(Some(Split::Test)),
        EvalSubset::Train => manifest.filter(Some(Split::Train)),
    };
    if subset.is_empty() {
        return Err(CliError::Stage {
            stage: "evaluation",
            source: Error::InvalidArgument("no images to evaluate".into()),
        });
    }
    let data = model.featurize(&subset).stage("feature extraction")?;
    let report = model.evaluate(&data).stage("evaluation")?;
    if let Some(path) = &args.csv {
        let mut out = Outputs(Vec::new());
        out.write(path, report.to_csv().as_bytes(), "writing eval CSV")?;
        out.commit();
    }
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let manifest = synth_dataset(args.seed, args.per_class as usize, &args.out)
        .stage("synthesizing corpus")?;
    println!(
        "{} images written to {}",
        manifest.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_prep(args: PrepArgs) -> CliResult<()> {
    let manifest = Manifest::from_jaffe_dir(&args.dir).stage("scanning directory")?;
    if manifest.is_empty() {
        return Err(CliError::Stage {
            stage: "scanning directory",
            source: Error::Manifest(format!(
                "no JAFFE-named PGM files in {}",
                args.dir.display()
            )),
        });
    }
    write_manifest(&manifest, &args.out)?;
    let counts = manifest.class_counts();
    println!("{} images", manifest.len());
    for e in crate::Expression::ALL {
        println!("{:<10} {}", e.title(), counts[e.index()]);
    }
    Ok(())
}

fn cmd_split(args: SplitArgs) -> CliResult<()> {
    let manifest = Manifest::load(&args.manifest).stage("loading manifest")?;
    let (train_m, test_m) =
        split(&manifest, args.split.seed, args.split.per_class_test).stage("splitting manifest")?;
    let mut records = train_m.records;
    records.extend(test_m.records);
    let order = |p: &Path| manifest.records.iter().position(|r| r.path == p);
    records.sort_by_key(|r| order(&r.path));
    let tagged = Manifest::new(manifest.base_dir.clone(), records).stage("splitting manifest")?;
    write_manifest(&tagged, &args.out)?;
    println!(
        "train: {}, test: {}",
        tagged.filter(Some(Split::Train)).len(),
        tagged.filter(Some(Split::Test)).len()
    );
    Ok(())
}

fn write_manifest(manifest: &Manifest, path: &Path) -> CliResult<()> {
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let bytes = manifest
        .rebased(base)
        .and_then(|m| m.to_csv())
        .stage("writing manifest")?;
    let mut out = Outputs(Vec::new());
    out.write(path, &bytes, "writing manifest")?;
    out.commit();
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Edges(a) => cmd_edges(a),
        Command::Train(a) => cmd_train(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Prep(a) => cmd_prep(a),
        Command::Split(a) => cmd_split(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn train_defaults() {
        let cli = Cli::try_parse_from(["facexpr", "train", "m.csv", "--out", "x.json"]).unwrap();
        let Command::Train(a) = cli.command else {
            panic!()
        };
        assert_eq!(
            (a.hidden, a.rate, a.target_error, a.max_epochs),
            (10, 0.3, 1e-7, 200_000)
        );
        assert_eq!(a.split.seed, DEFAULT_SEED);
        assert_eq!(a.split.per_class_test, 10);
    }

    #[test]
    fn grid_defaults_and_lists() {
        let cli = Cli::try_parse_from(["facexpr", "grid", "m.csv", "-o", "g.csv"]).unwrap();
        let Command::Grid(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.rates.len() * a.hidden.len(), 45);
        let cli = Cli::try_parse_from([
            "facexpr", "grid", "m.csv", "-o", "g.csv", "--rates", "0.3,0.5", "--hidden", "10",
        ])
        .unwrap();
        let Command::Grid(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.rates, vec![0.3, 0.5]);
        assert_eq!(a.hidden, vec![10]);
        assert!(
            Cli::try_parse_from(["facexpr", "grid", "m.csv", "-o", "g.csv", "--rates", ""])
                .is_err()
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        let bad_thresholds = Cli::try_parse_from([
            "facexpr", "edges", "a.pgm", "-o", "b.pgm", "--low", "10", "--high", "5",
        ])
        .unwrap();
        let err = execute(bad_thresholds).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let zero_rate =
            Cli::try_parse_from(["facexpr", "train", "m.csv", "-o", "x.json", "--rate", "0"])
                .unwrap();
        assert_eq!(execute(zero_rate).unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["facexpr", "synth", "-o", "d", "--per-class", "1"]).is_err());
    }

    #[test]
    fn history_path() {
        assert_eq!(
            default_history_path(Path::new("out/model.json")),
            PathBuf::from("out/model.history.csv")
        );
    }
}
