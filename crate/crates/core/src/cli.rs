//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and maps failures to exit codes: 2 for usage errors (bad
//! flags, missing files, invalid parameters), 1 for runtime failures.
//! Errors are reported on stderr as a single `lpfc: error: <kind>: <message>` line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::data::{
    add_noise, apply_density, gen_shape, load_cloud, load_split, save_cloud, write_ply, Coloring, DensityPattern,
    NoiseSpec, PointCloud, ShapeKind,
};
use crate::error::Error;
use crate::eval::{
    baseline_sweep, evaluate, evaluate_categories, format_table, load_pcpnet_categories, BaselineEstimator,
    BaselineKind, Estimator, GroundTruthEstimator, MultiScaleEstimator, SingleScaleEstimator, PCPNET_TEST_SPLITS,
};
use crate::models::{ModelConfig, MultiScaleModel, SingleScaleModel};
use crate::patch::{
    derive_seed, error_distance, extract_patch, label_patch, normalize_errors_with, LabelConfig, SpatialIndex,
    DEFAULT_K,
};
use crate::trainer::{
    build_dataset, history_csv, train_multi, train_single, CheckpointPlan, ModelMeta, MultiTrainOptions, TrainConfig,
};

/// Radii of the default three-scale configuration.
pub const DEFAULT_RADII: [f64; 3] = [0.01, 0.03, 0.05];
/// The larger-scale alternative.
pub const MULTI2_RADII: [f64; 3] = [0.03, 0.05, 0.07];

const FORMATS_HELP: &str = "\
File formats:
  .xyz      one point per line: x y z (whitespace separated, '#' comments)
  .normals  one unit normal per line, same order as the .xyz
  .pidx     zero-based indices of the evaluation points, one per line
  split     one shape name per line; <root>/<name>.xyz is loaded
  .ply      ASCII PLY, double x/y/z and uchar red/green/blue per vertex
  .ckpt     text checkpoint ('LPFC-CHECKPOINT v1' header) with a
            <ckpt>.meta.toml sidecar holding radii, k and layer widths
  config    flat TOML of flag values, e.g. `epochs = 20`, `radii = [0.03, 0.05]`;
            flags given on the command line take precedence";

#[derive(Parser, Debug)]
#[command(name = "lpfc", version, about = "Point-cloud normal estimation with local plane constraints", after_help = FORMATS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cloud with ground-truth normals.
    Gen(GenArgs),
    /// Compute ground-truth plane labels of one patch and write them as PLY.
    Labels(LabelsArgs),
    /// Train a single-scale network.
    TrainSingle(TrainSingleArgs),
    /// Train a multi-scale network with learned scale selection.
    TrainMulti(TrainMultiArgs),
    /// Evaluate an estimator and report unoriented angle RMSE.
    Eval(EvalArgs),
    /// Run PCA or jet at several radii and report the best average.
    BaselineSweep(SweepArgs),
    /// Write a PLY coloured by per-point angle error (blue 0° to yellow 60°).
    ExportHeatmap(HeatmapArgs),
    /// Write a PLY of one patch coloured by the network's plane classifier.
    ExportLabels(ExportLabelsArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Seed for every random choice
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for evaluation
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Flat TOML file with flag values; command-line flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Inputs {
    /// Point cloud .xyz (sidecars .normals/.pidx are picked up); repeatable
    #[arg(long = "input")]
    input: Vec<PathBuf>,
    /// Directory holding <name>.xyz files listed by split files
    #[arg(long)]
    dataset_root: Option<PathBuf>,
    /// Split file (relative to --dataset-root unless absolute); repeatable
    #[arg(long = "split")]
    split: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct LabelFlags {
    /// Plane-label threshold θ
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    theta: f64,
    /// Threshold used at radii up to the small-scale cutoff
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    theta_small: f64,
}

impl LabelFlags {
    fn config(&self) -> Result<LabelConfig, CliError> {
        let c = LabelConfig {
            theta: self.theta,
            theta_small: self.theta_small,
            ..LabelConfig::default()
        };
        c.validate().map_err(usage)?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Density {
    Uniform,
    Stripes,
    Gradient,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// plane, sphere, cylinder, cube, dihedral or dihedral:<degrees>
    #[arg(long)]
    shape: String,
    /// Number of points before density thinning
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Gaussian noise std as a fraction of the bounding-box diagonal
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    noise: f64,
    /// Sampling density pattern
    #[arg(long, value_enum, default_value_t = Density::Uniform)]
    density: Density,
    /// Output .xyz path; .normals is written alongside
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PatchFlags {
    /// Input cloud with normals
    #[arg(long)]
    input: PathBuf,
    /// Patch radius as a fraction of the bounding-box diagonal
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    radius: f64,
    /// Centre point index; defaults to the point closest to the origin
    #[arg(long)]
    center: Option<usize>,
    /// Points per patch
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Output .ply path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LabelsArgs {
    #[command(flatten)]
    patch: PatchFlags,
    #[command(flatten)]
    labels: LabelFlags,
    /// Also write `source_index label normalized_error` rows here
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    /// 64-128-1024 point features
    Full,
    /// 64-128 point features and narrow heads
    Reduced,
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[command(flatten)]
    inputs: Inputs,
    /// Training epochs
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// SGD learning rate
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    lr: f64,
    /// SGD momentum
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    momentum: f64,
    /// Points per patch
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Centre points sampled per shape
    #[arg(long, default_value_t = 500)]
    patches_per_shape: usize,
    #[command(flatten)]
    labels: LabelFlags,
    /// Layer-width profile
    #[arg(long, value_enum, default_value_t = Profile::Full)]
    profile: Profile,
    /// TOML file with layer widths (overrides --profile)
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Final checkpoint path (a .meta.toml sidecar is written too)
    #[arg(long)]
    checkpoint: PathBuf,
    /// Also checkpoint every N epochs (0 = only at the end)
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Loss history CSV (epoch, L_normal, L_main, L_total)
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrainSingleArgs {
    /// Patch radius
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    radius: f64,
    /// Minibatch size
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// 0.01, 0.03, 0.05
    Multi1,
    /// 0.03, 0.05, 0.07
    Multi2,
}

#[derive(Args, Debug)]
struct TrainMultiArgs {
    /// Comma-separated ascending radii
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = DEFAULT_RADII.to_vec(), conflicts_with = "preset")]
    radii: Vec<f64>,
    /// Named radius set
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Minibatch size
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Pretrained single-scale checkpoints, one per radius in order
    #[arg(long = "init-from", value_delimiter = ',')]
    init_from: Vec<PathBuf>,
    /// Train only the scale network
    #[arg(long)]
    freeze_subnets: bool,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    Pca,
    Jet,
    /// Trained network from --checkpoint (single- or multi-scale)
    Net,
    /// Ground-truth normals (sanity check)
    Gt,
}

#[derive(Args, Debug)]
struct EstimatorFlags {
    /// Normal estimator
    #[arg(long, value_enum, default_value_t = EstimatorKind::Pca)]
    estimator: EstimatorKind,
    /// Neighbourhood radius for pca/jet
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    radius: f64,
    /// Network checkpoint for --estimator net
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Write the text report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the CSV report here
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    Pca,
    Jet,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Baseline to sweep
    #[arg(long, value_enum, default_value_t = BaselineArg::Pca)]
    estimator: BaselineArg,
    /// Comma-separated radii
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = vec![0.01, 0.02, 0.03, 0.05, 0.07, 0.1])]
    radii: Vec<f64>,
    /// Write the text report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the CSV rows of every radius here
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct HeatmapArgs {
    /// Input cloud with normals
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Output .ply path
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ExportLabelsArgs {
    #[command(flatten)]
    patch: PatchFlags,
    /// Single-scale network checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Probability above which a point counts as a plane point
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Tensor(_) => "tensor",
        Error::Parse { .. } => "parse",
        Error::Io { .. } => "io",
        Error::InvalidArgument(_) => "invalid-argument",
        Error::Degenerate(_) => "degenerate",
        Error::NonFinite(_) => "non-finite",
        Error::Diverged { .. } => "diverged",
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&args) {
        Ok(c) => c,
        Err(ParseOutcome::Exit(code)) => return code,
        Err(ParseOutcome::Usage(msg)) => {
            eprintln!("lpfc: error: usage: {}", one_line(&msg));
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("lpfc: error: usage: {}", one_line(&msg));
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("lpfc: error: {}: {}", error_kind(&e), one_line(&e.to_string()));
            1
        }
    }
}

enum ParseOutcome {
    Exit(i32),
    Usage(String),
}

fn clap_failure(e: clap::Error) -> ParseOutcome {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            ParseOutcome::Exit(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 })
        }
        _ => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            ParseOutcome::Usage(first.trim_start_matches("error: ").to_string())
        }
    }
}

/// Parses twice when a `--config` file is given: once to learn which flags
/// the user typed, then with the remaining config values spliced in.
fn parse(args: &[OsString]) -> Result<Cli, ParseOutcome> {
    let matches = Cli::command().try_get_matches_from(args).map_err(clap_failure)?;
    let Some((sub_name, sub)) = matches.subcommand() else {
        return Err(ParseOutcome::Usage("missing subcommand".into()));
    };
    let Some(config) = sub.get_one::<PathBuf>("config").cloned() else {
        return Cli::from_arg_matches(&matches).map_err(clap_failure);
    };
    let text = fs::read_to_string(&config).map_err(|e| ParseOutcome::Usage(format!("{}: {e}", config.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| ParseOutcome::Usage(format!("{}: {e}", config.display())))?;
    let cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand(sub_name).expect("parsed subcommand exists");
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in &table {
        let long = key.replace('_', "-");
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| ParseOutcome::Usage(format!("{}: unknown key `{key}`", config.display())))?;
        if long == "config" || sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = format!("--{long}");
        let scalar = |v: &toml::Value| -> Result<String, ParseOutcome> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(ParseOutcome::Usage(format!("{}: unsupported value for `{key}`", config.display()))),
            }
        };
        match value {
            toml::Value::Boolean(true) => injected.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    injected.push(flag.clone().into());
                    injected.push(scalar(item)?.into());
                }
            }
            v => {
                injected.push(flag.into());
                injected.push(scalar(v)?.into());
            }
        }
    }
    let pos = args.iter().position(|a| a.to_str() == Some(sub_name)).expect("subcommand token present");
    let mut full: Vec<OsString> = args[..=pos].to_vec();
    full.extend(injected);
    full.extend_from_slice(&args[pos + 1..]);
    let matches = Cli::command().try_get_matches_from(full).map_err(clap_failure)?;
    Cli::from_arg_matches(&matches).map_err(clap_failure)
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Labels(a) => cmd_labels(a),
        Command::TrainSingle(a) => cmd_train_single(a),
        Command::TrainMulti(a) => cmd_train_multi(a),
        Command::Eval(a) => cmd_eval(a),
        Command::BaselineSweep(a) => cmd_sweep(a),
        Command::ExportHeatmap(a) => cmd_heatmap(a),
        Command::ExportLabels(a) => cmd_export_labels(a),
    }
}

fn check_radius(r: f64) -> Result<(), CliError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("radius must be positive, got {r}")))
    }
}

fn check_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn check_out_dir(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(usage(format!("{}: output directory does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

/// Loads `<dir>/<stem>.xyz` with its sidecars.
fn load_path(path: &Path) -> Result<PointCloud, CliError> {
    check_file(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| usage(format!("{}: file name is not valid UTF-8", path.display())))?;
    if path.extension().and_then(|e| e.to_str()) != Some("xyz") {
        return Err(usage(format!("{}: expected an .xyz file", path.display())));
    }
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok(load_cloud(dir, stem)?)
}

/// Resolves the input flags into named categories of clouds.
fn load_inputs(inputs: &Inputs, default_pcpnet: bool) -> Result<Vec<(String, Vec<PointCloud>)>, CliError> {
    let mut groups = Vec::new();
    if !inputs.input.is_empty() {
        let clouds = inputs.input.iter().map(|p| load_path(p)).collect::<Result<Vec<_>, _>>()?;
        groups.push(("inputs".to_string(), clouds));
    }
    match (&inputs.dataset_root, inputs.split.is_empty()) {
        (Some(root), false) => {
            if !root.is_dir() {
                return Err(usage(format!("{}: not a directory", root.display())));
            }
            for split in &inputs.split {
                let path = if split.is_absolute() { split.clone() } else { root.join(split) };
                check_file(&path)?;
                let names = load_split(&path)?;
                for n in &names {
                    check_file(&root.join(format!("{n}.xyz")))?;
                }
                let clouds = names.iter().map(|n| load_cloud(root, n)).collect::<Result<Vec<_>, _>>()?;
                let cat = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                groups.push((cat, clouds));
            }
        }
        (Some(root), true) if default_pcpnet => {
            if !root.is_dir() {
                return Err(usage(format!("{}: not a directory", root.display())));
            }
            for (_, file) in PCPNET_TEST_SPLITS {
                check_file(&root.join(file))?;
            }
            groups.extend(load_pcpnet_categories(root)?);
        }
        (Some(_), true) => return Err(usage("--dataset-root needs at least one --split")),
        (None, false) => return Err(usage("--split needs --dataset-root")),
        (None, true) => {}
    }
    if groups.is_empty() {
        return Err(usage("no input clouds: pass --input or --dataset-root"));
    }
    Ok(groups)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn cmd_gen(a: GenArgs) -> Result<(), CliError> {
    let kind: ShapeKind = a.shape.parse().map_err(usage)?;
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(usage(format!("noise must be non-negative, got {}", a.noise)));
    }
    check_out_dir(&a.out)?;
    let seed = a.common.seed;
    let mut cloud = gen_shape(kind, a.n, seed).map_err(usage)?;
    cloud = match a.density {
        Density::Uniform => cloud,
        Density::Stripes => apply_density(
            &cloud,
            DensityPattern::Stripes {
                axis: 0,
                period: 0.25,
                p_low: 0.15,
                p_high: 1.0,
            },
            derive_seed(seed, 2, 0),
        )?,
        Density::Gradient => apply_density(
            &cloud,
            DensityPattern::Gradient {
                axis: 0,
                p_low: 0.05,
                p_high: 1.0,
            },
            derive_seed(seed, 2, 0),
        )?,
    };
    let mut cloud = add_noise(
        &cloud,
        NoiseSpec {
            sigma: a.noise,
            seed: derive_seed(seed, 1, 0),
        },
    )?;
    if let Some(stem) = a.out.file_stem() {
        cloud.name = stem.to_string_lossy().into_owned();
    }
    for p in save_cloud(&cloud, &a.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn default_center(cloud: &PointCloud) -> usize {
    let d = |p: &[f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    (0..cloud.len())
        .min_by(|&i, &j| d(&cloud.points[i]).total_cmp(&d(&cloud.points[j])))
        .unwrap_or(0)
}

/// Loads the patch input and returns the cloud, the centre and its patch.
fn patch_from_flags(f: &PatchFlags, seed: u64) -> Result<(PointCloud, crate::patch::Patch), CliError> {
    check_radius(f.radius)?;
    if f.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    check_out_dir(&f.out)?;
    let cloud = load_path(&f.input)?;
    let center = f.center.unwrap_or_else(|| default_center(&cloud));
    if center >= cloud.len() {
        return Err(usage(format!("--center {center} out of range for {} points", cloud.len())));
    }
    let index = SpatialIndex::build(&cloud.points)?;
    let patch = extract_patch(&cloud, &index, center, f.radius, f.k, seed)?;
    Ok((cloud, patch))
}

/// The distinct cloud points of a patch with one flag each.
fn distinct_rows(patch: &crate::patch::Patch, flags: &[bool]) -> (Vec<usize>, Vec<bool>) {
    let mut seen = std::collections::BTreeMap::new();
    for (&src, &f) in patch.source_indices.iter().zip(flags) {
        seen.entry(src).or_insert(f);
    }
    seen.into_iter().unzip()
}

fn cmd_labels(a: LabelsArgs) -> Result<(), CliError> {
    let cfg = a.labels.config()?;
    if let Some(t) = &a.table {
        check_out_dir(t)?;
    }
    let (cloud, mut patch) = patch_from_flags(&a.patch, a.common.seed)?;
    if cloud.normals.is_none() {
        return Err(usage(format!("{}: labels need a .normals file", a.patch.input.display())));
    }
    label_patch(&mut patch, &cfg)?;
    let labels = patch.plane_labels.clone().expect("labelled above");
    let (rows, flags) = distinct_rows(&patch, &labels);
    write_ply(&cloud.select(&rows), Coloring::Labels(&flags), &a.patch.out)?;
    if let Some(t) = &a.table {
        let p = normalize_errors_with(
            &error_distance(patch.gt_point_normals.as_ref().unwrap(), patch.gt_center_normal.unwrap()),
            cfg.epsilon,
        );
        let mut text = String::from("# source_index label normalized_error\n");
        for ((src, l), e) in patch.source_indices.iter().zip(&labels).zip(&p) {
            text.push_str(&format!("{src} {} {e:?}\n", u8::from(*l)));
        }
        write_text(t, &text)?;
    }
    let planes = flags.iter().filter(|&&f| f).count();
    println!(
        "patch at point {} (radius {}, θ {}): {} plane points, {} others; wrote {}",
        patch.center_index,
        patch.radius,
        cfg.effective_theta(patch.radius),
        planes,
        flags.len() - planes,
        a.patch.out.display()
    );
    Ok(())
}

fn model_config(f: &TrainFlags) -> Result<ModelConfig, CliError> {
    match &f.model_config {
        Some(p) => {
            check_file(p)?;
            ModelConfig::load(p).map_err(usage)
        }
        None => Ok(match f.profile {
            Profile::Full => ModelConfig::default(),
            Profile::Reduced => ModelConfig::reduced(),
        }),
    }
}

fn train_config(f: &TrainFlags, radii: Vec<f64>, batch_single: usize, batch_multi: usize) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        radii,
        batch_size_single: batch_single,
        batch_size_multi: batch_multi,
        learning_rate: f.lr,
        momentum: f.momentum,
        epochs: f.epochs,
        patches_per_shape: f.patches_per_shape,
        seed: f.common.seed,
        k: f.k,
        labels: f.labels.config()?,
        checkpoint_every: f.checkpoint_every,
    };
    cfg.validate().map_err(usage)?;
    check_out_dir(&f.checkpoint)?;
    if let Some(p) = &f.loss_csv {
        check_out_dir(p)?;
    }
    Ok(cfg)
}

fn training_shapes(f: &TrainFlags) -> Result<Vec<PointCloud>, CliError> {
    let shapes: Vec<PointCloud> = load_inputs(&f.inputs, false)?.into_iter().flat_map(|(_, c)| c).collect();
    if let Some(c) = shapes.iter().find(|c| c.normals.is_none()) {
        return Err(usage(format!("training shape `{}` has no .normals file", c.name)));
    }
    Ok(shapes)
}

fn report_history(f: &TrainFlags, history: &[crate::trainer::EpochStats]) -> Result<(), CliError> {
    for h in history {
        println!(
            "epoch {:>4}  L_normal {:.6}  L_main {:.6}  L_total {:.6}",
            h.epoch, h.normal, h.plane, h.total
        );
    }
    if let Some(p) = &f.loss_csv {
        write_text(p, &history_csv(history))?;
    }
    println!("wrote {}", f.checkpoint.display());
    Ok(())
}

fn cmd_train_single(a: TrainSingleArgs) -> Result<(), CliError> {
    check_radius(a.radius)?;
    let model_cfg = model_config(&a.train)?;
    let cfg = train_config(&a.train, vec![a.radius], a.batch, TrainConfig::default().batch_size_multi)?;
    let shapes = training_shapes(&a.train)?;
    let dataset = build_dataset(&shapes, &cfg)?;
    let mut model = SingleScaleModel::new(&model_cfg, cfg.seed)?;
    let plan = CheckpointPlan {
        path: Some(a.train.checkpoint.clone()),
    };
    ModelMeta {
        radii: cfg.radii.clone(),
        k: cfg.k,
        multi_scale: false,
        model: model_cfg,
    }
    .save(&a.train.checkpoint)?;
    let history = train_single(&dataset, 0, &mut model, &cfg, &plan)?;
    report_history(&a.train, &history)
}

fn cmd_train_multi(a: TrainMultiArgs) -> Result<(), CliError> {
    let radii = match a.preset {
        Some(Preset::Multi1) => DEFAULT_RADII.to_vec(),
        Some(Preset::Multi2) => MULTI2_RADII.to_vec(),
        None => a.radii.clone(),
    };
    for &r in &radii {
        check_radius(r)?;
    }
    let cfg = train_config(&a.train, radii.clone(), TrainConfig::default().batch_size_single, a.batch)?;
    if !a.init_from.is_empty() && a.init_from.len() != radii.len() {
        return Err(usage(format!(
            "--init-from lists {} checkpoints for {} radii",
            a.init_from.len(),
            radii.len()
        )));
    }
    let mut subnets = Vec::new();
    for p in &a.init_from {
        check_file(p)?;
        let meta = ModelMeta::load(p).map_err(usage)?;
        if meta.multi_scale {
            return Err(usage(format!("{}: expected a single-scale checkpoint", p.display())));
        }
        let mut net = SingleScaleModel::new(&meta.model, cfg.seed)?;
        net.load_checkpoint(p, "")?;
        subnets.push(net);
    }
    let model_cfg = match subnets.first() {
        Some(s) => s.config().clone(),
        None => model_config(&a.train)?,
    };
    let shapes = training_shapes(&a.train)?;
    let dataset = build_dataset(&shapes, &cfg)?;
    let mut model = if subnets.is_empty() {
        MultiScaleModel::new(&model_cfg, &radii, cfg.seed)?
    } else {
        MultiScaleModel::from_subnets(subnets, &radii, cfg.seed).map_err(usage)?
    };
    ModelMeta {
        radii,
        k: cfg.k,
        multi_scale: true,
        model: model_cfg,
    }
    .save(&a.train.checkpoint)?;
    let plan = CheckpointPlan {
        path: Some(a.train.checkpoint.clone()),
    };
    let opts = MultiTrainOptions {
        freeze_subnets: a.freeze_subnets,
    };
    let history = train_multi(&dataset, &mut model, &cfg, opts, &plan)?;
    report_history(&a.train, &history)
}

enum LoadedNet {
    Single(SingleScaleModel, ModelMeta),
    Multi(MultiScaleModel, ModelMeta),
}

fn load_net(path: &Path) -> Result<LoadedNet, CliError> {
    check_file(path)?;
    let meta = ModelMeta::load(path).map_err(usage)?;
    if meta.multi_scale {
        let mut m = MultiScaleModel::new(&meta.model, &meta.radii, 0).map_err(usage)?;
        m.load_checkpoint(path)?;
        Ok(LoadedNet::Multi(m, meta))
    } else {
        let mut m = SingleScaleModel::new(&meta.model, 0).map_err(usage)?;
        m.load_checkpoint(path, "")?;
        Ok(LoadedNet::Single(m, meta))
    }
}

/// Validates estimator flags and calls `f` with the chosen estimator.
fn with_estimator<R>(
    flags: &EstimatorFlags,
    seed: u64,
    f: impl FnOnce(&dyn Estimator) -> Result<R, CliError>,
) -> Result<R, CliError> {
    match flags.estimator {
        EstimatorKind::Pca | EstimatorKind::Jet => {
            check_radius(flags.radius)?;
            let kind = if flags.estimator == EstimatorKind::Pca { BaselineKind::Pca } else { BaselineKind::Jet };
            f(&BaselineEstimator {
                kind,
                radius: flags.radius,
            })
        }
        EstimatorKind::Gt => f(&GroundTruthEstimator),
        EstimatorKind::Net => {
            let path = flags.checkpoint.as_ref().ok_or_else(|| usage("--estimator net needs --checkpoint"))?;
            match load_net(path)? {
                LoadedNet::Single(model, meta) => f(&SingleScaleEstimator {
                    model: &model,
                    radius: meta.radii[0],
                    k: meta.k,
                    seed,
                }),
                LoadedNet::Multi(model, meta) => f(&MultiScaleEstimator {
                    model: &model,
                    k: meta.k,
                    seed,
                }),
            }
        }
    }
}

fn emit_report(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            write_text(p, text)?;
            println!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    for p in a.out.iter().chain(&a.csv) {
        check_out_dir(p)?;
    }
    let categories = load_inputs(&a.inputs, true)?;
    if let Some(c) = categories.iter().flat_map(|(_, c)| c).find(|c| c.normals.is_none()) {
        return Err(usage(format!("cloud `{}` has no .normals file", c.name)));
    }
    let report = with_estimator(&a.estimator, a.common.seed, |est| {
        Ok(evaluate_categories(&categories, est, a.common.workers)?)
    })?;
    if let Some(p) = &a.csv {
        write_text(p, &report.to_csv())?;
    }
    emit_report(&report.to_text(), a.out.as_ref())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    for &r in &a.radii {
        check_radius(r)?;
    }
    for p in a.out.iter().chain(&a.csv) {
        check_out_dir(p)?;
    }
    let categories = load_inputs(&a.inputs, true)?;
    let kind = match a.estimator {
        BaselineArg::Pca => BaselineKind::Pca,
        BaselineArg::Jet => BaselineKind::Jet,
    };
    let (reports, best) = baseline_sweep(&categories, kind, &a.radii, a.common.workers)?;
    let mut text = format_table(&reports);
    text.push_str(&format!(
        "best radius: {} (average {:.2})\n",
        a.radii[best], reports[best].overall_average
    ));
    if let Some(p) = &a.csv {
        let mut csv = String::new();
        for (i, r) in reports.iter().enumerate() {
            let body = r.to_csv();
            csv.push_str(if i == 0 { &body } else { body.split_once('\n').map(|x| x.1).unwrap_or("") });
        }
        write_text(p, &csv)?;
    }
    emit_report(&text, a.out.as_ref())
}

fn cmd_heatmap(a: HeatmapArgs) -> Result<(), CliError> {
    check_out_dir(&a.out)?;
    let cloud = load_path(&a.input)?;
    if cloud.normals.is_none() {
        return Err(usage(format!("{}: heatmap needs a .normals file", a.input.display())));
    }
    let shape = with_estimator(&a.estimator, a.common.seed, |est| Ok(evaluate(&cloud, est, a.common.workers)?))?;
    let errors: Vec<f64> = shape.angles.iter().map(|a| a.unwrap_or(f64::NAN)).collect();
    write_ply(&cloud.select(&shape.points), Coloring::Heatmap(&errors), &a.out)?;
    println!(
        "{}: RMSE {:.4}° over {} points ({} excluded); wrote {}",
        shape.name,
        shape.rmse,
        shape.evaluated(),
        shape.excluded,
        a.out.display()
    );
    Ok(())
}

fn cmd_export_labels(a: ExportLabelsArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage(format!("--threshold must lie in [0, 1], got {}", a.threshold)));
    }
    let LoadedNet::Single(model, meta) = load_net(&a.checkpoint)? else {
        return Err(usage(format!("{}: expected a single-scale checkpoint", a.checkpoint.display())));
    };
    let flags = PatchFlags {
        k: meta.k,
        ..a.patch
    };
    let (cloud, patch) = patch_from_flags(&flags, a.common.seed)?;
    let pred = model.predict(&[&patch])?.remove(0);
    let labels: Vec<bool> = pred.plane_probs.iter().map(|&p| p > a.threshold).collect();
    let (rows, flags_out) = distinct_rows(&patch, &labels);
    write_ply(&cloud.select(&rows), Coloring::Labels(&flags_out), &flags.out)?;
    let planes = flags_out.iter().filter(|&&f| f).count();
    println!(
        "patch at point {}: {} predicted plane points, {} others; normal {:?}; wrote {}",
        patch.center_index,
        planes,
        flags_out.len() - planes,
        pred.normal,
        flags.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_stated_defaults() {
        let mut cmd = Cli::command();
        let multi = cmd.find_subcommand_mut("train-multi").unwrap().render_long_help().to_string();
        assert!(multi.contains("0.01,0.03,0.05") || multi.contains("0.01, 0.03, 0.05"), "{multi}");
        assert!(multi.contains("[default: 16]"));
        let single = cmd.find_subcommand_mut("train-single").unwrap().render_long_help().to_string();
        for d in ["[default: 64]", "[default: 0.0001]", "[default: 0.9]", "[default: 500]", "[default: 0.5]", "[default: 0.8]"] {
            assert!(single.contains(d), "missing {d}");
        }
    }
}
