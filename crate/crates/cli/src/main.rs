//! `phaser` command line: every pipeline stage as a subcommand.
//!
//! Outputs always go to files named by flags; stdout gets one summary line
//! and a `<out>.manifest.json` beside each output records the resolved
//! arguments. Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use phaser::divergence::{
    bound_reports_csv, closest_mixture, epsilon_bound, mixture_epsilon, BoundReport, GaussianTrack, RenyiForm,
};
use phaser::harness::eval::{evaluate, metrics_csv, MetricsRow};
use phaser::harness::experiments::{
    bound_report, discrepancy_test, run_experiment, semantic_preservation_test, ExperimentConfig, ScenarioSplit,
    Variant,
};
use phaser::harness::io::{read_dataset, write_atomic, write_dataset};
use phaser::harness::synth::{shifted_domains_spec, sinusoid_spec, synth_generate, SynthSpec};
use phaser::harness::train::{train, TrainingSet};
use phaser::signal::{stft, StftConfig};
use phaser::stationarity::{dataset_adf_summary, summary_csv, LagOrder};
use phaser::{augment, merge, Architecture, AugmentKind, AugmentSpec, ErrorKind, PhaserModel};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "phaser", version, about = "Phase-driven domain generalization toolkit for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain dataset.
    Synth(SynthArgs),
    /// Apply an augmentation to every sample of a dataset.
    Augment(AugmentArgs),
    /// Write the STFT of one sample as CSV.
    Stft(StftArgs),
    /// Mean ADF statistic per variate.
    Adf(AdfArgs),
    /// Train a model and save its weights.
    Train(TrainArgs),
    /// Evaluate saved weights on a dataset.
    Eval(EvalArgs),
    /// Accuracy of telling samples apart from their Hilbert transforms.
    Discrepancy(ProbeArgs),
    /// Accuracy on held-out samples before and after the Hilbert transform.
    Semantic(ProbeArgs),
    /// Worst-case β-divergence among source tracks (and to a target, if given).
    Divergence(DivergenceArgs),
    /// Evaluate the unseen-domain risk bound for a trained ensemble.
    Bound(BoundArgs),
    /// Run ablation variants over scenarios and seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct ExperimentArgs {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base channel count (model width is 2c).
    #[arg(long)]
    c: Option<usize>,
    /// Sub-spectral normalisation bands.
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    nfft: Option<usize>,
    #[arg(long)]
    seg_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Held-out fraction for the discrepancy and preservation probes.
    #[arg(long)]
    holdout: Option<f64>,
    /// Random power-of-two STFT window per variate.
    #[arg(long)]
    random_windows: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
                serde_json::from_slice(&bytes).map_err(phaser::Error::from)?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set!(c => c, b => b, nfft => nfft, seg_len => seg_len, epochs => train.max_epochs,
             batch_size => train.batch_size, lr => train.learning_rate, patience => train.patience,
             val_fraction => train.validation_fraction, holdout => holdout_fraction);
        cfg.random_windows |= self.random_windows;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// `shifted` (multi-domain) or `sinusoid` (one stationary domain).
    #[arg(long, default_value = "shifted")]
    kind: String,
    /// Full generator spec as JSON; replaces the shape flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    domains: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    variates: usize,
    #[arg(long, default_value_t = 128)]
    length: usize,
    #[arg(long, default_value_t = 10)]
    samples_per_class: usize,
    /// Constant offset for `sinusoid` data.
    #[arg(long, default_value_t = 0.0)]
    baseline: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct AugmentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// hilbert, hilbert_random_phase, rotation, permutation or circular_shift.
    #[arg(long, default_value = "hilbert")]
    kind: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, allow_negative_numbers = true)]
    phi_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi_max: Option<f64>,
    /// Block length for permutation.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    max_shift: Option<f64>,
    /// Write the originals followed by the augmented samples.
    #[arg(long)]
    merge: bool,
}

#[derive(Debug, Args, Serialize)]
struct StftArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 16)]
    seg_len: usize,
    #[arg(long, default_value_t = 32)]
    nfft: usize,
}

#[derive(Debug, Args, Serialize)]
struct AdfArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `auto` or a fixed lag order.
    #[arg(long, default_value = "auto")]
    lag: String,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Weights file; the model config is written to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    /// full, no_residual, mag_only or concat.
    #[arg(long, default_value = "full")]
    arch: String,
    /// Also train on Hilbert-transformed copies.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Value of the scenario column.
    #[arg(long, default_value = "eval")]
    scenario: String,
}

#[derive(Debug, Args, Serialize)]
struct ProbeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args, Serialize)]
struct DivergenceArgs {
    /// JSON `{"sources": [{"mu": [..], "sigma": [..]}, ..], "target": {..}}`; target optional.
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// standard or verbatim.
    #[arg(long, default_value = "standard")]
    form: String,
    /// Simplex grid resolution for the closest source mixture.
    #[arg(long, default_value_t = 11)]
    resolution: usize,
}

#[derive(Debug, Args, Serialize)]
struct BoundArgs {
    #[arg(long)]
    tracks: PathBuf,
    /// Directory of saved weights (every non-JSON file is a member).
    #[arg(long)]
    ensemble: PathBuf,
    /// Target-domain samples.
    #[arg(long)]
    data: PathBuf,
    /// Samples from the source mixture for the joint-error term; defaults to --data.
    #[arg(long)]
    mixture_data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value = "standard")]
    form: String,
    #[arg(long, default_value_t = 11)]
    resolution: usize,
}

#[derive(Debug, Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Leave-one-domain-out scenario numbers (1-based), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    scenario: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "full,no_aug,no_residual,mag_only,concat")]
    variants: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackFile {
    sources: Vec<GaussianTrack>,
    #[serde(default)]
    target: Option<GaussianTrack>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Lib(phaser::Error),
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        CliError::Usage(m.into())
    }

    fn data(m: impl Into<String>) -> Self {
        CliError::Data(m.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<phaser::Error> for CliError {
    fn from(e: phaser::Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult = Result<String, CliError>;

fn parse<T: std::str::FromStr<Err = phaser::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: phaser::Error| CliError::usage(e.to_string()))
}

fn parse_form(s: &str) -> Result<RenyiForm, CliError> {
    match s {
        "standard" => Ok(RenyiForm::Standard),
        "verbatim" => Ok(RenyiForm::Verbatim),
        _ => Err(CliError::usage(format!("unknown divergence form {s:?} (standard or verbatim)"))),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the manifest beside `out` and logs it to stderr.
fn manifest(out: &Path, command: &str, args: &impl Serialize, extra: serde_json::Value) -> Result<(), CliError> {
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": extra,
    });
    eprintln!("{command}: {doc}");
    let bytes = serde_json::to_vec_pretty(&doc).map_err(phaser::Error::from)?;
    write_atomic(&manifest_path(out), &bytes)?;
    Ok(())
}

fn read_tracks(path: &Path) -> Result<TrackFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let tracks: TrackFile = serde_json::from_slice(&bytes).map_err(phaser::Error::from)?;
    for t in tracks.sources.iter().chain(&tracks.target) {
        t.validate()?;
    }
    Ok(tracks)
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let spec: SynthSpec = match &a.spec {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            let mut spec: SynthSpec = serde_json::from_slice(&bytes).map_err(phaser::Error::from)?;
            spec.seed = a.seed;
            spec
        }
        None => match a.kind.as_str() {
            "shifted" => shifted_domains_spec(a.variates, a.length, a.domains, a.classes, a.samples_per_class, a.seed)?,
            "sinusoid" => sinusoid_spec(a.variates, a.length, a.classes, a.samples_per_class, a.baseline, a.seed)?,
            k => return Err(CliError::usage(format!("unknown synth kind {k:?} (shifted or sinusoid)"))),
        },
    };
    let ds = synth_generate(&spec)?;
    write_dataset(&a.out, &ds)?;
    manifest(&a.out, "synth", a, json!({ "spec": spec }))?;
    Ok(format!(
        "synth: {} samples, {} classes, {} domains -> {}",
        ds.len(),
        ds.num_classes(),
        ds.domain_ids().len(),
        a.out.display()
    ))
}

fn cmd_augment(a: &AugmentArgs) -> CliResult {
    let ds = read_dataset(&a.data)?;
    let mut spec = AugmentSpec::new(parse::<AugmentKind>(&a.kind)?, a.seed);
    if let Some(lo) = a.phi_min {
        spec.phi_range.0 = lo;
    }
    if let Some(hi) = a.phi_max {
        spec.phi_range.1 = hi;
    }
    spec.window = a.window.or(spec.window);
    if let Some(s) = a.max_shift {
        spec.max_shift_frac = s;
    }
    let aug = augment(&ds, &spec)?;
    let out = if a.merge { merge(&ds, &aug)? } else { aug };
    write_dataset(&a.out, &out)?;
    manifest(&a.out, "augment", a, json!({ "spec": spec }))?;
    Ok(format!("augment: {} samples -> {}", out.len(), a.out.display()))
}

fn cmd_stft(a: &StftArgs) -> CliResult {
    let ds = read_dataset(&a.data)?;
    let x = ds
        .samples()
        .get(a.index)
        .ok_or_else(|| CliError::usage(format!("index {} outside {} samples", a.index, ds.len())))?;
    let cfg = StftConfig::new(a.seg_len, a.nfft);
    let s = stft(x, &cfg)?;
    s.save_csv(&a.out)?;
    manifest(&a.out, "stft", a, json!({ "stft": cfg }))?;
    let (v, bins, frames) = s.shape();
    Ok(format!("stft: {v} variates x {bins} bins x {frames} frames -> {}", a.out.display()))
}

fn cmd_adf(a: &AdfArgs) -> CliResult {
    let lag = match a.lag.as_str() {
        "auto" => LagOrder::Auto,
        n => LagOrder::Fixed(
            n.parse()
                .map_err(|_| CliError::usage(format!("--lag must be auto or an integer, got {n:?}")))?,
        ),
    };
    let ds = read_dataset(&a.data)?;
    let summary = dataset_adf_summary(&ds, lag)?;
    write_atomic(&a.out, &summary_csv(&summary)?)?;
    manifest(&a.out, "adf", a, json!({ "lag": format!("{lag:?}") }))?;
    let shown: Vec<String> = summary.iter().map(|s| format!("{s:.3}")).collect();
    Ok(format!("adf: mean statistic per variate [{}] -> {}", shown.join(", "), a.out.display()))
}

fn cmd_train(a: &TrainArgs) -> CliResult {
    let cfg = a.exp.resolve()?;
    let arch: Architecture = parse(&a.arch)?;
    let ds = read_dataset(&a.data)?.without_domains();
    let data = if a.augment {
        merge(&ds, &augment(&ds, &AugmentSpec::new(AugmentKind::HilbertFixed, a.seed))?)?
    } else {
        ds
    };
    let (v, _) = data
        .sample_shape()
        .ok_or_else(|| CliError::usage("cannot train on an empty dataset"))?;
    let model_cfg = cfg.model_config(v, data.num_classes(), a.seed, arch);
    let model = PhaserModel::build(&model_cfg)?;
    let outcome = train(model, &TrainingSet::from(&data), &cfg.train_config(a.seed))?;
    outcome.model.save(&a.out)?;
    manifest(
        &a.out,
        "train",
        a,
        json!({ "experiment": cfg, "model": model_cfg, "best_epoch": outcome.best_epoch, "history": outcome.history }),
    )?;
    let val = outcome.validation.as_ref().map_or(f64::NAN, |e| e.accuracy);
    Ok(format!(
        "train: {} parameters, best epoch {}, validation accuracy {val:.4} -> {}",
        outcome.model.param_count(),
        outcome.best_epoch.map_or("-".into(), |e| e.to_string()),
        a.out.display()
    ))
}

fn cmd_eval(a: &EvalArgs) -> CliResult {
    let mut model = PhaserModel::load(&a.model)?;
    let ds = read_dataset(&a.data)?;
    let e = evaluate(&mut model, &ds)?;
    let row = MetricsRow::from_eval(a.scenario.clone(), model.cfg.seed, "test", &e);
    write_atomic(&a.out, &metrics_csv(&[row])?)?;
    manifest(&a.out, "eval", a, json!({ "model": model.cfg }))?;
    Ok(format!("eval: accuracy {:.4}, loss {:.4} -> {}", e.accuracy, e.loss, a.out.display()))
}

fn cmd_discrepancy(a: &ProbeArgs) -> CliResult {
    let cfg = a.exp.resolve()?;
    let ds = read_dataset(&a.data)?;
    let acc = discrepancy_test(&ds, &cfg, a.seed)?;
    let result = json!({ "accuracy": acc });
    write_atomic(&a.out, &serde_json::to_vec_pretty(&result).map_err(phaser::Error::from)?)?;
    manifest(&a.out, "discrepancy", a, json!({ "experiment": cfg }))?;
    Ok(format!("discrepancy: original vs transformed accuracy {acc:.4} -> {}", a.out.display()))
}

fn cmd_semantic(a: &ProbeArgs) -> CliResult {
    let cfg = a.exp.resolve()?;
    let ds = read_dataset(&a.data)?;
    let p = semantic_preservation_test(&ds, &cfg, a.seed)?;
    let result = json!({ "acc_original": p.acc_original, "acc_transformed": p.acc_transformed, "gap": p.gap() });
    write_atomic(&a.out, &serde_json::to_vec_pretty(&result).map_err(phaser::Error::from)?)?;
    manifest(&a.out, "semantic", a, json!({ "experiment": cfg }))?;
    Ok(format!(
        "semantic: accuracy {:.4} original, {:.4} transformed -> {}",
        p.acc_original,
        p.acc_transformed,
        a.out.display()
    ))
}

fn cmd_divergence(a: &DivergenceArgs) -> CliResult {
    let form = parse_form(&a.form)?;
    let tracks = read_tracks(&a.tracks)?;
    let report = epsilon_bound(&tracks.sources, a.q, form)?;
    let mut result = json!({ "sources": report });
    let mut summary = format!("divergence: source epsilon {:.6}", report.epsilon);
    if let Some(target) = &tracks.target {
        let closest = closest_mixture(target, &tracks.sources, a.q, a.resolution)?;
        let eps = mixture_epsilon(target, &closest.mixture, a.q)?;
        result["target"] = json!({
            "mixture_weights": closest.mixture.weights,
            "mean_divergence": closest.divergence,
            "epsilon": eps,
        });
        summary.push_str(&format!(", target epsilon {eps:.6}"));
    }
    write_atomic(&a.out, &serde_json::to_vec_pretty(&result).map_err(phaser::Error::from)?)?;
    manifest(&a.out, "divergence", a, json!({ "form": form }))?;
    Ok(format!("{summary} -> {}", a.out.display()))
}

fn load_ensemble(dir: &Path) -> Result<Vec<PhaserModel>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_none_or(|x| x != "json"))
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(CliError::usage(format!(
            "{}: an ensemble needs at least 2 members, found {}",
            dir.display(),
            paths.len()
        )));
    }
    paths.iter().map(|p| PhaserModel::load(p).map_err(CliError::from)).collect()
}

fn cmd_bound(a: &BoundArgs) -> CliResult {
    let form = parse_form(&a.form)?;
    let tracks = read_tracks(&a.tracks)?;
    let (epsilon, weights) = match &tracks.target {
        Some(target) => {
            let closest = closest_mixture(target, &tracks.sources, a.q, a.resolution)?;
            (mixture_epsilon(target, &closest.mixture, a.q)?, Some(closest.mixture.weights))
        }
        None => (epsilon_bound(&tracks.sources, a.q, form)?.epsilon, None),
    };
    let mut ensemble = load_ensemble(&a.ensemble)?;
    let target = read_dataset(&a.data)?;
    let mixture = match &a.mixture_data {
        Some(p) => read_dataset(p)?,
        None => target.clone(),
    };
    let report: BoundReport = bound_report(&mut ensemble, &target, &mixture, epsilon, a.q)?;
    write_atomic(&a.out, &bound_reports_csv(std::slice::from_ref(&report))?)?;
    manifest(
        &a.out,
        "bound",
        a,
        json!({ "epsilon": epsilon, "mixture_weights": weights, "members": ensemble.len() }),
    )?;
    Ok(format!(
        "bound: risk {:.4} vs bound {:.4} ({}) -> {}",
        report.empirical_risk,
        report.rhs,
        if report.holds { "holds" } else { "violated" },
        a.out.display()
    ))
}

fn cmd_ablate(a: &AblateArgs) -> CliResult {
    let cfg = a.exp.resolve()?;
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let variants = a.variants.iter().map(|v| parse::<Variant>(v)).collect::<Result<Vec<_>, _>>()?;
    let ds = read_dataset(&a.data)?;
    let splits = a
        .scenario
        .iter()
        .map(|&k| ScenarioSplit::leave_one_out(&ds, k))
        .collect::<phaser::Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for split in &splits {
        for &variant in &variants {
            for &seed in &a.seeds {
                runs.push((split, variant, seed));
            }
        }
    }
    // workers take runs in order; results are reassembled by index
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<phaser::Result<Vec<MetricsRow>>>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..a.jobs.min(runs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(split, variant, seed)) = runs.get(i) else {
                    break;
                };
                let r = run_experiment(&ds, split, variant, &cfg, seed);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("workers finished") {
        rows.extend(r.expect("every run executed")?);
    }
    write_atomic(&a.out, &metrics_csv(&rows)?)?;
    manifest(&a.out, "ablate", a, json!({ "experiment": cfg, "splits": splits }))?;
    Ok(format!("ablate: {} runs, {} rows -> {}", runs.len(), rows.len(), a.out.display()))
}

fn run(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Stft(a) => cmd_stft(a),
        Command::Adf(a) => cmd_adf(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Discrepancy(a) => cmd_discrepancy(a),
        Command::Semantic(a) => cmd_semantic(a),
        Command::Divergence(a) => cmd_divergence(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Ablate(a) => cmd_ablate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
