use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use roadsound::audio_io::{load_manifest, load_wav, LabeledDataset};
use roadsound::classify::{ClassifierKind, KnnMetric, SignalDecision};
use roadsound::config::ExperimentConfig;
use roadsound::eval::{
    comparison_specs, emit_comparison, emit_report, evaluate_features, extract_dataset,
    kfold_split, ReportFormat,
};
use roadsound::features::write_feature_csv;
use roadsound::model::ModelFile;
use roadsound::synth::{write_corpus, Background, SynthSpec};
use roadsound::{Error, ErrorKind};

/// Vehicle sound classification from energy, zero-cross rate and pitch.
///
/// Settings are resolved as built-in defaults, then the `--config` file, then
/// command-line flags.
#[derive(Parser)]
#[command(name = "roadsound", version)]
struct Cli {
    #[command(flatten)]
    globals: Globals,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Flat `key = value` config file (`#` comments allowed).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for fold assignment and synthesis [default: 0, synth 42].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format: text, csv or json.
    #[arg(long, global = true, default_value = "text")]
    format: ReportFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-frame features of every manifest entry as CSV.
    Extract {
        /// CSV with `path,label` rows; relative paths resolve against its directory
        #[arg(long)]
        manifest: PathBuf,
        /// Output file (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit a classifier on every manifest entry and save it.
    Train {
        /// CSV with `path,label` rows; relative paths resolve against its directory
        #[arg(long)]
        manifest: PathBuf,
        /// Model file to write (JSON).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Label WAV files with a trained model.
    Classify {
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Recordings to label, reported in the order given
        #[arg(required = true)]
        wavs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Stratified k-fold cross-validation.
    Evaluate {
        /// CSV with `path,label` rows; relative paths resolve against its directory
        #[arg(long)]
        manifest: PathBuf,
        /// Run all seven baseline and high-energy variants on the same folds.
        #[arg(long)]
        compare: bool,
        /// Output file (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a synthetic harmonic corpus with a manifest.
    Synth(SynthArgs),
}

/// Config keys. Each flag overrides the file value.
#[derive(Args, Default)]
struct Overrides {
    /// Window length in samples [default: 165]
    #[arg(long)]
    window_len: Option<usize>,
    /// Window overlap in samples [default: 55]
    #[arg(long)]
    overlap: Option<usize>,
    /// Butterworth low-pass order [default: 4]
    #[arg(long)]
    filter_order: Option<usize>,
    /// Low-pass cutoff in Hz [default: 4000]
    #[arg(long)]
    cutoff_hz: Option<f64>,
    /// Clipping level factor [default: 0.68]
    #[arg(long)]
    clip_fraction: Option<f64>,
    /// Periodic/un-periodic threshold on clipped energy [default: 0.3]
    #[arg(long)]
    periodicity_threshold: Option<f64>,
    /// Maximum pitch in Hz [default: 1000]
    #[arg(long)]
    max_pitch_hz: Option<f64>,
    /// Pitch median width in frames [default: 3]
    #[arg(long)]
    median_width: Option<usize>,
    /// High-energy selection energy factor [default: 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// High-energy selection zero-cross factor [default: 1]
    #[arg(long)]
    zeta: Option<f64>,
    /// qda, lda, knn or least_squares [default: qda]
    #[arg(long, value_parser = parse_kind)]
    classifier: Option<ClassifierKind>,
    /// Neighbours for knn [default: 25]
    #[arg(long)]
    knn_k: Option<usize>,
    /// euclidean or cosine [default: euclidean]
    #[arg(long, value_parser = parse_metric)]
    knn_metric: Option<KnnMetric>,
    /// Covariance shrinkage toward a scaled identity [default: 0.0001]
    #[arg(long)]
    shrinkage: Option<f64>,
    /// Z-score features before fitting [default: on for knn and least_squares]
    #[arg(long)]
    standardize: Option<bool>,
    /// Use only high-energy, low zero-cross frames [default: true]
    #[arg(long)]
    apply_eq5: Option<bool>,
    /// Cross-validation folds [default: 10]
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated class labels [default: bus,car,motor,truck]
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
}

impl Overrides {
    fn is_empty(&self) -> bool {
        self.window_len.is_none()
            && self.overlap.is_none()
            && self.filter_order.is_none()
            && self.cutoff_hz.is_none()
            && self.clip_fraction.is_none()
            && self.periodicity_threshold.is_none()
            && self.max_pitch_hz.is_none()
            && self.median_width.is_none()
            && self.alpha.is_none()
            && self.zeta.is_none()
            && self.classifier.is_none()
            && self.knn_k.is_none()
            && self.knn_metric.is_none()
            && self.shrinkage.is_none()
            && self.standardize.is_none()
            && self.apply_eq5.is_none()
            && self.folds.is_none()
            && self.labels.is_none()
    }

    fn apply(self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            window_len,
            overlap,
            filter_order,
            cutoff_hz,
            clip_fraction,
            periodicity_threshold,
            max_pitch_hz,
            median_width,
            alpha,
            zeta,
            classifier,
            knn_k,
            knn_metric,
            shrinkage,
            apply_eq5,
            folds,
            labels
        );
        if self.standardize.is_some() {
            c.standardize = self.standardize;
        }
    }
}

fn parse_kind(s: &str) -> Result<ClassifierKind, String> {
    match s {
        "qda" => Ok(ClassifierKind::Qda),
        "lda" => Ok(ClassifierKind::Lda),
        "knn" => Ok(ClassifierKind::Knn),
        "least_squares" | "ls" => Ok(ClassifierKind::LeastSquares),
        _ => Err(format!(
            "unknown classifier `{s}`; expected qda, lda, knn or least_squares"
        )),
    }
}

fn parse_metric(s: &str) -> Result<KnnMetric, String> {
    match s {
        "euclidean" => Ok(KnnMetric::Euclidean),
        "cosine" => Ok(KnnMetric::Cosine),
        _ => Err(format!(
            "unknown metric `{s}`; expected euclidean or cosine"
        )),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the WAV files and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    /// Full synthesis spec (TOML with [[classes]] tables); flags below override it.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Class fundamentals in Hz, one per label [default: 80,150,300,500]
    #[arg(long, value_delimiter = ',')]
    fundamentals: Option<Vec<f64>>,
    /// Class labels [default: bus,car,motor,truck]
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Harmonics per tone [default: 3]
    #[arg(long)]
    harmonics: Option<usize>,
    /// Amplitude ratio between successive harmonics [default: 0.7]
    #[arg(long)]
    decay: Option<f64>,
    /// Tone-to-noise ratio in dB, `inf` for no noise [default: 10]
    #[arg(long)]
    snr_db: Option<f64>,
    /// Signals per class [default: 40]
    #[arg(long)]
    signals: Option<usize>,
    /// Signal length in seconds [default: 2]
    #[arg(long)]
    duration_s: Option<f64>,
    /// Sample rate in Hz [default: 11025]
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Alternate tone segments of this length with background noise [default: off]
    #[arg(long)]
    background_segment_s: Option<f64>,
    /// Tone-to-background ratio in dB [default: 0]
    #[arg(long, requires = "background_segment_s")]
    background_snr_db: Option<f64>,
}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(message.into()).into()
}

fn resolve_config(
    path: Option<&Path>,
    seed: Option<u64>,
    overrides: Overrides,
) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut config);
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load_dataset(manifest: &Path, config: &ExperimentConfig) -> Result<LabeledDataset> {
    Ok(load_manifest(manifest, &config.label_set()?)?)
}

/// Writes to `out`, or standard output when absent.
fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = std::io::stdout().lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_extract(
    cli: &Globals,
    manifest: &Path,
    out: Option<&Path>,
    overrides: Overrides,
) -> Result<()> {
    let config = resolve_config(cli.config.as_deref(), cli.seed, overrides)?;
    let dataset = load_dataset(manifest, &config)?;
    let features = extract_dataset(&dataset, &config.extraction())?;
    let rows: Vec<(String, _)> = dataset
        .entries()
        .iter()
        .map(|e| e.path.display().to_string())
        .zip(features)
        .collect();
    with_output(out, |w| Ok(write_feature_csv(w, &rows)?))
}

fn cmd_train(cli: &Globals, manifest: &Path, out: &Path, overrides: Overrides) -> Result<()> {
    let config = resolve_config(cli.config.as_deref(), cli.seed, overrides)?;
    let dataset = load_dataset(manifest, &config)?;
    let model = ModelFile::train(&dataset, &config.extraction(), &config.classifier_spec())?;
    model
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    let mut w = std::io::stdout().lock();
    match cli.format {
        ReportFormat::Json => writeln!(
            w,
            "{}",
            serde_json::json!({
                "model": out,
                "classifier": model.spec.display_name(),
                "fingerprint": model.fingerprint,
                "frame_counts": model.frame_counts,
                "training_frames": model.training_frames,
            })
        )?,
        ReportFormat::Csv => {
            writeln!(w, "label,training_frames")?;
            for (name, n) in model.labels.names().iter().zip(&model.training_frames) {
                writeln!(w, "{name},{n}")?;
            }
        }
        ReportFormat::Text => {
            writeln!(
                w,
                "Trained {} on {} signals -> {}",
                model.spec.display_name(),
                dataset.len(),
                out.display()
            )?;
            let fc = model.frame_counts;
            writeln!(
                w,
                "Frames: {} total, {} periodic, {} high-energy",
                fc.total, fc.periodic, fc.high_energy
            )?;
            for (name, n) in model.labels.names().iter().zip(&model.training_frames) {
                writeln!(w, "  {name}: {n} training frames")?;
            }
        }
    }
    Ok(())
}

/// Returns the number of unclassifiable inputs.
fn cmd_classify(
    cli: &Globals,
    model_path: &Path,
    wavs: &[PathBuf],
    overrides: Overrides,
) -> Result<usize> {
    let model = ModelFile::load(model_path)?;
    if cli.config.is_some() || !overrides.is_empty() {
        let config = resolve_config(cli.config.as_deref(), cli.seed, overrides)?;
        model.check(Some((&config.extraction(), &config.label_set()?)))?;
    }
    let decisions = wavs
        .iter()
        .map(|p| {
            load_wav(p)
                .and_then(|s| model.classify(&s))
                .with_context(|| format!("classifying {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let names = model.labels.names();
    let mut w = std::io::stdout().lock();
    match cli.format {
        ReportFormat::Text => {
            for (p, d) in wavs.iter().zip(&decisions) {
                match d {
                    SignalDecision::Classified {
                        label, fractions, ..
                    } => {
                        let shares: Vec<String> = names
                            .iter()
                            .zip(fractions)
                            .map(|(n, f)| format!("{n}={f:.3}"))
                            .collect();
                        writeln!(
                            w,
                            "{}\t{}\t{}",
                            p.display(),
                            names[label.0],
                            shares.join(" ")
                        )?;
                    }
                    SignalDecision::Unclassifiable => {
                        writeln!(w, "{}\tunclassifiable", p.display())?
                    }
                }
            }
        }
        ReportFormat::Csv => {
            write!(w, "path,label,frames")?;
            for n in names {
                write!(w, ",{n}")?;
            }
            writeln!(w)?;
            for (p, d) in wavs.iter().zip(&decisions) {
                match d {
                    SignalDecision::Classified {
                        label,
                        fractions,
                        frames,
                    } => {
                        write!(
                            w,
                            "{},{},{frames}",
                            csv_field(&p.display().to_string()),
                            names[label.0]
                        )?;
                        for f in fractions {
                            write!(w, ",{f}")?;
                        }
                        writeln!(w)?;
                    }
                    SignalDecision::Unclassifiable => writeln!(
                        w,
                        "{},unclassifiable,0{}",
                        csv_field(&p.display().to_string()),
                        ",".repeat(names.len())
                    )?,
                }
            }
        }
        ReportFormat::Json => {
            let rows: Vec<_> = wavs
                .iter()
                .zip(&decisions)
                .map(|(p, d)| match d {
                    SignalDecision::Classified { label, fractions, frames } => serde_json::json!({
                        "path": p,
                        "label": names[label.0],
                        "frames": frames,
                        "fractions": names.iter().cloned().zip(fractions.iter().map(|&f| serde_json::Value::from(f))).collect::<serde_json::Map<_, _>>(),
                    }),
                    SignalDecision::Unclassifiable => serde_json::json!({ "path": p, "label": null }),
                })
                .collect();
            writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?;
        }
    }
    Ok(decisions.iter().filter(|d| d.label().is_none()).count())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_evaluate(
    cli: &Globals,
    manifest: &Path,
    compare: bool,
    out: Option<&Path>,
    overrides: Overrides,
) -> Result<()> {
    let config = resolve_config(cli.config.as_deref(), cli.seed, overrides)?;
    let dataset = load_dataset(manifest, &config)?;
    let extraction = config.extraction();
    let plan = kfold_split(&dataset, config.folds, config.seed)?;
    let features = extract_dataset(&dataset, &extraction)?;
    let classes: Vec<_> = dataset.entries().iter().map(|e| e.label).collect();
    let base = config.classifier_spec();
    if compare {
        let reports = comparison_specs(&base)
            .iter()
            .map(|spec| {
                evaluate_features(
                    dataset.labels(),
                    &features,
                    &classes,
                    &extraction,
                    spec,
                    &plan,
                )
            })
            .collect::<roadsound::Result<Vec<_>>>()?;
        with_output(out, |w| Ok(emit_comparison(w, &reports, cli.format)?))
    } else {
        let report = evaluate_features(
            dataset.labels(),
            &features,
            &classes,
            &extraction,
            &base,
            &plan,
        )?;
        with_output(out, |w| Ok(emit_report(w, &report, cli.format)?))
    }
}

fn cmd_synth(cli: &Globals, args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SynthSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(labels) = &args.labels {
        let template = spec.classes[0].clone();
        spec.classes = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut c = spec
                    .classes
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| template.clone());
                c.label = l.clone();
                c
            })
            .collect();
    }
    if let Some(f0s) = &args.fundamentals {
        if f0s.len() != spec.classes.len() {
            return Err(usage(format!(
                "{} fundamentals given for {} classes",
                f0s.len(),
                spec.classes.len()
            )));
        }
        for (c, f) in spec.classes.iter_mut().zip(f0s) {
            c.fundamental_hz = *f;
        }
    }
    for c in &mut spec.classes {
        if let Some(v) = args.harmonics {
            c.harmonics = v;
        }
        if let Some(v) = args.decay {
            c.decay = v;
        }
        if let Some(v) = args.snr_db {
            c.snr_db = v;
        }
        if let Some(v) = args.signals {
            c.signals = v;
        }
        if let Some(v) = args.duration_s {
            c.duration_s = v;
        }
    }
    if let Some(rate) = args.sample_rate {
        spec.sample_rate = rate;
    }
    if let Some(segment_s) = args.background_segment_s {
        spec.background = Some(Background {
            segment_s,
            snr_db: args.background_snr_db.unwrap_or(0.0),
        });
    }
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let config = resolve_config(cli.config.as_deref(), None, Overrides::default())?;
    spec.validate(config.max_pitch_hz, config.window_len)?;
    let dataset = write_corpus(&spec, &args.out)?;
    let mut w = std::io::stdout().lock();
    writeln!(
        w,
        "Wrote {} signals ({} classes) and {}",
        dataset.len(),
        spec.classes.len(),
        args.out.join(roadsound::synth::MANIFEST_NAME).display()
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.globals;
    let mut unclassified = 0;
    match cli.command {
        Command::Extract {
            manifest,
            out,
            overrides,
        } => cmd_extract(g, &manifest, out.as_deref(), overrides)?,
        Command::Train {
            manifest,
            out,
            overrides,
        } => cmd_train(g, &manifest, &out, overrides)?,
        Command::Classify {
            model,
            wavs,
            overrides,
        } => unclassified = cmd_classify(g, &model, &wavs, overrides)?,
        Command::Evaluate {
            manifest,
            compare,
            out,
            overrides,
        } => cmd_evaluate(g, &manifest, compare, out.as_deref(), overrides)?,
        Command::Synth(args) => cmd_synth(g, args)?,
    }
    if unclassified > 0 {
        eprintln!("roadsound: {unclassified} signal(s) unclassifiable (no periodic frames)");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(Error::kind)
        .unwrap_or(ErrorKind::Data);
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("roadsound: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
