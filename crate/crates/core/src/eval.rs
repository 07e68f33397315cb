//! Signal-level k-fold cross-validation and report emission.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{ClassId, LabelSet, LabeledDataset};
use crate::classify::{
    classify_signal, ClassifierKind, ClassifierSpec, FrameClassifier, KnnMetric, TrainingSet,
};
use crate::error::{Error, Result};
use crate::features::{ExtractionConfig, SignalFeatures};

pub const REPORT_VERSION: u32 = 1;

/// Test-fold membership for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Dataset indices held out in each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices used for training when `fold` is held out.
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

/// Stratified split: each class is shuffled with a seeded RNG and dealt
/// round-robin into `k` folds. Dealing continues across classes from where the
/// previous class stopped, which also balances total fold sizes.
pub fn stratified_folds(
    labels: &LabelSet,
    classes: &[ClassId],
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    for (i, c) in classes.iter().enumerate() {
        members[c.0].push(i);
    }
    let small: Vec<String> = labels
        .ids()
        .filter(|id| !members[id.0].is_empty() && members[id.0].len() < k)
        .map(|id| format!("{} ({} signals)", labels.name(id), members[id.0].len()))
        .collect();
    if !small.is_empty() {
        return Err(Error::Data(format!(
            "{k}-fold stratification needs at least {k} signals per class; too small: {}",
            small.join(", ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class_members in &mut members {
        class_members.shuffle(&mut rng);
        for &i in class_members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, seed, folds })
}

pub fn kfold_split(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let classes: Vec<ClassId> = dataset.entries().iter().map(|e| e.label).collect();
    stratified_folds(dataset.labels(), &classes, k, seed)
}

/// Actual-by-predicted counts in label-set order. Signals that could not be
/// classified are tallied per actual class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub unclassified: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
            unclassified: vec![0; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(Self {
            counts,
            unclassified: vec![0; k],
        })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, actual: ClassId, predicted: Option<ClassId>) {
        match predicted {
            Some(p) => self.counts[actual.0][p.0] += 1,
            None => self.unclassified[actual.0] += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        for (u, o) in self.unclassified.iter_mut().zip(&other.unclassified) {
            *u += o;
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .iter()
            .zip(&self.unclassified)
            .map(|(row, u)| row.iter().sum::<u64>() + u)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }
}

/// `100 * trace / total`.
pub fn confusion_accuracy(matrix: &ConfusionMatrix) -> Result<f64> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::InvalidArgument("confusion matrix is empty".into()));
    }
    Ok(100.0 * matrix.correct() as f64 / total as f64)
}

/// Frame totals across a dataset at each selection stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub total: usize,
    pub periodic: usize,
    pub high_energy: usize,
}

impl FrameCounts {
    pub fn of(features: &[SignalFeatures]) -> Self {
        features.iter().fold(Self::default(), |acc, f| Self {
            total: acc.total + f.track.len(),
            periodic: acc.periodic + f.periodic.len(),
            high_energy: acc.high_energy + f.high_energy.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub extraction: ExtractionConfig,
    pub classifier: ClassifierSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub classifier: String,
    pub config: EvalConfig,
    pub labels: LabelSet,
    pub seed: u64,
    /// Percent correct per fold.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the fold accuracies.
    pub std: f64,
    pub confusion: ConfusionMatrix,
    pub fold_confusions: Vec<ConfusionMatrix>,
    pub frame_counts: FrameCounts,
}

/// Arithmetic mean and sample (n-1) standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvaluationReport {
    pub fn from_folds(
        config: EvalConfig,
        labels: LabelSet,
        seed: u64,
        fold_confusions: Vec<ConfusionMatrix>,
        frame_counts: FrameCounts,
    ) -> Result<Self> {
        let fold_accuracies = fold_confusions
            .iter()
            .map(confusion_accuracy)
            .collect::<Result<Vec<_>>>()?;
        let (mean, std) = mean_and_std(&fold_accuracies);
        let mut confusion = ConfusionMatrix::new(labels.len());
        for f in &fold_confusions {
            confusion.add(f);
        }
        Ok(Self {
            version: REPORT_VERSION,
            classifier: config.classifier.display_name(),
            config,
            labels,
            seed,
            fold_accuracies,
            mean,
            std,
            confusion,
            fold_confusions,
            frame_counts,
        })
    }

    /// Accuracy cell in the `mean ± std` style of a results table.
    pub fn accuracy_cell(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Extracts features for every dataset entry, in parallel, preserving order.
pub fn extract_dataset(
    dataset: &LabeledDataset,
    config: &ExtractionConfig,
) -> Result<Vec<SignalFeatures>> {
    config.validate()?;
    dataset
        .entries()
        .par_iter()
        .map(|entry| {
            crate::audio_io::load_wav(&entry.path)
                .and_then(|signal| SignalFeatures::extract(&signal, config))
                .map_err(|e| e.in_file(&entry.path))
        })
        .collect()
}

/// Collects the frame vectors of the signals at `indices`.
pub fn training_set(
    labels: &LabelSet,
    features: &[SignalFeatures],
    classes: &[ClassId],
    indices: &[usize],
    apply_eq5: bool,
) -> TrainingSet {
    let mut set = TrainingSet::new(labels.clone());
    for &i in indices {
        let track = if apply_eq5 {
            &features[i].high_energy
        } else {
            &features[i].periodic
        };
        for v in track.vectors() {
            set.push(v, classes[i]);
        }
    }
    set
}

/// Runs every fold with a caller-supplied fitting routine and returns one
/// confusion matrix per fold.
pub fn cross_validate_with<C, F>(
    labels: &LabelSet,
    features: &[SignalFeatures],
    classes: &[ClassId],
    plan: &FoldPlan,
    apply_eq5: bool,
    fit: F,
) -> Result<Vec<ConfusionMatrix>>
where
    C: FrameClassifier,
    F: Fn(&TrainingSet) -> Result<C> + Sync,
{
    if features.len() != classes.len() {
        return Err(Error::InvalidArgument(
            "features and labels differ in length".into(),
        ));
    }
    if let Some(&bad) = plan.folds.iter().flatten().find(|&&i| i >= features.len()) {
        return Err(Error::InvalidArgument(format!(
            "fold plan refers to missing signal {bad}"
        )));
    }
    (0..plan.folds.len())
        .into_par_iter()
        .map(|fold| {
            let train = training_set(
                labels,
                features,
                classes,
                &plan.training_indices(fold),
                apply_eq5,
            );
            let model = fit(&train)?;
            let mut confusion = ConfusionMatrix::new(labels.len());
            for &i in &plan.folds[fold] {
                let decision = classify_signal(&model, &features[i], apply_eq5);
                confusion.record(classes[i], decision.label());
            }
            Ok(confusion)
        })
        .collect()
}

/// Cross-validates `spec` on pre-extracted features.
pub fn evaluate_features(
    labels: &LabelSet,
    features: &[SignalFeatures],
    classes: &[ClassId],
    extraction: &ExtractionConfig,
    spec: &ClassifierSpec,
    plan: &FoldPlan,
) -> Result<EvaluationReport> {
    let folds = cross_validate_with(labels, features, classes, plan, spec.apply_eq5, |t| {
        spec.fit(t)
    })?;
    EvaluationReport::from_folds(
        EvalConfig {
            extraction: extraction.clone(),
            classifier: spec.clone(),
        },
        labels.clone(),
        plan.seed,
        folds,
        FrameCounts::of(features),
    )
}

pub fn run_cv(
    dataset: &LabeledDataset,
    extraction: &ExtractionConfig,
    spec: &ClassifierSpec,
    plan: &FoldPlan,
) -> Result<EvaluationReport> {
    let features = extract_dataset(dataset, extraction)?;
    let classes: Vec<ClassId> = dataset.entries().iter().map(|e| e.label).collect();
    evaluate_features(
        dataset.labels(),
        &features,
        &classes,
        extraction,
        spec,
        plan,
    )
}

/// The seven comparison rows, in results-table order.
pub fn comparison_specs(base: &ClassifierSpec) -> Vec<ClassifierSpec> {
    let with = |kind, apply_eq5, metric| ClassifierSpec {
        kind,
        apply_eq5,
        knn_metric: metric,
        standardize: None,
        ..base.clone()
    };
    vec![
        with(ClassifierKind::LeastSquares, false, base.knn_metric),
        with(ClassifierKind::Knn, false, KnnMetric::Cosine),
        with(ClassifierKind::Knn, false, KnnMetric::Euclidean),
        with(ClassifierKind::Lda, false, base.knn_metric),
        with(ClassifierKind::Lda, true, base.knn_metric),
        with(ClassifierKind::Qda, false, base.knn_metric),
        with(ClassifierKind::Qda, true, base.knn_metric),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}`; expected text, csv or json"
            ))),
        }
    }
}

/// Fixed-width actual-by-predicted grid.
pub fn confusion_grid(labels: &LabelSet, matrix: &ConfusionMatrix) -> String {
    let show_unclassified = matrix.unclassified.iter().any(|&u| u > 0);
    let width = labels
        .names()
        .iter()
        .map(|n| n.len())
        .chain([6, if show_unclassified { 12 } else { 0 }])
        .max()
        .unwrap_or(6)
        + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Actual");
    for name in labels.names() {
        let _ = write!(out, "{name:>width$}");
    }
    if show_unclassified {
        let _ = write!(out, "{:>width$}", "unclassified");
    }
    out.push('\n');
    for (i, name) in labels.names().iter().enumerate() {
        let _ = write!(out, "{name:<width$}");
        for c in &matrix.counts[i] {
            let _ = write!(out, "{c:>width$}");
        }
        if show_unclassified {
            let _ = write!(out, "{:>width$}", matrix.unclassified[i]);
        }
        out.push('\n');
    }
    out
}

pub fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Classifier: {}", report.classifier);
    let _ = writeln!(
        out,
        "Folds: {} (seed {})",
        report.fold_accuracies.len(),
        report.seed
    );
    let _ = writeln!(out, "Accuracy (%): {}", report.accuracy_cell());
    let folds: Vec<String> = report
        .fold_accuracies
        .iter()
        .map(|a| format!("{a:.2}"))
        .collect();
    let _ = writeln!(out, "Fold accuracies (%): {}", folds.join(" "));
    let fc = report.frame_counts;
    let _ = writeln!(
        out,
        "Frames: {} total, {} periodic, {} high-energy",
        fc.total, fc.periodic, fc.high_energy
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "Confusion matrix (rows actual, columns predicted)");
    out.push_str(&confusion_grid(&report.labels, &report.confusion));
    out
}

/// One row per fold with its accuracy and flattened confusion counts.
pub fn write_csv<W: Write>(out: W, report: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names = report.labels.names();
    let mut header = vec![
        "fold".to_string(),
        "accuracy".into(),
        "correct".into(),
        "total".into(),
    ];
    for a in names {
        for p in names {
            header.push(format!("{a}>{p}"));
        }
        header.push(format!("{a}>unclassified"));
    }
    w.write_record(&header)?;
    for (i, (acc, m)) in report
        .fold_accuracies
        .iter()
        .zip(&report.fold_confusions)
        .enumerate()
    {
        let mut row = vec![
            i.to_string(),
            acc.to_string(),
            m.correct().to_string(),
            m.total().to_string(),
        ];
        for (r, u) in m.counts.iter().zip(&m.unclassified) {
            row.extend(r.iter().map(|c| c.to_string()));
            row.push(u.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report<W: Write>(
    mut out: W,
    report: &EvaluationReport,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Text => out.write_all(render_text(report).as_bytes())?,
        ReportFormat::Csv => write_csv(&mut out, report)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Results-table rendering of several reports: one `name  mean ± std` line
/// each.
pub fn render_comparison(reports: &[EvaluationReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.classifier.chars().count())
        .chain(["Classifier".len()])
        .max()
        .unwrap_or(10)
        + 2;
    let mut out = format!("{:<width$}Accuracy (%)\n", "Classifier");
    for r in reports {
        let _ = writeln!(out, "{:<width$}{}", r.classifier, r.accuracy_cell());
    }
    out
}

pub fn emit_comparison<W: Write>(
    mut out: W,
    reports: &[EvaluationReport],
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Text => {
            out.write_all(render_comparison(reports).as_bytes())?;
            if let Some(best) = reports.last() {
                writeln!(
                    out,
                    "\nConfusion matrix for {} (rows actual, columns predicted)",
                    best.classifier
                )?;
                out.write_all(confusion_grid(&best.labels, &best.confusion).as_bytes())?;
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["classifier", "mean", "std", "fold_accuracies"])?;
            for r in reports {
                let folds: Vec<String> = r.fold_accuracies.iter().map(|a| a.to_string()).collect();
                w.write_record([
                    r.classifier.clone(),
                    r.mean.to_string(),
                    r.std.to_string(),
                    folds.join(";"),
                ])?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, reports)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
