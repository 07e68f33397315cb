//! Frame classifiers over `(energy, zcr, pitch)` vectors and signal-level
//! majority voting.
//!
//! The quadratic discriminant of class `k` is
//! `y_k(X) = X'Q_k X + V_k'X + v0_k` with Gaussian maximum-likelihood
//! coefficients `Q_k = -Σ_k⁻¹/2`, `V_k = Σ_k⁻¹μ_k` and
//! `v0_k = -μ_k'Σ_k⁻¹μ_k/2 - ln|Σ_k|/2 + ln π_k`. LDA shares one pooled
//! covariance, which cancels the quadratic term.

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::audio_io::{ClassId, LabelSet};
use crate::error::{Error, Result};
use crate::features::SignalFeatures;

pub const DIM: usize = 3;

pub type FeatureVector = [f64; DIM];

/// Labeled frame vectors used to fit a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub labels: LabelSet,
    pub vectors: Vec<FeatureVector>,
    pub classes: Vec<ClassId>,
}

impl TrainingSet {
    pub fn new(labels: LabelSet) -> Self {
        Self {
            labels,
            vectors: Vec::new(),
            classes: Vec::new(),
        }
    }

    pub fn push(&mut self, vector: FeatureVector, class: ClassId) {
        self.vectors.push(vector);
        self.classes.push(class);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for c in &self.classes {
            counts[c.0] += 1;
        }
        counts
    }

    fn check(&self) -> Result<()> {
        if self.vectors.len() != self.classes.len() {
            return Err(Error::InvalidArgument(
                "training vectors and labels differ in length".into(),
            ));
        }
        if let Some(c) = self.classes.iter().find(|c| c.0 >= self.labels.len()) {
            return Err(Error::InvalidArgument(format!(
                "class index {} outside label set",
                c.0
            )));
        }
        if let Some(i) = self
            .vectors
            .iter()
            .position(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "training vector {i} has a non-finite component"
            )));
        }
        let present = self.class_counts().iter().filter(|&&n| n > 0).count();
        if present < 2 {
            return Err(Error::Data(format!(
                "training needs at least 2 classes with frames, found {present}"
            )));
        }
        Ok(())
    }
}

/// Per-feature z-scoring fitted on training vectors. Constant features keep
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: FeatureVector,
    pub scale: FeatureVector,
}

impl Standardizer {
    pub fn fit(vectors: &[FeatureVector]) -> Self {
        let n = vectors.len().max(1) as f64;
        let mut mean = [0.0; DIM];
        for v in vectors {
            for d in 0..DIM {
                mean[d] += v[d];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; DIM];
        for v in vectors {
            for d in 0..DIM {
                var[d] += (v[d] - mean[d]).powi(2);
            }
        }
        let scale = var.map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        });
        Self { mean, scale }
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|d| (x[d] - self.mean[d]) / self.scale[d])
    }
}

fn transform(standardizer: &Option<Standardizer>, x: &FeatureVector) -> FeatureVector {
    match standardizer {
        Some(s) => s.apply(x),
        None => *x,
    }
}

/// Index of the largest score; ties go to the earlier class.
fn argmax(scores: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    ClassId(best)
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; DIM]; DIM] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

fn from_rows(rows: &[[f64; DIM]; DIM]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

/// Sample statistics of each class: counts, means and scatter matrices.
struct ClassMoments {
    counts: Vec<usize>,
    means: Vec<Vector3<f64>>,
    scatters: Vec<Matrix3<f64>>,
}

fn class_moments(data: &TrainingSet, standardizer: &Option<Standardizer>) -> ClassMoments {
    let k = data.labels.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![Vector3::zeros(); k];
    let xs: Vec<Vector3<f64>> = data
        .vectors
        .iter()
        .map(|v| Vector3::from(transform(standardizer, v)))
        .collect();
    for (x, c) in xs.iter().zip(&data.classes) {
        counts[c.0] += 1;
        sums[c.0] += x;
    }
    let means: Vec<Vector3<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { *s })
        .collect();
    let mut scatters = vec![Matrix3::zeros(); k];
    for (x, c) in xs.iter().zip(&data.classes) {
        let d = x - means[c.0];
        scatters[c.0] += d * d.transpose();
    }
    ClassMoments {
        counts,
        means,
        scatters,
    }
}

/// `(1-λ)Σ + λ·(tr Σ / d)·I`.
pub fn shrink(cov: &Matrix3<f64>, shrinkage: f64) -> Matrix3<f64> {
    let target = cov.trace() / DIM as f64;
    cov * (1.0 - shrinkage) + Matrix3::identity() * (shrinkage * target)
}

/// Inverse and log-determinant via Cholesky.
fn precision_and_log_det(cov: &Matrix3<f64>, what: &str) -> Result<(Matrix3<f64>, f64)> {
    let chol = cov.cholesky().ok_or_else(|| {
        Error::Numeric(format!(
            "covariance of {what} is not positive definite; use a larger shrinkage"
        ))
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::Numeric(format!(
            "covariance of {what} is singular; use a larger shrinkage"
        )));
    }
    Ok((chol.inverse(), log_det))
}

fn check_shrinkage(shrinkage: f64) -> Result<()> {
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage must lie in [0, 1), got {shrinkage}"
        )));
    }
    Ok(())
}

/// Mean, covariance and prior of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian {
    pub label: String,
    pub mean: FeatureVector,
    /// Row-major, after shrinkage.
    pub covariance: [[f64; DIM]; DIM],
    pub prior: f64,
    pub count: usize,
}

/// Coefficients `(Q, V, v0)` of one quadratic discriminant.
#[derive(Debug, Clone, PartialEq)]
struct Discriminant {
    quadratic: Matrix3<f64>,
    linear: Vector3<f64>,
    constant: f64,
}

impl Discriminant {
    fn score(&self, x: &Vector3<f64>) -> f64 {
        (x.transpose() * self.quadratic * x)[(0, 0)] + self.linear.dot(x) + self.constant
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QdaParams {
    labels: LabelSet,
    shrinkage: f64,
    standardizer: Option<Standardizer>,
    classes: Vec<Option<ClassGaussian>>,
}

/// Quadratic discriminant analysis model. Classes absent from the training
/// data have no Gaussian and never win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QdaParams", into = "QdaParams")]
pub struct QdaModel {
    labels: LabelSet,
    shrinkage: f64,
    standardizer: Option<Standardizer>,
    classes: Vec<Option<ClassGaussian>>,
    discriminants: Vec<Option<Discriminant>>,
}

impl QdaModel {
    pub fn fit(data: &TrainingSet, shrinkage: f64, standardize: bool) -> Result<Self> {
        data.check()?;
        check_shrinkage(shrinkage)?;
        let standardizer = standardize.then(|| Standardizer::fit(&data.vectors));
        let m = class_moments(data, &standardizer);
        let total = data.len() as f64;
        let mut classes = Vec::with_capacity(data.labels.len());
        for id in data.labels.ids() {
            let n = m.counts[id.0];
            if n == 0 {
                classes.push(None);
                continue;
            }
            let name = data.labels.name(id);
            if n < 2 {
                return Err(Error::Data(format!(
                    "class `{name}` has {n} training vector; at least 2 are needed"
                )));
            }
            let cov = shrink(&(m.scatters[id.0] / (n as f64 - 1.0)), shrinkage);
            classes.push(Some(ClassGaussian {
                label: name.to_string(),
                mean: m.means[id.0].into(),
                covariance: to_rows(&cov),
                prior: n as f64 / total,
                count: n,
            }));
        }
        Self::from_params(QdaParams {
            labels: data.labels.clone(),
            shrinkage,
            standardizer,
            classes,
        })
    }

    fn from_params(p: QdaParams) -> Result<Self> {
        if p.classes.len() != p.labels.len() {
            return Err(Error::InvalidArgument(
                "QDA model has a class count different from its label set".into(),
            ));
        }
        let discriminants = p
            .classes
            .iter()
            .map(|g| {
                g.as_ref()
                    .map(|g| {
                        let (precision, log_det) = precision_and_log_det(
                            &from_rows(&g.covariance),
                            &format!("class `{}`", g.label),
                        )?;
                        let mean = Vector3::from(g.mean);
                        let linear = precision * mean;
                        Ok(Discriminant {
                            quadratic: precision * -0.5,
                            constant: -0.5 * mean.dot(&linear) - 0.5 * log_det + g.prior.ln(),
                            linear,
                        })
                    })
                    .transpose()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            labels: p.labels,
            shrinkage: p.shrinkage,
            standardizer: p.standardizer,
            classes: p.classes,
            discriminants,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn class(&self, id: ClassId) -> Option<&ClassGaussian> {
        self.classes[id.0].as_ref()
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// `y_k(X)` for every class in label-set order; `-inf` for absent classes.
    pub fn discriminants(&self, x: &FeatureVector) -> Vec<f64> {
        let x = Vector3::from(transform(&self.standardizer, x));
        self.discriminants
            .iter()
            .map(|d| d.as_ref().map_or(f64::NEG_INFINITY, |d| d.score(&x)))
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> ClassId {
        argmax(&self.discriminants(x))
    }
}

impl TryFrom<QdaParams> for QdaModel {
    type Error = Error;

    fn try_from(p: QdaParams) -> Result<Self> {
        Self::from_params(p)
    }
}

impl From<QdaModel> for QdaParams {
    fn from(m: QdaModel) -> Self {
        QdaParams {
            labels: m.labels,
            shrinkage: m.shrinkage,
            standardizer: m.standardizer,
            classes: m.classes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LdaParams {
    labels: LabelSet,
    shrinkage: f64,
    standardizer: Option<Standardizer>,
    means: Vec<Option<FeatureVector>>,
    priors: Vec<f64>,
    covariance: [[f64; DIM]; DIM],
}

/// Linear discriminant analysis with a pooled within-class covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LdaParams", into = "LdaParams")]
pub struct LdaModel {
    params: LdaParams,
    weights: Vec<Option<(Vector3<f64>, f64)>>,
}

impl PartialEq for LdaParams {
    fn eq(&self, o: &Self) -> bool {
        self.labels == o.labels
            && self.shrinkage == o.shrinkage
            && self.standardizer == o.standardizer
            && self.means == o.means
            && self.priors == o.priors
            && self.covariance == o.covariance
    }
}

impl LdaModel {
    pub fn fit(data: &TrainingSet, shrinkage: f64, standardize: bool) -> Result<Self> {
        data.check()?;
        check_shrinkage(shrinkage)?;
        let standardizer = standardize.then(|| Standardizer::fit(&data.vectors));
        let m = class_moments(data, &standardizer);
        let present = m.counts.iter().filter(|&&n| n > 0).count();
        let n = data.len();
        if n <= present {
            return Err(Error::Data(format!(
                "LDA needs more vectors ({n}) than classes ({present})"
            )));
        }
        let scatter: Matrix3<f64> = m.scatters.iter().sum();
        let pooled = shrink(&(scatter / (n - present) as f64), shrinkage);
        Self::from_params(LdaParams {
            labels: data.labels.clone(),
            shrinkage,
            standardizer,
            means: m
                .means
                .iter()
                .zip(&m.counts)
                .map(|(mu, &c)| (c > 0).then(|| (*mu).into()))
                .collect(),
            priors: m.counts.iter().map(|&c| c as f64 / n as f64).collect(),
            covariance: to_rows(&pooled),
        })
    }

    fn from_params(params: LdaParams) -> Result<Self> {
        if params.means.len() != params.labels.len() || params.priors.len() != params.labels.len() {
            return Err(Error::InvalidArgument(
                "LDA model has a class count different from its label set".into(),
            ));
        }
        let (precision, _) =
            precision_and_log_det(&from_rows(&params.covariance), "the pooled classes")?;
        let weights = params
            .means
            .iter()
            .zip(&params.priors)
            .map(|(mu, &prior)| {
                mu.map(|mu| {
                    let mu = Vector3::from(mu);
                    let linear = precision * mu;
                    (linear, -0.5 * mu.dot(&linear) + prior.ln())
                })
            })
            .collect();
        Ok(Self { params, weights })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.params.labels
    }

    pub fn pooled_covariance(&self) -> [[f64; DIM]; DIM] {
        self.params.covariance
    }

    pub fn discriminants(&self, x: &FeatureVector) -> Vec<f64> {
        let x = Vector3::from(transform(&self.params.standardizer, x));
        self.weights
            .iter()
            .map(|w| w.as_ref().map_or(f64::NEG_INFINITY, |(v, c)| v.dot(&x) + c))
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> ClassId {
        argmax(&self.discriminants(x))
    }
}

impl TryFrom<LdaParams> for LdaModel {
    type Error = Error;

    fn try_from(p: LdaParams) -> Result<Self> {
        Self::from_params(p)
    }
}

impl From<LdaModel> for LdaParams {
    fn from(m: LdaModel) -> Self {
        m.params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMetric {
    Euclidean,
    Cosine,
}

impl fmt::Display for KnnMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnnMetric::Euclidean => "euclidean",
            KnnMetric::Cosine => "cosine",
        })
    }
}

impl KnnMetric {
    pub fn distance(self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        match self {
            KnnMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt(),
            KnnMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                // Zero vectors have similarity 0.
                let similarity = if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                };
                1.0 - similarity
            }
        }
    }
}

/// Brute-force k-nearest-neighbor index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    labels: LabelSet,
    k: usize,
    metric: KnnMetric,
    standardizer: Option<Standardizer>,
    vectors: Vec<FeatureVector>,
    classes: Vec<ClassId>,
}

impl KnnIndex {
    pub fn fit(data: &TrainingSet, k: usize, metric: KnnMetric, standardize: bool) -> Result<Self> {
        data.check()?;
        if k == 0 || k > data.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must lie in 1..={} (the training set size)",
                data.len()
            )));
        }
        let standardizer = standardize.then(|| Standardizer::fit(&data.vectors));
        Ok(Self {
            labels: data.labels.clone(),
            k,
            metric,
            vectors: data
                .vectors
                .iter()
                .map(|v| transform(&standardizer, v))
                .collect(),
            standardizer,
            classes: data.classes.clone(),
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> KnnMetric {
        self.metric
    }

    /// Majority label among the `k` nearest stored vectors. Distance ties go
    /// to earlier training vectors, vote ties to earlier labels.
    pub fn predict(&self, x: &FeatureVector) -> ClassId {
        let x = transform(&self.standardizer, x);
        let mut dist: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (self.metric.distance(&x, v), i))
            .collect();
        let key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, key);
        }
        let mut votes = vec![0.0; self.labels.len()];
        for &(_, i) in &dist[..self.k] {
            votes[self.classes[i].0] += 1.0;
        }
        argmax(&votes)
    }
}

/// Ridge term added to the normal equations of the least-squares fit.
pub const LEAST_SQUARES_RIDGE: f64 = 1e-8;

/// One-hot linear regression on `[1, X]`, decoded by argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresModel {
    labels: LabelSet,
    standardizer: Option<Standardizer>,
    /// `(1 + DIM)` rows, one column per class.
    weights: Vec<Vec<f64>>,
}

impl LeastSquaresModel {
    pub fn fit(data: &TrainingSet, standardize: bool) -> Result<Self> {
        data.check()?;
        let standardizer = standardize.then(|| Standardizer::fit(&data.vectors));
        let k = data.labels.len();
        let mut gram = DMatrix::<f64>::zeros(DIM + 1, DIM + 1);
        let mut rhs = DMatrix::<f64>::zeros(DIM + 1, k);
        for (v, c) in data.vectors.iter().zip(&data.classes) {
            let x = transform(&standardizer, v);
            let row: [f64; DIM + 1] = std::array::from_fn(|i| if i == 0 { 1.0 } else { x[i - 1] });
            for i in 0..=DIM {
                for j in 0..=DIM {
                    gram[(i, j)] += row[i] * row[j];
                }
                rhs[(i, c.0)] += row[i];
            }
        }
        for i in 0..=DIM {
            gram[(i, i)] += LEAST_SQUARES_RIDGE;
        }
        let w = gram
            .lu()
            .solve(&rhs)
            .filter(|w| w.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Numeric("least-squares normal equations are singular".into()))?;
        Ok(Self {
            labels: data.labels.clone(),
            standardizer,
            weights: (0..=DIM)
                .map(|i| w.row(i).iter().copied().collect())
                .collect(),
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let x = transform(&self.standardizer, x);
        (0..self.labels.len())
            .map(|c| {
                self.weights[0][c] + (0..DIM).map(|d| x[d] * self.weights[d + 1][c]).sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> ClassId {
        argmax(&self.scores(x))
    }
}

/// Anything that labels single frame vectors.
pub trait FrameClassifier {
    fn num_classes(&self) -> usize;
    fn classify_frame(&self, x: &FeatureVector) -> ClassId;
}

/// A fitted classifier of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Qda(QdaModel),
    Lda(LdaModel),
    Knn(KnnIndex),
    LeastSquares(LeastSquaresModel),
}

impl Classifier {
    pub fn labels(&self) -> &LabelSet {
        match self {
            Classifier::Qda(m) => m.labels(),
            Classifier::Lda(m) => m.labels(),
            Classifier::Knn(m) => m.labels(),
            Classifier::LeastSquares(m) => m.labels(),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Qda(_) => ClassifierKind::Qda,
            Classifier::Lda(_) => ClassifierKind::Lda,
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::LeastSquares(_) => ClassifierKind::LeastSquares,
        }
    }
}

impl FrameClassifier for Classifier {
    fn num_classes(&self) -> usize {
        self.labels().len()
    }

    fn classify_frame(&self, x: &FeatureVector) -> ClassId {
        match self {
            Classifier::Qda(m) => m.predict(x),
            Classifier::Lda(m) => m.predict(x),
            Classifier::Knn(m) => m.predict(x),
            Classifier::LeastSquares(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Qda,
    Lda,
    Knn,
    LeastSquares,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Qda => "qda",
            ClassifierKind::Lda => "lda",
            ClassifierKind::Knn => "knn",
            ClassifierKind::LeastSquares => "least_squares",
        })
    }
}

/// What to fit and how to select its frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub knn_k: usize,
    pub knn_metric: KnnMetric,
    pub shrinkage: f64,
    /// `None` picks the per-kind default: on for kNN and least squares.
    pub standardize: Option<bool>,
    /// Train and test only on high-energy frames.
    pub apply_eq5: bool,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Qda,
            knn_k: 25,
            knn_metric: KnnMetric::Euclidean,
            shrinkage: 1e-4,
            standardize: None,
            apply_eq5: true,
        }
    }
}

impl ClassifierSpec {
    pub fn of_kind(kind: ClassifierKind, apply_eq5: bool) -> Self {
        Self {
            kind,
            apply_eq5,
            ..Self::default()
        }
    }

    pub fn knn(metric: KnnMetric) -> Self {
        Self {
            kind: ClassifierKind::Knn,
            knn_metric: metric,
            apply_eq5: false,
            ..Self::default()
        }
    }

    pub fn standardizes(&self) -> bool {
        self.standardize.unwrap_or(matches!(
            self.kind,
            ClassifierKind::Knn | ClassifierKind::LeastSquares
        ))
    }

    /// Row name in the style of a results table, e.g. `QDA**`.
    pub fn display_name(&self) -> String {
        let stars = if self.apply_eq5 { "**" } else { "" };
        match self.kind {
            ClassifierKind::Qda => format!("QDA{stars}"),
            ClassifierKind::Lda => format!("LDA{stars}"),
            ClassifierKind::LeastSquares => format!("Least Square{stars}"),
            ClassifierKind::Knn => {
                let metric = match self.knn_metric {
                    KnnMetric::Euclidean => "Euclidean",
                    KnnMetric::Cosine => "Cosine",
                };
                format!("kNN{stars}, k={}, {metric}", self.knn_k)
            }
        }
    }

    pub fn fit(&self, data: &TrainingSet) -> Result<Classifier> {
        let standardize = self.standardizes();
        Ok(match self.kind {
            ClassifierKind::Qda => {
                Classifier::Qda(QdaModel::fit(data, self.shrinkage, standardize)?)
            }
            ClassifierKind::Lda => {
                Classifier::Lda(LdaModel::fit(data, self.shrinkage, standardize)?)
            }
            ClassifierKind::Knn => Classifier::Knn(KnnIndex::fit(
                data,
                self.knn_k,
                self.knn_metric,
                standardize,
            )?),
            ClassifierKind::LeastSquares => {
                Classifier::LeastSquares(LeastSquaresModel::fit(data, standardize)?)
            }
        })
    }

    /// The frames of `features` this classifier trains and votes on.
    pub fn frames<'a>(&self, features: &'a SignalFeatures) -> &'a crate::features::FeatureTrack {
        if self.apply_eq5 {
            &features.high_energy
        } else {
            &features.periodic
        }
    }
}

/// Outcome of labeling one signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalDecision {
    Classified {
        label: ClassId,
        /// Share of votes per class, in label-set order.
        fractions: Vec<f64>,
        frames: usize,
    },
    Unclassifiable,
}

impl SignalDecision {
    pub fn label(&self) -> Option<ClassId> {
        match self {
            SignalDecision::Classified { label, .. } => Some(*label),
            SignalDecision::Unclassifiable => None,
        }
    }
}

/// Labels each vector and returns the most frequent class (ties to the
/// earlier label) with the vote fractions, or `Unclassifiable` for no input.
pub fn majority_vote<C, I>(classifier: &C, vectors: I) -> SignalDecision
where
    C: FrameClassifier + ?Sized,
    I: IntoIterator<Item = FeatureVector>,
{
    let mut counts = vec![0usize; classifier.num_classes()];
    for x in vectors {
        counts[classifier.classify_frame(&x).0] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return SignalDecision::Unclassifiable;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    SignalDecision::Classified {
        label: ClassId(best),
        fractions: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        frames: total,
    }
}

/// Votes over the selected frames of a signal, falling back to all periodic
/// frames when the high-energy selection is empty.
pub fn classify_signal<C>(
    classifier: &C,
    features: &SignalFeatures,
    apply_eq5: bool,
) -> SignalDecision
where
    C: FrameClassifier + ?Sized,
{
    if apply_eq5 && !features.high_energy.is_empty() {
        return majority_vote(classifier, features.high_energy.vectors());
    }
    majority_vote(classifier, features.periodic.vectors())
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::features::{FeatureTrack, FrameFeatures, TrackFrame};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_labels() -> LabelSet {
        LabelSet::new(["a", "b"]).unwrap()
    }

    fn gaussian_set(rng: &mut ChaCha8Rng, labels: &LabelSet, per_class: usize) -> TrainingSet {
        let mut set = TrainingSet::new(labels.clone());
        for id in labels.ids() {
            let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let spread: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..2.0));
            let mix: f64 = rng.random_range(-0.8..0.8);
            for _ in 0..per_class {
                let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                set.push(
                    [
                        center[0] + spread[0] * z[0],
                        center[1] + spread[1] * (z[1] + mix * z[0]),
                        center[2] + spread[2] * (z[2] - mix * z[1]),
                    ],
                    id,
                );
            }
        }
        set
    }

    /// Mean and (n-1) covariance by direct summation.
    fn moments_oracle(xs: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
        let n = xs.len() as f64;
        let mut mean = [0.0; 3];
        for x in xs {
            for d in 0..3 {
                mean[d] += x[d] / n;
            }
        }
        let mut cov = [[0.0; 3]; 3];
        for x in xs {
            for r in 0..3 {
                for c in 0..3 {
                    cov[r][c] += (x[r] - mean[r]) * (x[c] - mean[c]) / (n - 1.0);
                }
            }
        }
        (mean, cov)
    }

    #[test]
    fn qda_mean_example_and_singular_class() {
        let labels = two_labels();
        let mut set = TrainingSet::new(labels.clone());
        for v in [
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 2.0],
        ] {
            set.push(v, ClassId(0));
        }
        for v in [
            [5.0, 1.0, 0.0],
            [4.0, 0.0, 1.0],
            [6.0, 1.0, 1.0],
            [5.0, 2.0, 3.0],
        ] {
            set.push(v, ClassId(1));
        }
        let m = QdaModel::fit(&set, 0.0, false).unwrap();
        assert_eq!(m.class(ClassId(0)).unwrap().mean, [0.5, 0.5, 0.5]);
        let priors: f64 = labels
            .ids()
            .filter_map(|i| m.class(i))
            .map(|g| g.prior)
            .sum();
        assert!((priors - 1.0).abs() < 1e-15);

        let mut single = TrainingSet::new(labels);
        single.push([1.0, 1.0, 1.0], ClassId(0));
        for v in [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ] {
            single.push(v, ClassId(1));
        }
        assert!(QdaModel::fit(&single, 0.0, false).is_err());
    }

    #[test]
    fn qda_rejects_degenerate_covariance_without_shrinkage() {
        let mut set = TrainingSet::new(two_labels());
        // Collinear points: rank-1 covariance.
        for t in 0..5 {
            set.push([t as f64, 2.0 * t as f64, 0.0], ClassId(0));
        }
        for v in [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ] {
            set.push(v, ClassId(1));
        }
        let err = QdaModel::fit(&set, 0.0, false).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        assert!(QdaModel::fit(&set, 0.1, false).is_ok());
    }

    #[test]
    fn qda_fit_matches_moment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let set = gaussian_set(&mut rng, &two_labels(), 40);
        let m = QdaModel::fit(&set, 0.0, false).unwrap();
        for id in set.labels.ids() {
            let xs: Vec<[f64; 3]> = set
                .vectors
                .iter()
                .zip(&set.classes)
                .filter(|(_, c)| **c == id)
                .map(|(v, _)| *v)
                .collect();
            let (mean, cov) = moments_oracle(&xs);
            let g = m.class(id).unwrap();
            for d in 0..3 {
                assert!((g.mean[d] - mean[d]).abs() < 1e-9);
                for e in 0..3 {
                    assert!((g.covariance[d][e] - cov[d][e]).abs() < 1e-9);
                    assert_eq!(g.covariance[d][e], g.covariance[e][d]);
                }
            }
        }
    }

    fn identity_two_class(m0: [f64; 3], m1: [f64; 3]) -> TrainingSet {
        // Each class: mean ± unit steps along every axis, so the covariance
        // is a multiple of the identity.
        let mut set = TrainingSet::new(two_labels());
        for (id, m) in [(ClassId(0), m0), (ClassId(1), m1)] {
            for d in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut v = m;
                    v[d] += s;
                    set.push(v, id);
                }
            }
        }
        set
    }

    #[test]
    fn discriminant_symmetry_examples() {
        let set = identity_two_class([0.0, 0.0, 0.0], [4.0, 2.0, -2.0]);
        let q = QdaModel::fit(&set, 0.0, false).unwrap();
        let mid = [2.0, 1.0, -1.0];
        let y = q.discriminants(&mid);
        assert!((y[0] - y[1]).abs() < 1e-9);
        assert_eq!(q.predict(&[0.0, 0.0, 0.0]), ClassId(0));
        assert_eq!(q.predict(&[4.0, 2.0, -2.0]), ClassId(1));

        let l = LdaModel::fit(&set, 0.0, false).unwrap();
        let y = l.discriminants(&mid);
        assert!((y[0] - y[1]).abs() < 1e-9);
        assert_eq!(l.predict(&[0.5, 0.0, 0.0]), ClassId(0));
    }

    #[test]
    fn lda_and_qda_agree_away_from_boundary_with_equal_covariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let labels = LabelSet::new(["a", "b", "c"]).unwrap();
        let centers = [[0.0, 0.0, 0.0], [3.0, 0.0, 1.0], [0.0, 3.0, -1.0]];
        let mut set = TrainingSet::new(labels.clone());
        for (i, c) in centers.iter().enumerate() {
            for _ in 0..400 {
                let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                set.push(
                    [c[0] + z[0], c[1] + 0.5 * z[1] + 0.3 * z[0], c[2] + z[2]],
                    ClassId(i),
                );
            }
        }
        let q = QdaModel::fit(&set, 0.0, false).unwrap();
        let l = LdaModel::fit(&set, 0.0, false).unwrap();
        let mut compared = 0;
        for _ in 0..500 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..5.0));
            let score_gap = |s: &[f64]| {
                let mut v = s.to_vec();
                v.sort_by(|a, b| b.total_cmp(a));
                v[0] - v[1]
            };
            let (qs, ls) = (q.discriminants(&x), l.discriminants(&x));
            if score_gap(&qs) > 1.0 && score_gap(&ls) > 1.0 {
                assert_eq!(q.predict(&x), l.predict(&x), "at {x:?}");
                compared += 1;
            }
        }
        assert!(compared > 100);
    }

    #[test]
    fn lda_survives_constant_class_with_shrinkage() {
        let mut set = TrainingSet::new(two_labels());
        for _ in 0..5 {
            set.push([1.0, 1.0, 1.0], ClassId(0));
        }
        for v in [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0],
        ] {
            set.push(v, ClassId(1));
        }
        assert!(LdaModel::fit(&set, 1e-4, false).is_ok());
    }

    /// Gaussian log-density route: solve with a hand-written 3x3 adjugate
    /// inverse and determinant, independent of the Cholesky path.
    fn log_density_oracle(g: &ClassGaussian, x: &[f64; 3]) -> f64 {
        let m = g.covariance;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let cof = |r: usize, c: usize| {
            let rs: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cs: Vec<usize> = (0..3).filter(|&i| i != c).collect();
            let minor = m[rs[0]][cs[0]] * m[rs[1]][cs[1]] - m[rs[0]][cs[1]] * m[rs[1]][cs[0]];
            if (r + c).is_multiple_of(2) {
                minor
            } else {
                -minor
            }
        };
        let d: Vec<f64> = (0..3).map(|i| x[i] - g.mean[i]).collect();
        let mut maha = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                // inverse[r][c] = cofactor[c][r] / det
                maha += d[r] * cof(c, r) / det * d[c];
            }
        }
        -0.5 * maha - 0.5 * det.ln() + g.prior.ln() - 1.5 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn qda_argmax_matches_log_density_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let labels = LabelSet::default();
        let set = gaussian_set(&mut rng, &labels, 60);
        let m = QdaModel::fit(&set, 0.0, false).unwrap();
        for _ in 0..1000 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-6.0..6.0));
            let oracle: Vec<f64> = labels
                .ids()
                .map(|id| log_density_oracle(m.class(id).unwrap(), &x))
                .collect();
            assert_eq!(m.predict(&x), argmax(&oracle));
        }
    }

    #[test]
    fn qda_invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = LabelSet::new(["a", "b", "c"]).unwrap();
        let set = gaussian_set(&mut rng, &labels, 50);
        let base = QdaModel::fit(&set, 0.0, false).unwrap();
        let queries: Vec<[f64; 3]> = (0..300)
            .map(|_| std::array::from_fn(|_| rng.random_range(-5.0..5.0)))
            .collect();

        // Invertible affine map applied to training and test data.
        let a = [[2.0, 0.5, 0.0], [0.1, 1.5, -0.3], [0.0, 0.7, 3.0]];
        let shift = [1.0, -2.0, 0.5];
        let map = |v: &[f64; 3]| -> [f64; 3] {
            std::array::from_fn(|r| (0..3).map(|c| a[r][c] * v[c]).sum::<f64>() + shift[r])
        };
        let mut mapped = set.clone();
        mapped.vectors = set.vectors.iter().map(map).collect();
        let mm = QdaModel::fit(&mapped, 0.0, false).unwrap();

        // Duplicated dataset.
        let mut doubled = set.clone();
        doubled.vectors.extend(set.vectors.clone());
        doubled.classes.extend(set.classes.clone());
        let dm = QdaModel::fit(&doubled, 0.0, false).unwrap();
        let dl = LdaModel::fit(&doubled, 0.0, false).unwrap();
        let bl = LdaModel::fit(&set, 0.0, false).unwrap();

        let margin = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] - v[1]
        };
        for x in &queries {
            let scores = base.discriminants(x);
            if margin(&scores) < 1e-6 {
                continue;
            }
            assert_eq!(base.predict(x), mm.predict(&map(x)));
            assert_eq!(base.predict(x), dm.predict(x));
            assert_eq!(bl.predict(x), dl.predict(x));
            let shifted: Vec<f64> = scores.iter().map(|s| s + 17.5).collect();
            assert_eq!(argmax(&shifted), argmax(&scores));
        }
    }

    #[test]
    fn standardizer_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<[f64; 3]> = (0..500)
            .map(|_| {
                [
                    rng.random_range(0.0..80.0),
                    7.0,
                    rng.random_range(60.0..900.0),
                ]
            })
            .collect();
        let s = Standardizer::fit(&xs);
        assert_eq!(s.scale[1], 1.0);
        let z: Vec<[f64; 3]> = xs.iter().map(|x| s.apply(x)).collect();
        for d in [0, 2] {
            let mean = z.iter().map(|v| v[d]).sum::<f64>() / 500.0;
            let var = z.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> TrainingSet {
        let names: Vec<String> = (0..classes).map(|i| format!("c{i}")).collect();
        let mut set = TrainingSet::new(LabelSet::new(names).unwrap());
        for i in 0..n {
            let c = i % classes;
            set.push(
                std::array::from_fn(|d| rng.random_range(-1.0..1.0) + (c * (d + 1)) as f64 * 0.3),
                ClassId(c),
            );
        }
        set
    }

    #[test]
    fn knn_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = random_set(&mut rng, 60, 3);
        let one = KnnIndex::fit(&set, 1, KnnMetric::Euclidean, false).unwrap();
        for (v, c) in set.vectors.iter().zip(&set.classes) {
            assert_eq!(one.predict(v), *c);
        }

        let mut skewed = set.clone();
        skewed.push([0.0; 3], ClassId(2));
        let all = KnnIndex::fit(&skewed, skewed.len(), KnnMetric::Euclidean, false).unwrap();
        for _ in 0..20 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-9.0..9.0));
            assert_eq!(all.predict(&x), ClassId(2));
        }

        assert!(KnnIndex::fit(&set, 0, KnnMetric::Cosine, false).is_err());
        assert!(KnnIndex::fit(&set, 61, KnnMetric::Cosine, false).is_err());
        assert_eq!(KnnMetric::Cosine.distance(&[0.0; 3], &[1.0, 2.0, 3.0]), 1.0);
    }

    /// Sort every training vector by (distance, index) and vote over the
    /// first k.
    fn knn_oracle(
        set: &TrainingSet,
        k: usize,
        metric: KnnMetric,
        std: Option<&Standardizer>,
        x: &[f64; 3],
    ) -> ClassId {
        let t = |v: &[f64; 3]| std.map_or(*v, |s| s.apply(v));
        let q = t(x);
        let mut all: Vec<(f64, usize)> = set
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (metric.distance(&q, &t(v)), i))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; set.labels.len()];
        for &(_, i) in &all[..k] {
            votes[set.classes[i].0] += 1;
        }
        let top = *votes.iter().max().unwrap();
        ClassId(votes.iter().position(|&v| v == top).unwrap())
    }

    #[test]
    fn knn_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let set = random_set(&mut rng, 400, 4);
        let std = Standardizer::fit(&set.vectors);
        for metric in [KnnMetric::Euclidean, KnnMetric::Cosine] {
            for standardize in [false, true] {
                let idx = KnnIndex::fit(&set, 25, metric, standardize).unwrap();
                for _ in 0..200 {
                    let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.5..2.5));
                    let s = standardize.then_some(&std);
                    assert_eq!(idx.predict(&x), knn_oracle(&set, 25, metric, s, &x));
                }
            }
        }
    }

    #[test]
    fn knn_euclidean_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = random_set(&mut rng, 200, 3);
        let shift = [10.0, -3.0, 250.0];
        let mut moved = set.clone();
        moved.vectors = set
            .vectors
            .iter()
            .map(|v| std::array::from_fn(|d| v[d] + shift[d]))
            .collect();
        let a = KnnIndex::fit(&set, 25, KnnMetric::Euclidean, false).unwrap();
        let b = KnnIndex::fit(&moved, 25, KnnMetric::Euclidean, false).unwrap();
        for _ in 0..100 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..2.0));
            // Offsets chosen as exact binary fractions keep distances identical.
            let y: [f64; 3] = std::array::from_fn(|d| x[d] + shift[d]);
            assert_eq!(a.predict(&x), b.predict(&y));
        }
    }

    #[test]
    fn least_squares_separable_line() {
        let mut set = TrainingSet::new(two_labels());
        for i in 0..10 {
            set.push([i as f64, 0.0, 0.0], ClassId(0));
            set.push([20.0 + i as f64, 0.0, 0.0], ClassId(1));
        }
        for standardize in [false, true] {
            let m = LeastSquaresModel::fit(&set, standardize).unwrap();
            for (v, c) in set.vectors.iter().zip(&set.classes) {
                assert_eq!(m.predict(v), *c);
            }
        }
    }

    /// Gauss-Jordan solve of the normal equations with the same ridge.
    fn ls_oracle(set: &TrainingSet) -> Vec<Vec<f64>> {
        let k = set.labels.len();
        let mut a = vec![vec![0.0; 4 + k]; 4];
        for (v, c) in set.vectors.iter().zip(&set.classes) {
            let row = [1.0, v[0], v[1], v[2]];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] += row[i] * row[j];
                }
                a[i][4 + c.0] += row[i];
            }
        }
        for i in 0..4 {
            a[i][i] += LEAST_SQUARES_RIDGE;
        }
        for col in 0..4 {
            let piv = (col..4)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let p = a[col][col];
            for j in 0..4 + k {
                a[col][j] /= p;
            }
            for r in 0..4 {
                if r != col {
                    let f = a[r][col];
                    for j in 0..4 + k {
                        a[r][j] -= f * a[col][j];
                    }
                }
            }
        }
        a.iter().map(|row| row[4..].to_vec()).collect()
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let set = random_set(&mut rng, 300, 4);
        let m = LeastSquaresModel::fit(&set, false).unwrap();
        let w = ls_oracle(&set);
        for (r, row) in m.weights().iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((v - w[r][c]).abs() < 1e-6);
            }
        }
        // Normal-equation residual.
        let mut resid: f64 = 0.0;
        for c in 0..4 {
            for i in 0..4 {
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for (v, cls) in set.vectors.iter().zip(&set.classes) {
                    let row = [1.0, v[0], v[1], v[2]];
                    let pred: f64 = (0..4).map(|j| row[j] * m.weights()[j][c]).sum();
                    lhs += row[i] * pred;
                    rhs += row[i] * f64::from(u8::from(cls.0 == c));
                }
                lhs += LEAST_SQUARES_RIDGE * m.weights()[i][c];
                resid = resid.max((lhs - rhs).abs());
            }
        }
        assert!(resid < 1e-6, "{resid}");
        for _ in 0..200 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..2.0));
            let scores: Vec<f64> = (0..4)
                .map(|c| w[0][c] + (0..3).map(|d| x[d] * w[d + 1][c]).sum::<f64>())
                .collect();
            assert_eq!(m.predict(&x), argmax(&scores));
        }
    }

    struct Fixed(Vec<ClassId>);

    impl FrameClassifier for Fixed {
        fn num_classes(&self) -> usize {
            3
        }
        // Frame's energy component indexes the scripted label.
        fn classify_frame(&self, x: &FeatureVector) -> ClassId {
            self.0[x[0] as usize]
        }
    }

    fn features_with(periodic: usize, high: usize) -> SignalFeatures {
        let track = |n: usize| FeatureTrack {
            sample_rate: 11025,
            frames: (0..n)
                .map(|i| TrackFrame {
                    index: i,
                    start: 0,
                    features: FrameFeatures {
                        energy: i as f64,
                        zcr: 0.0,
                        pitch_hz: 100.0,
                    },
                })
                .collect(),
        };
        SignalFeatures {
            track: track(periodic),
            periodic: track(periodic),
            high_energy: track(high),
        }
    }

    #[test]
    fn majority_vote_examples() {
        let c = Fixed(vec![ClassId(0), ClassId(0), ClassId(1)]);
        match majority_vote(&c, (0..3).map(|i| [i as f64, 0.0, 0.0])) {
            SignalDecision::Classified {
                label,
                fractions,
                frames,
            } => {
                assert_eq!(label, ClassId(0));
                assert_eq!(fractions, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
                assert_eq!(frames, 3);
            }
            other => panic!("{other:?}"),
        }
        let tie = Fixed(vec![ClassId(1), ClassId(0)]);
        assert_eq!(
            majority_vote(&tie, (0..2).map(|i| [i as f64, 0.0, 0.0])).label(),
            Some(ClassId(0))
        );
        assert_eq!(
            majority_vote(&tie, std::iter::empty()),
            SignalDecision::Unclassifiable
        );
    }

    #[test]
    fn classify_signal_falls_back_to_periodic_frames() {
        let labels: Vec<ClassId> = (0..10)
            .map(|i| ClassId(if i < 9 { 2 } else { 1 }))
            .collect();
        let c = Fixed(labels);
        assert_eq!(
            classify_signal(&c, &features_with(10, 0), true).label(),
            Some(ClassId(2))
        );
        assert_eq!(
            classify_signal(&c, &features_with(0, 0), true),
            SignalDecision::Unclassifiable
        );
        assert_eq!(
            classify_signal(&c, &features_with(0, 0), false),
            SignalDecision::Unclassifiable
        );
    }

    proptest! {
        #[test]
        fn vote_ignores_frame_order(mut labels in prop::collection::vec(0usize..3, 1..40), seed in any::<u64>()) {
            let c = Fixed(labels.iter().map(|&l| ClassId(l)).collect());
            let order: Vec<usize> = (0..labels.len()).collect();
            let a = majority_vote(&c, order.iter().map(|&i| [i as f64, 0.0, 0.0]));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = order.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng);
            let b = majority_vote(&c, shuffled.iter().map(|&i| [i as f64, 0.0, 0.0]));
            prop_assert_eq!(a, b);
            labels.clear();
        }
    }

    #[test]
    fn model_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let set = gaussian_set(&mut rng, &LabelSet::default(), 30);
        for spec in [
            ClassifierSpec::of_kind(ClassifierKind::Qda, true),
            ClassifierSpec::of_kind(ClassifierKind::Lda, false),
            ClassifierSpec::knn(KnnMetric::Cosine),
            ClassifierSpec::of_kind(ClassifierKind::LeastSquares, false),
        ] {
            let model = spec.fit(&set).unwrap();
            let json = serde_json::to_string(&model).unwrap();
            let back: Classifier = serde_json::from_str(&json).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.kind(), spec.kind);
        }
    }

    #[test]
    fn display_names() {
        assert_eq!(
            ClassifierSpec::of_kind(ClassifierKind::Qda, true).display_name(),
            "QDA**"
        );
        assert_eq!(
            ClassifierSpec::knn(KnnMetric::Cosine).display_name(),
            "kNN, k=25, Cosine"
        );
        assert_eq!(
            ClassifierSpec::of_kind(ClassifierKind::LeastSquares, false).display_name(),
            "Least Square"
        );
    }
}
