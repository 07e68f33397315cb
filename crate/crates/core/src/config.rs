//! Flat `key = value` experiment configuration (a TOML subset, `#` comments).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::LabelSet;
use crate::classify::{ClassifierKind, ClassifierSpec, KnnMetric};
use crate::error::{Error, Result};
use crate::features::ExtractionConfig;

/// Every tunable of an experiment. Missing keys take their defaults, unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub window_len: usize,
    pub overlap: usize,
    pub filter_order: usize,
    pub cutoff_hz: f64,
    pub clip_fraction: f64,
    pub periodicity_threshold: f64,
    pub max_pitch_hz: f64,
    pub median_width: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub classifier: ClassifierKind,
    pub knn_k: usize,
    pub knn_metric: KnnMetric,
    pub shrinkage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
    pub apply_eq5: bool,
    pub folds: usize,
    pub seed: u64,
    pub labels: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_parts(
            &ExtractionConfig::default(),
            &ClassifierSpec::default(),
            10,
            0,
            &LabelSet::default(),
        )
    }
}

impl ExperimentConfig {
    pub fn from_parts(
        extraction: &ExtractionConfig,
        spec: &ClassifierSpec,
        folds: usize,
        seed: u64,
        labels: &LabelSet,
    ) -> Self {
        let e = extraction.clone();
        Self {
            window_len: e.window_len,
            overlap: e.overlap,
            filter_order: e.filter_order,
            cutoff_hz: e.cutoff_hz,
            clip_fraction: e.clip_fraction,
            periodicity_threshold: e.periodicity_threshold,
            max_pitch_hz: e.max_pitch_hz,
            median_width: e.median_width,
            alpha: e.alpha,
            zeta: e.zeta,
            classifier: spec.kind,
            knn_k: spec.knn_k,
            knn_metric: spec.knn_metric,
            shrinkage: spec.shrinkage,
            standardize: spec.standardize,
            apply_eq5: spec.apply_eq5,
            folds,
            seed,
            labels: labels.names().to_vec(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.extraction().validate()?;
        self.label_set()?;
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::Config(format!(
                "shrinkage must lie in [0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }

    pub fn extraction(&self) -> ExtractionConfig {
        ExtractionConfig {
            window_len: self.window_len,
            overlap: self.overlap,
            filter_order: self.filter_order,
            cutoff_hz: self.cutoff_hz,
            clip_fraction: self.clip_fraction,
            periodicity_threshold: self.periodicity_threshold,
            max_pitch_hz: self.max_pitch_hz,
            median_width: self.median_width,
            alpha: self.alpha,
            zeta: self.zeta,
        }
    }

    pub fn classifier_spec(&self) -> ClassifierSpec {
        ClassifierSpec {
            kind: self.classifier,
            knn_k: self.knn_k,
            knn_metric: self.knn_metric,
            shrinkage: self.shrinkage,
            standardize: self.standardize,
            apply_eq5: self.apply_eq5,
        }
    }

    pub fn label_set(&self) -> Result<LabelSet> {
        LabelSet::new(self.labels.iter().cloned())
    }
}
