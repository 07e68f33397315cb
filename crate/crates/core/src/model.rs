//! Trained model files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio_io::{AudioSignal, LabelSet, LabeledDataset};
use crate::classify::{classify_signal, Classifier, ClassifierSpec, SignalDecision};
use crate::error::{Error, Result};
use crate::eval::{extract_dataset, training_set, FrameCounts};
use crate::features::{ExtractionConfig, SignalFeatures};

pub const MODEL_VERSION: u32 = 1;

/// Hex SHA-256 over the extraction settings and label set. A model only
/// accepts features extracted under the same fingerprint.
pub fn fingerprint(extraction: &ExtractionConfig, labels: &LabelSet) -> String {
    let canonical = serde_json::to_vec(&(extraction, labels)).expect("config serializes");
    Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub fingerprint: String,
    pub extraction: ExtractionConfig,
    pub spec: ClassifierSpec,
    pub labels: LabelSet,
    /// Frames across the training signals at each selection stage.
    pub frame_counts: FrameCounts,
    /// Frame vectors actually fed to the classifier, per class.
    pub training_frames: Vec<usize>,
    pub classifier: Classifier,
}

impl ModelFile {
    /// Fits `spec` on every signal of `dataset`.
    pub fn train(
        dataset: &LabeledDataset,
        extraction: &ExtractionConfig,
        spec: &ClassifierSpec,
    ) -> Result<Self> {
        let features = extract_dataset(dataset, extraction)?;
        let classes: Vec<_> = dataset.entries().iter().map(|e| e.label).collect();
        let all: Vec<usize> = (0..features.len()).collect();
        let set = training_set(dataset.labels(), &features, &classes, &all, spec.apply_eq5);
        let classifier = spec.fit(&set)?;
        Ok(Self {
            version: MODEL_VERSION,
            fingerprint: fingerprint(extraction, dataset.labels()),
            extraction: extraction.clone(),
            spec: spec.clone(),
            labels: dataset.labels().clone(),
            frame_counts: FrameCounts::of(&features),
            training_frames: set.class_counts(),
            classifier,
        })
    }

    /// Errors unless the stored fingerprint matches the stored settings and,
    /// when given, the caller's expected settings.
    pub fn check(&self, expected: Option<(&ExtractionConfig, &LabelSet)>) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if fingerprint(&self.extraction, &self.labels) != self.fingerprint {
            return Err(Error::Config(
                "model fingerprint does not match its settings".into(),
            ));
        }
        if let Some((extraction, labels)) = expected {
            let wanted = fingerprint(extraction, labels);
            if wanted != self.fingerprint {
                return Err(Error::Config(format!(
                    "model fingerprint {} does not match the configured extraction settings ({wanted})",
                    self.fingerprint
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: Box::new(Error::Json(e)),
        })?;
        model.check(None).map_err(|e| e.in_file(path))?;
        Ok(model)
    }

    pub fn classify_features(&self, features: &SignalFeatures) -> SignalDecision {
        classify_signal(&self.classifier, features, self.spec.apply_eq5)
    }

    pub fn classify(&self, signal: &AudioSignal) -> Result<SignalDecision> {
        Ok(self.classify_features(&SignalFeatures::extract(signal, &self.extraction)?))
    }
}
