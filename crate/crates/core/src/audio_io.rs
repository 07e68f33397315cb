//! Audio and dataset ingestion.
//!
//! Recordings are mono linear-PCM (or IEEE float) WAV files. Integer codes are
//! scaled by `2^(bits-1)` so the most negative code maps to `-1.0`. Datasets are
//! described by a CSV manifest with a `path,label` header.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mono sampled signal `x(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Scales the signal by `1 / max|x|` so that it spans `[-1, 1]`.
///
/// An all-zero signal is returned unchanged.
pub fn normalize(signal: &AudioSignal) -> AudioSignal {
    let peak = signal
        .samples
        .iter()
        .fold(0.0f64, |acc, s| acc.max(s.abs()));
    if peak == 0.0 {
        return signal.clone();
    }
    let samples = signal
        .samples
        .iter()
        .map(|s| {
            // Exact division keeps the peak at exactly ±1.
            if s.abs() == peak {
                s.signum()
            } else {
                s / peak
            }
        })
        .collect();
    AudioSignal {
        samples,
        sample_rate: signal.sample_rate,
    }
}

/// Reads a mono WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => wav_err(io.to_string()),
        other => wav_err(format!("not a readable WAV file: {other}")),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(format!(
            "expected a mono recording, found {} channels",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<Result<_, _>>()
                .map_err(|e| wav_err(e.to_string()))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_err(e.to_string()))?,
        (format, bits) => {
            return Err(wav_err(format!(
                "unsupported encoding: {bits}-bit {format:?}"
            )))
        }
    };
    AudioSignal::new(samples, spec.sample_rate).map_err(|e| wav_err(e.to_string()))
}

/// Writes a signal as 16-bit mono PCM, clamping to the representable range.
pub fn write_wav_16(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer =
        hound::WavWriter::new(BufWriter::new(File::create(path)?), spec).map_err(wav_err)?;
    for &s in &signal.samples {
        let code = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

/// Index of a class within a [`LabelSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, duplicate-free class names. Order fixes tie-breaking and matrix axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Config("label set is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(Error::Config("label names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate label `{name}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name).map(ClassId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> {
        (0..self.names.len()).map(ClassId)
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        Self {
            names: ["bus", "car", "motor", "truck"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names.join(", "))
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelSet::new(names)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: ClassId,
}

/// Recordings paired with class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    labels: LabelSet,
    entries: Vec<DatasetEntry>,
}

impl LabeledDataset {
    pub fn new(labels: LabelSet, entries: Vec<DatasetEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for entry in &entries {
            if entry.label.0 >= labels.len() {
                return Err(Error::InvalidArgument(format!(
                    "label index {} outside label set {labels}",
                    entry.label.0
                )));
            }
            if !seen.insert(entry.path.as_path()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate path {}",
                    entry.path.display()
                )));
            }
        }
        Ok(Self { labels, entries })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries per class, in label-set order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for e in &self.entries {
            counts[e.label.0] += 1;
        }
        counts
    }

    pub fn load_signal(&self, index: usize) -> Result<AudioSignal> {
        load_wav(&self.entries[index].path)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestRow {
    path: String,
    label: String,
}

/// Reads a `path,label` CSV manifest. Relative paths resolve against the
/// manifest's directory; lines starting with `#` are ignored.
pub fn load_manifest(path: impl AsRef<Path>, labels: &LabelSet) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let manifest_err = |line: u64, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(manifest_err(1, "expected header `path,label`".to_string()));
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ManifestRow = record.deserialize(Some(&headers))?;
        let label = labels.id(&row.label).ok_or_else(|| {
            manifest_err(
                line,
                format!("unknown label `{}`; allowed labels are {labels}", row.label),
            )
        })?;
        let entry_path = base.join(&row.path);
        if !seen.insert(entry_path.clone()) {
            return Err(manifest_err(line, format!("duplicate path `{}`", row.path)));
        }
        entries.push(DatasetEntry {
            path: entry_path,
            label,
        });
    }
    if entries.is_empty() {
        return Err(manifest_err(1, "manifest has no entries".to_string()));
    }
    LabeledDataset::new(labels.clone(), entries)
}

/// Writes a manifest readable by [`load_manifest`]. Entry paths under the
/// manifest's directory are written relative to it.
pub fn write_manifest(path: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut writer = csv::Writer::from_path(path)?;
    for entry in &dataset.entries {
        let rel = if base.as_os_str().is_empty() {
            entry.path.as_path()
        } else {
            entry.path.strip_prefix(base).unwrap_or(&entry.path)
        };
        writer.serialize(ManifestRow {
            path: rel.to_string_lossy().into_owned(),
            label: dataset.labels.name(entry.label).to_string(),
        })?;
    }
    writer.flush()?;
    Ok(())
}
