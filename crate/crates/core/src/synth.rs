//! Synthetic harmonic test corpus.
//!
//! Each class is a harmonic series `sum_h decay^(h-1) sin(2π h f0 t + φ_h)` with
//! per-signal random phases plus white Gaussian noise at a chosen SNR. An
//! optional background mode alternates tone segments with segments of pure
//! background noise.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio_io::{
    normalize, write_manifest, write_wav_16, AudioSignal, DatasetEntry, LabelSet, LabeledDataset,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTone {
    pub label: String,
    pub fundamental_hz: f64,
    pub harmonics: usize,
    pub decay: f64,
    pub amplitude: f64,
    /// Tone-to-noise ratio; `inf` disables noise.
    pub snr_db: f64,
    pub signals: usize,
    pub duration_s: f64,
}

/// Alternating tone/background segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub segment_s: f64,
    /// Tone power over background-noise power.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Background>,
    pub classes: Vec<ClassTone>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let names = LabelSet::default();
        let classes = names
            .names()
            .iter()
            .zip([80.0, 150.0, 300.0, 500.0])
            .map(|(label, f0)| ClassTone {
                label: label.clone(),
                fundamental_hz: f0,
                harmonics: 3,
                decay: 0.7,
                amplitude: 1.0,
                snr_db: 10.0,
                signals: 40,
                duration_s: 2.0,
            })
            .collect();
        Self {
            seed: 42,
            sample_rate: 11025,
            background: None,
            classes,
        }
    }
}

impl SynthSpec {
    /// Validates against the pitch cap and analysis window of the extractor.
    pub fn validate(&self, max_pitch_hz: f64, window_len: usize) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("synth spec has no classes".into()));
        }
        LabelSet::new(self.classes.iter().map(|c| c.label.clone()))?;
        let min_duration = 2.0 * window_len as f64 / self.sample_rate as f64;
        for c in &self.classes {
            let fail = |m: String| Err(Error::Config(format!("class `{}`: {m}", c.label)));
            if !(c.fundamental_hz > 0.0 && c.fundamental_hz <= max_pitch_hz) {
                return fail(format!(
                    "fundamental {} Hz must lie in (0, {max_pitch_hz}]",
                    c.fundamental_hz
                ));
            }
            if c.harmonics == 0 {
                return fail("needs at least one harmonic".into());
            }
            if c.snr_db.is_nan() || c.snr_db == f64::NEG_INFINITY {
                return fail("snr_db must be finite or +inf".into());
            }
            if !(c.duration_s >= min_duration) {
                return fail(format!(
                    "duration must be at least {min_duration:.4} s (two windows)"
                ));
            }
            if !(c.amplitude > 0.0 && c.amplitude.is_finite()) || !c.decay.is_finite() {
                return fail("amplitude must be positive and decay finite".into());
            }
        }
        if let Some(bg) = &self.background {
            if !(bg.segment_s > 0.0) || !bg.snr_db.is_finite() {
                return Err(Error::Config(
                    "background segment_s must be positive and snr_db finite".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Result<LabelSet> {
        LabelSet::new(self.classes.iter().map(|c| c.label.clone()))
    }
}

fn noise_sigma(power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        (power / 10f64.powf(snr_db / 10.0)).sqrt()
    }
}

/// Synthesizes one signal of class `tone`, consuming randomness from `rng`.
pub fn synthesize(
    tone: &ClassTone,
    sample_rate: u32,
    background: Option<&Background>,
    rng: &mut impl Rng,
) -> AudioSignal {
    let n = (tone.duration_s * sample_rate as f64).round() as usize;
    let partials: Vec<(f64, f64, f64)> = (1..=tone.harmonics)
        .map(|h| {
            (
                h as f64 * tone.fundamental_hz,
                tone.amplitude * tone.decay.powi(h as i32 - 1),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    // Mean power of the harmonic sum.
    let power: f64 = partials.iter().map(|(_, a, _)| a * a / 2.0).sum();
    let tone_noise = Normal::new(0.0, noise_sigma(power, tone.snr_db)).expect("finite sigma");
    let bg = background.map(|b| {
        (
            ((b.segment_s * sample_rate as f64).round() as usize).max(1),
            Normal::new(0.0, noise_sigma(power, b.snr_db)).expect("finite sigma"),
        )
    });

    let samples: Vec<f64> = (0..n)
        .map(|i| match &bg {
            Some((segment, noise)) if (i / segment) % 2 == 1 => noise.sample(rng),
            _ => {
                let t = i as f64 / sample_rate as f64;
                partials
                    .iter()
                    .map(|(f, a, phase)| a * (2.0 * PI * f * t + phase).sin())
                    .sum::<f64>()
                    + tone_noise.sample(rng)
            }
        })
        .collect();
    normalize(&AudioSignal::new(samples, sample_rate).expect("synthesized samples are finite"))
}

/// Generates the corpus in memory: `(file name, class index, signal)` in
/// class-then-signal order.
pub fn generate(spec: &SynthSpec) -> Result<Vec<(String, usize, AudioSignal)>> {
    spec.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    for (class, tone) in spec.classes.iter().enumerate() {
        for i in 0..tone.signals {
            let signal = synthesize(tone, spec.sample_rate, spec.background.as_ref(), &mut rng);
            out.push((format!("{}_{i:03}.wav", tone.label), class, signal));
        }
    }
    Ok(out)
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes every signal as 16-bit WAV plus `manifest.csv` into `out_dir`.
pub fn write_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<LabeledDataset> {
    let labels = spec.labels()?;
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for (name, class, signal) in generate(spec)? {
        let path = out_dir.join(&name);
        write_wav_16(&path, &signal)?;
        entries.push(DatasetEntry {
            path,
            label: crate::audio_io::ClassId(class),
        });
    }
    let dataset = LabeledDataset::new(labels, entries)?;
    write_manifest(out_dir.join(MANIFEST_NAME), &dataset)?;
    Ok(dataset)
}
