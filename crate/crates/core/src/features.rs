//! Short-time features: energy, zero-cross rate and center-clipped
//! autocorrelation pitch, plus the periodic and high-energy frame selections.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::audio_io::{normalize, AudioSignal};
use crate::dsp::{
    apply_filter, autocorrelation, center_clip, clipping_level, design_butterworth_lowpass,
    frame_signal,
};
use crate::error::{Error, Result};

/// Parameters of the feature extraction pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Window length in samples.
    pub window_len: usize,
    /// Overlap between consecutive windows in samples.
    pub overlap: usize,
    pub filter_order: usize,
    pub cutoff_hz: f64,
    /// Fraction of `min(max1, max2)` used as the clipping level.
    pub clip_fraction: f64,
    /// A frame is periodic when its autocorrelation peak reaches this fraction
    /// of the clipped frame energy.
    pub periodicity_threshold: f64,
    pub max_pitch_hz: f64,
    /// Median smoothing width in frames (odd).
    pub median_width: usize,
    /// Energy factor of the high-energy selection.
    pub alpha: f64,
    /// Zero-cross rate factor of the high-energy selection.
    pub zeta: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            window_len: 165,
            overlap: 55,
            filter_order: 4,
            cutoff_hz: 4000.0,
            clip_fraction: 0.68,
            periodicity_threshold: 0.3,
            max_pitch_hz: 1000.0,
            median_width: 3,
            alpha: 1.0,
            zeta: 1.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.window_len < 3 {
            return fail(format!(
                "window_len must be at least 3, got {}",
                self.window_len
            ));
        }
        if self.overlap >= self.window_len {
            return fail(format!(
                "overlap ({}) must be smaller than window_len ({})",
                self.overlap, self.window_len
            ));
        }
        if self.filter_order < 1 {
            return fail("filter_order must be at least 1".into());
        }
        if !(self.cutoff_hz > 0.0) {
            return fail("cutoff_hz must be positive".into());
        }
        if !(self.clip_fraction > 0.0 && self.clip_fraction < 1.0) {
            return fail(format!(
                "clip_fraction must lie in (0, 1), got {}",
                self.clip_fraction
            ));
        }
        if !(self.periodicity_threshold > 0.0 && self.periodicity_threshold < 1.0) {
            return fail(format!(
                "periodicity_threshold must lie in (0, 1), got {}",
                self.periodicity_threshold
            ));
        }
        if !(self.max_pitch_hz > 0.0 && self.max_pitch_hz.is_finite()) {
            return fail("max_pitch_hz must be positive and finite".into());
        }
        if self.median_width == 0 || self.median_width.is_multiple_of(2) {
            return fail(format!(
                "median_width must be odd, got {}",
                self.median_width
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite())
            || !(self.zeta > 0.0 && self.zeta.is_finite())
        {
            return fail("alpha and zeta must be positive".into());
        }
        Ok(())
    }

    /// Smallest admissible pitch lag at `sample_rate`.
    pub fn min_lag(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 / self.max_pitch_hz).ceil() as usize
    }
}

/// Energy, zero-cross count and pitch of one frame. A pitch of 0 marks an
/// un-periodic frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub energy: f64,
    pub zcr: f64,
    pub pitch_hz: f64,
}

impl FrameFeatures {
    pub fn vector(&self) -> [f64; 3] {
        [self.energy, self.zcr, self.pitch_hz]
    }

    pub fn is_periodic(&self) -> bool {
        self.pitch_hz > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackFrame {
    /// Position of the frame in the full, unselected track.
    pub index: usize,
    /// First sample of the frame in the source signal.
    pub start: usize,
    pub features: FrameFeatures,
}

/// Per-frame features of one signal, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    pub sample_rate: u32,
    pub frames: Vec<TrackFrame>,
}

impl FeatureTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.frames.iter().map(|f| f.features.vector())
    }

    fn subset(&self, keep: impl Fn(&TrackFrame) -> bool) -> FeatureTrack {
        FeatureTrack {
            sample_rate: self.sample_rate,
            frames: self.frames.iter().filter(|f| keep(f)).copied().collect(),
        }
    }
}

/// Sum of squared amplitudes over the frame.
pub fn short_time_energy(samples: &[f64]) -> f64 {
    samples.iter().map(|x| x * x).sum()
}

/// Number of sign changes between adjacent samples, with `sgn(0) = +1`.
pub fn zero_cross_rate(samples: &[f64]) -> Result<f64> {
    zero_cross_rate_after(None, samples)
}

/// Zero-cross count of a window that also sees the sample just before it, so
/// an `N`-sample window spans `N` sign comparisons. Without `previous` only the
/// `N - 1` pairs inside the window count.
pub fn zero_cross_rate_after(previous: Option<f64>, samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "zero-cross rate needs at least 2 samples".into(),
        ));
    }
    let positive = |x: f64| x >= 0.0;
    let inside = samples
        .windows(2)
        .filter(|w| positive(w[0]) != positive(w[1]))
        .count();
    let straddling = previous.is_some_and(|p| positive(p) != positive(samples[0]));
    Ok((inside + usize::from(straddling)) as f64)
}

/// Pitch of a frame from the autocorrelation of its center-clipped samples,
/// or 0 when the frame is not periodic.
pub fn estimate_pitch(samples: &[f64], sample_rate: u32, config: &ExtractionConfig) -> Result<f64> {
    let min_lag = config.min_lag(sample_rate);
    if samples.len() < min_lag + 1 {
        return Err(Error::InvalidArgument(format!(
            "frame of {} samples is too short for the minimum pitch lag {min_lag}",
            samples.len()
        )));
    }
    let max_lag = samples.len() - 1;
    let level = clipping_level(samples, config.clip_fraction)?;
    let clipped = center_clip(samples, level)?;
    let r = autocorrelation(&clipped.samples, max_lag)?;
    if r[0] <= 0.0 {
        return Ok(0.0);
    }
    let (best_lag, best) =
        r.iter()
            .enumerate()
            .skip(min_lag)
            .fold((0, f64::NEG_INFINITY), |(bl, bv), (lag, &v)| {
                if v > bv {
                    (lag, v)
                } else {
                    (bl, bv)
                }
            });
    if best < config.periodicity_threshold * r[0] {
        return Ok(0.0);
    }
    Ok(sample_rate as f64 / best_lag as f64)
}

/// Running median over `width` frames. Edge windows are truncated and even
/// counts take the lower median, so every output is an input element.
pub fn median_smooth(values: &[f64], width: usize) -> Result<Vec<f64>> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "median width must be odd, got {width}"
        )));
    }
    let half = width / 2;
    let mut window = Vec::with_capacity(width);
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            window.clear();
            window.extend_from_slice(&values[lo..hi]);
            window.sort_by(f64::total_cmp);
            window[(window.len() - 1) / 2]
        })
        .collect())
}

/// Full per-signal pipeline: normalize, low-pass filter, frame, per-frame
/// features, then median-smooth the pitch sequence.
pub fn extract_track(signal: &AudioSignal, config: &ExtractionConfig) -> Result<FeatureTrack> {
    config.validate()?;
    let rate = signal.sample_rate();
    let filter = design_butterworth_lowpass(config.filter_order, config.cutoff_hz, rate as f64)?;
    let filtered = apply_filter(&filter, &normalize(signal));
    let frames = frame_signal(&filtered, config.window_len, config.overlap)?;

    let mut raw = Vec::with_capacity(frames.len());
    for frame in &frames {
        raw.push(FrameFeatures {
            energy: short_time_energy(frame.samples),
            zcr: zero_cross_rate_after(
                frame.start.checked_sub(1).map(|i| filtered.samples()[i]),
                frame.samples,
            )?,
            pitch_hz: estimate_pitch(frame.samples, rate, config)?,
        });
    }
    let pitches: Vec<f64> = raw.iter().map(|f| f.pitch_hz).collect();
    let smoothed = median_smooth(&pitches, config.median_width)?;

    Ok(FeatureTrack {
        sample_rate: rate,
        frames: frames
            .iter()
            .zip(raw)
            .zip(smoothed)
            .enumerate()
            .map(|(index, ((frame, f), pitch_hz))| TrackFrame {
                index,
                start: frame.start,
                features: FrameFeatures { pitch_hz, ..f },
            })
            .collect(),
    })
}

/// Frames with nonzero pitch.
pub fn select_periodic(track: &FeatureTrack) -> FeatureTrack {
    track.subset(|f| f.features.is_periodic())
}

/// Frames whose energy exceeds `alpha` times the mean energy and whose
/// zero-cross rate is below `zeta` times the mean rate, with means taken over
/// `track` itself.
pub fn select_high_energy(track: &FeatureTrack, alpha: f64, zeta: f64) -> FeatureTrack {
    if track.is_empty() {
        return track.clone();
    }
    let n = track.len() as f64;
    let mean_energy = track.frames.iter().map(|f| f.features.energy).sum::<f64>() / n;
    let mean_zcr = track.frames.iter().map(|f| f.features.zcr).sum::<f64>() / n;
    track.subset(|f| f.features.energy > alpha * mean_energy && f.features.zcr < zeta * mean_zcr)
}

/// A signal's full track with both selection stages applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFeatures {
    pub track: FeatureTrack,
    pub periodic: FeatureTrack,
    pub high_energy: FeatureTrack,
}

impl SignalFeatures {
    pub fn extract(signal: &AudioSignal, config: &ExtractionConfig) -> Result<Self> {
        Ok(Self::from_track(extract_track(signal, config)?, config))
    }

    pub fn from_track(track: FeatureTrack, config: &ExtractionConfig) -> Self {
        let periodic = select_periodic(&track);
        let high_energy = select_high_energy(&periodic, config.alpha, config.zeta);
        Self {
            track,
            periodic,
            high_energy,
        }
    }
}

pub const FEATURE_CSV_HEADER: [&str; 8] = [
    "signal",
    "frame_index",
    "start_sample",
    "energy",
    "zcr",
    "pitch_hz",
    "selected_periodic",
    "selected_high_energy",
];

/// Writes one row per frame for each named signal, in the given order.
pub fn write_feature_csv<W: Write>(out: W, signals: &[(String, SignalFeatures)]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(FEATURE_CSV_HEADER)?;
    for (name, sf) in signals {
        let mut periodic = sf.periodic.frames.iter().map(|f| f.index).peekable();
        let mut high = sf.high_energy.frames.iter().map(|f| f.index).peekable();
        for frame in &sf.track.frames {
            let in_periodic = periodic.next_if_eq(&frame.index).is_some();
            let in_high = high.next_if_eq(&frame.index).is_some();
            writer.write_record([
                name.clone(),
                frame.index.to_string(),
                frame.start.to_string(),
                frame.features.energy.to_string(),
                frame.features.zcr.to_string(),
                frame.features.pitch_hz.to_string(),
                u8::from(in_periodic).to_string(),
                u8::from(in_high).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
