//! Numeric kernels: Butterworth low-pass design and filtering, framing,
//! center clipping and short-time autocorrelation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioSignal;
use crate::error::{Error, Result};

/// Transfer function `B(z)/A(z)` of a digital IIR filter with `a[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterCoefficients {
    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        let eval = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z_inv + ci)
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn gain(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }
}

/// Designs an `order`-pole Butterworth low-pass filter by the bilinear
/// transform with the cutoff prewarped, so the gain at `cutoff_hz` is exactly
/// `1/sqrt(2)` and the DC gain is 1.
pub fn design_butterworth_lowpass(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<FilterCoefficients> {
    if order < 1 {
        return Err(Error::InvalidArgument(
            "filter order must be at least 1".into(),
        ));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::InvalidArgument(
            "sample rate must be positive".into(),
        ));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({} Hz)",
            sample_rate_hz / 2.0
        )));
    }

    let two_fs = 2.0 * sample_rate_hz;
    let warped = two_fs * (PI * cutoff_hz / sample_rate_hz).tan();
    let n = order as f64;
    let poles: Vec<Complex64> = (1..=order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
            let s = Complex64::from_polar(warped, theta);
            (two_fs + s) / (two_fs - s)
        })
        .collect();

    // Expand prod (1 - p z^-1); conjugate pairs make the result real.
    let mut a = vec![Complex64::new(1.0, 0.0)];
    for p in &poles {
        let mut next = vec![Complex64::new(0.0, 0.0); a.len() + 1];
        for (i, c) in a.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * p;
        }
        a = next;
    }
    let a: Vec<f64> = a.into_iter().map(|c| c.re).collect();

    // All zeros at z = -1: binomial numerator, scaled for unity DC gain.
    let mut b = vec![1.0f64];
    for _ in 0..order {
        let mut next = vec![0.0; b.len() + 1];
        for (i, c) in b.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c;
        }
        b = next;
    }
    let scale = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    b.iter_mut().for_each(|c| *c *= scale);

    Ok(FilterCoefficients {
        b,
        a,
        order,
        cutoff_hz,
        sample_rate_hz,
    })
}

/// Runs the causal difference equation (transposed direct form II) from a
/// zero initial state.
pub fn apply_filter(coeffs: &FilterCoefficients, signal: &AudioSignal) -> AudioSignal {
    let samples = filter_samples(coeffs, signal.samples());
    AudioSignal::new(samples, signal.sample_rate())
        .expect("filtering a valid signal with a stable filter yields a valid signal")
}

pub fn filter_samples(coeffs: &FilterCoefficients, input: &[f64]) -> Vec<f64> {
    let order = coeffs.b.len().max(coeffs.a.len()) - 1;
    let b = |i: usize| coeffs.b.get(i).copied().unwrap_or(0.0);
    let a = |i: usize| coeffs.a.get(i).copied().unwrap_or(0.0);
    let mut state = vec![0.0; order + 1];
    input
        .iter()
        .map(|&x| {
            let y = b(0) * x + state[0];
            for i in 1..=order {
                state[i - 1] = b(i) * x - a(i) * y + state[i];
            }
            y
        })
        .collect()
}

/// A rectangular analysis window over a source signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<'a> {
    pub samples: &'a [f64],
    pub start: usize,
}

impl Frame<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Splits `samples` into windows of `window_len` advancing by
/// `window_len - overlap`. A trailing remainder shorter than a window is
/// dropped.
pub fn frame_samples(samples: &[f64], window_len: usize, overlap: usize) -> Result<Vec<Frame<'_>>> {
    if window_len < 2 {
        return Err(Error::InvalidArgument(
            "window length must be at least 2".into(),
        ));
    }
    if overlap >= window_len {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} must be smaller than the window length {window_len}"
        )));
    }
    if samples.len() < window_len {
        return Err(Error::Data(format!(
            "signal of {} samples is shorter than one {window_len}-sample window",
            samples.len()
        )));
    }
    let hop = window_len - overlap;
    let count = (samples.len() - window_len) / hop + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            Frame {
                samples: &samples[start..start + window_len],
                start,
            }
        })
        .collect())
}

pub fn frame_signal(
    signal: &AudioSignal,
    window_len: usize,
    overlap: usize,
) -> Result<Vec<Frame<'_>>> {
    frame_samples(signal.samples(), window_len, overlap)
}

/// `fraction * min(max1, max2)` where `max1`/`max2` are the peak magnitudes
/// over the first and last `floor(N/3)` samples.
pub fn clipping_level(samples: &[f64], fraction: f64) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "clipping level needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let third = samples.len() / 3;
    let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max1 = peak(&samples[..third]);
    let max2 = peak(&samples[samples.len() - third..]);
    Ok(fraction * max1.min(max2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClippedFrame {
    pub samples: Vec<f64>,
    pub level: f64,
}

impl ClippedFrame {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// Symmetric center clipper: magnitudes at or below `level` become zero, the
/// rest move toward zero by `level`.
pub fn center_clip(samples: &[f64], level: f64) -> Result<ClippedFrame> {
    if !(level >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clipping level must be non-negative, got {level}"
        )));
    }
    let samples = samples
        .iter()
        .map(|&x| {
            if x > level {
                x - level
            } else if x < -level {
                x + level
            } else {
                0.0
            }
        })
        .collect();
    Ok(ClippedFrame { samples, level })
}

/// Short-time autocorrelation `r[t] = sum_m s(m) s(m+t)` for `t` in
/// `0..=max_lag`, treating samples outside the frame as zero.
pub fn autocorrelation(samples: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= samples.len() {
        return Err(Error::InvalidArgument(format!(
            "max lag {max_lag} must be below the frame length {}",
            samples.len()
        )));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            samples[..samples.len() - lag]
                .iter()
                .zip(&samples[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}
