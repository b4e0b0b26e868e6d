//! Framing, STFT and the stacked real/imaginary feature.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::waveform::Waveform;
use super::window::hamming;
use crate::error::{Error, Result};
use crate::par;

pub const WINDOW_MS: f64 = 128.0;
pub const HOP_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window_kind: WindowKind,
}

impl FrameConfig {
    pub fn new(window_len: usize, hop: usize, fft_size: usize) -> Result<Self> {
        if hop == 0 || hop > window_len || window_len > fft_size {
            return Err(Error::invalid(format!(
                "frame config needs 0 < hop <= window_len <= fft_size, got {hop}/{window_len}/{fft_size}"
            )));
        }
        Ok(Self {
            window_len,
            hop,
            fft_size,
            window_kind: WindowKind::Hamming,
        })
    }

    /// 128 ms Hamming window, 10 ms hop, FFT size rounded up to a power of two.
    pub fn for_rate(sample_rate: u32) -> Self {
        let window_len = ms_to_samples(WINDOW_MS, sample_rate).max(1);
        let hop = ms_to_samples(HOP_MS, sample_rate).clamp(1, window_len);
        Self {
            window_len,
            hop,
            fft_size: window_len.next_power_of_two(),
            window_kind: WindowKind::Hamming,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames covering a signal of `len` samples: `ceil(len / hop)`.
    pub fn n_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Frame count at the 10 ms hop for a signal of `len` samples.
pub fn frame_count(len: usize, sample_rate: u32) -> usize {
    FrameConfig::for_rate(sample_rate).n_frames(len)
}

/// One-sided complex STFT, row-major `n_frames x n_bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    values: Vec<Complex64>,
    n_frames: usize,
    frame_config: FrameConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn from_values(
        values: Vec<Complex64>,
        n_frames: usize,
        frame_config: FrameConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        if values.len() != n_frames * frame_config.n_bins() {
            return Err(Error::shape(format!(
                "{} values for {n_frames} frames x {} bins",
                values.len(),
                frame_config.n_bins()
            )));
        }
        Ok(Self {
            values,
            n_frames,
            frame_config,
            sample_rate,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.frame_config.n_bins()
    }

    pub fn frame_config(&self) -> &FrameConfig {
        &self.frame_config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let f = self.n_bins();
        &self.values[t * f..(t + 1) * f]
    }
}

/// Real parts in columns `[0, F)`, imaginary parts in `[F, 2F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    values: Vec<f64>,
    n_frames: usize,
    n_bins: usize,
}

impl FeatureTensor {
    /// Row-major `[T, 2F]` values.
    pub fn new(values: Vec<f64>, n_frames: usize, n_bins: usize) -> Result<Self> {
        if values.len() != n_frames * 2 * n_bins {
            return Err(Error::invalid(format!(
                "feature tensor needs {} values for {n_frames} frames of {n_bins} bins, got {}",
                n_frames * 2 * n_bins,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature values".into()));
        }
        Ok(Self { values, n_frames, n_bins })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn width(&self) -> usize {
        2 * self.n_bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.values[t * w..(t + 1) * w]
    }

    /// First `n` frames (all of them when `n >= n_frames`).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_frames);
        Self {
            values: self.values[..n * self.width()].to_vec(),
            n_frames: n,
            n_bins: self.n_bins,
        }
    }

    /// Inverse of the stacking: rebuilds the complex values.
    pub fn to_complex(&self) -> Vec<Complex64> {
        let f = self.n_bins;
        (0..self.n_frames)
            .flat_map(|t| {
                let row = self.row(t);
                (0..f).map(move |k| Complex64::new(row[k], row[f + k]))
            })
            .collect()
    }

    /// Channel-major `[2, T, F]` layout: plane 0 real, plane 1 imaginary.
    pub fn to_channel_planes(&self) -> Vec<f64> {
        let (t_n, f) = (self.n_frames, self.n_bins);
        let mut out = vec![0.0; 2 * t_n * f];
        for t in 0..t_n {
            let row = self.row(t);
            out[t * f..(t + 1) * f].copy_from_slice(&row[..f]);
            out[t_n * f + t * f..t_n * f + (t + 1) * f].copy_from_slice(&row[f..]);
        }
        out
    }
}

/// Left-aligned Hamming-windowed STFT; frame `t` covers samples
/// `[t*hop, t*hop + window_len)` with zeros past the end of the signal.
pub fn stft(wave: &Waveform, cfg: &FrameConfig) -> Result<ComplexSpectrogram> {
    if wave.is_empty() {
        return Err(Error::invalid("cannot take the STFT of an empty signal"));
    }
    let x = wave.samples();
    let n_frames = cfg.n_frames(x.len());
    let n_bins = cfg.n_bins();
    let window = hamming(cfg.window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);

    let mut values = vec![Complex64::new(0.0, 0.0); n_frames * n_bins];
    par::for_each_chunk_mut(&mut values, n_bins, |t, out| {
        let start = t * cfg.hop;
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        for (k, w) in window.iter().enumerate() {
            if let Some(&s) = x.get(start + k) {
                buf[k].re = s * w;
            }
        }
        fft.process(&mut buf);
        out.copy_from_slice(&buf[..n_bins]);
    });
    ComplexSpectrogram::from_values(values, n_frames, *cfg, wave.sample_rate())
}

pub fn feature_from_spectrogram(spec: &ComplexSpectrogram) -> FeatureTensor {
    let f = spec.n_bins();
    let mut values = Vec::with_capacity(spec.n_frames() * 2 * f);
    for t in 0..spec.n_frames() {
        let frame = spec.frame(t);
        values.extend(frame.iter().map(|c| c.re));
        values.extend(frame.iter().map(|c| c.im));
    }
    FeatureTensor {
        values,
        n_frames: spec.n_frames(),
        n_bins: f,
    }
}

/// Peak normalisation, STFT and feature stacking for one utterance.
pub fn extract_features(wave: &Waveform, cfg: &FrameConfig) -> Result<FeatureTensor> {
    let spec = stft(&wave.peak_normalized(), cfg)?;
    Ok(feature_from_spectrogram(&spec))
}
