//! Linear-phase FIR design and application.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::waveform::Waveform;
use super::window::kaiser_at;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirDesign {
    pub beta: f64,
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate: u32,
}

/// Linear-phase FIR filter with `order + 1` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    design: FirDesign,
}

impl FirFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn design(&self) -> &FirDesign {
        &self.design
    }

    /// Delay in samples, exact for a symmetric filter of even order.
    pub fn group_delay(&self) -> usize {
        self.design.order / 2
    }

    /// Magnitude of the DTFT of the taps at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        dtft_magnitude(&self.taps, freq_hz / self.design.sample_rate as f64)
    }
}

/// `|sum_k h[k] exp(-j 2 pi f k)|` for normalized frequency `f` (cycles/sample).
pub fn dtft_magnitude(taps: &[f64], f: f64) -> f64 {
    let w = 2.0 * PI * f;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &h) in taps.iter().enumerate() {
        let (s, c) = (w * k as f64).sin_cos();
        re += h * c;
        im -= h * s;
    }
    re.hypot(im)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc low-pass with unit DC gain; `order` must be even.
pub fn design_kaiser_lowpass(beta: f64, order: usize, cutoff_hz: f64, sample_rate: u32) -> Result<Vec<f64>> {
    validate(beta, order, cutoff_hz, sample_rate)?;
    let fc = cutoff_hz / sample_rate as f64;
    let mid = order / 2;
    let half = mid as f64;
    let mut taps: Vec<f64> = (0..=order)
        .map(|k| {
            let d = k.abs_diff(mid) as f64;
            2.0 * fc * sinc(2.0 * fc * d) * kaiser_at(d, half, beta)
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= gain;
    }
    Ok(taps)
}

/// Linear-phase Kaiser high-pass by spectral inversion of the windowed-sinc low-pass.
pub fn design_kaiser_highpass(beta: f64, order: usize, cutoff_hz: f64, sample_rate: u32) -> Result<FirFilter> {
    let mut taps = design_kaiser_lowpass(beta, order, cutoff_hz, sample_rate)?;
    for t in &mut taps {
        *t = -*t;
    }
    taps[order / 2] += 1.0;
    Ok(FirFilter {
        taps,
        design: FirDesign {
            beta,
            order,
            cutoff_hz,
            sample_rate,
        },
    })
}

fn validate(beta: f64, order: usize, cutoff_hz: f64, sample_rate: u32) -> Result<()> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("kaiser beta must be >= 0, got {beta}")));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid(format!("filter order must be even and positive, got {order}")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
        )));
    }
    Ok(())
}

const FIR_CHUNK: usize = 2048;

/// Filters `wave` and compensates the group delay: full convolution, drop
/// `group_delay` leading samples, truncate to the input length.
pub fn apply_fir(wave: &Waveform, filt: &FirFilter) -> Waveform {
    let x = wave.samples();
    let h = filt.taps();
    let delay = filt.group_delay();
    let mut out = vec![0.0; x.len()];
    par::for_each_chunk_mut(&mut out, FIR_CHUNK, |ci, chunk| {
        let base = ci * FIR_CHUNK;
        for (o, y) in chunk.iter_mut().enumerate() {
            // y[i] = sum_j h[j] x[i + delay - j]
            let pos = base + o + delay;
            let j_lo = pos.saturating_sub(x.len() - 1);
            let j_hi = pos.min(h.len() - 1);
            let mut acc = 0.0;
            for j in j_lo..=j_hi {
                acc += h[j] * x[pos - j];
            }
            *y = acc;
        }
    });
    Waveform::new(out, wave.sample_rate()).expect("finite filter output")
}
