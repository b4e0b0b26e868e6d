//! Rational-ratio windowed-sinc resampler.

use super::waveform::Waveform;
use super::window::kaiser_at;
use crate::error::{Error, Result};

/// Zero crossings of the interpolation kernel on each side of its centre.
const HALF_ZEROS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two sample rates.
const CUTOFF_FRACTION: f64 = 0.45;
/// Above this many phases the table is not precomputed.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct Kernel {
    /// cutoff in cycles per source sample
    fc: f64,
    /// half-width in source samples
    half: f64,
    up: u64,
}

impl Kernel {
    fn value(&self, d: f64) -> f64 {
        let x = 2.0 * self.fc * d;
        let s = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        2.0 * self.fc * s * kaiser_at(d, self.half, KAISER_BETA)
    }

    /// Taps for fractional offset `phase / up`, covering source indices
    /// `base - reach + 1 ..= base + reach`, normalised to unit DC gain.
    fn taps(&self, phase: u64, reach: i64) -> Vec<f64> {
        let frac = phase as f64 / self.up as f64;
        let mut taps: Vec<f64> = (-reach + 1..=reach)
            .map(|j| self.value(j as f64 - frac))
            .collect();
        let sum: f64 = taps.iter().sum();
        if sum != 0.0 {
            for t in &mut taps {
                *t /= sum;
            }
        }
        taps
    }
}

/// Resamples to `target_rate`, low-pass filtering when downsampling.
pub fn resample(wave: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    let src = wave.sample_rate() as u64;
    let dst = target_rate as u64;
    if src == dst {
        return Ok(wave.clone());
    }
    let g = gcd(src, dst);
    let up = dst / g;
    let down = src / g;
    let x = wave.samples();
    let out_len = ((x.len() as u64 * dst + src / 2) / src) as usize;

    let fc = CUTOFF_FRACTION * src.min(dst) as f64 / src as f64;
    let half = HALF_ZEROS / (2.0 * fc);
    let kernel = Kernel { fc, half, up };
    let reach = half.ceil() as i64;

    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|p| kernel.taps(p, reach)).collect());

    let n_in = x.len() as i64;
    let out = crate::par::map_range(out_len, |n| {
        let pos = n as u64 * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let owned;
        let taps: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                owned = kernel.taps(phase, reach);
                &owned
            }
        };
        let mut acc = 0.0;
        for (j, &h) in (-reach + 1..=reach).zip(taps) {
            let i = base + j;
            if i >= 0 && i < n_in {
                acc += h * x[i as usize];
            }
        }
        acc
    });
    Waveform::new(out, target_rate)
}
