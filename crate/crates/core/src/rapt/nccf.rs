use crate::dsp::{ms_to_samples, FrameConfig, Waveform};
use crate::error::Result;
use crate::par;

use super::TrackerConfig;

/// Normalized cross-correlation of one analysis frame over the lag range.
#[derive(Debug, Clone, PartialEq)]
pub struct NccfFrame {
    pub frame_index: usize,
    /// Strictly increasing lags in samples. The first and last lag are guard
    /// lags: they only serve as neighbours when locating peaks.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Energy of the reference window.
    pub energy: f64,
    /// Energy below the silence floor (or exactly zero).
    pub low_energy: bool,
    /// The signal is shorter than one correlation window plus the maximum lag;
    /// the frame carries only the unvoiced hypothesis.
    pub skipped: bool,
}

impl NccfFrame {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags.iter().position(|&l| l == lag).map(|i| self.values[i])
    }
}

/// `phi(t, k) = sum s(i) s(i+k) / sqrt(sum s(i)^2 * sum s(i+k)^2)` over a
/// correlation window starting at `t * hop`. Windows that would run past
/// the end are moved back to end at the last sample.
pub fn nccf(wave: &Waveform, cfg: &TrackerConfig, frame_cfg: &FrameConfig) -> Result<Vec<NccfFrame>> {
    let sr = wave.sample_rate();
    cfg.validate(sr)?;
    let x = wave.samples();
    let n_frames = frame_cfg.n_frames(x.len());
    let win = ms_to_samples(cfg.corr_window_ms, sr).max(1);
    let (k_lo, k_hi) = cfg.lag_range(sr);
    let first = k_lo.saturating_sub(1).max(1);
    let last = k_hi + 1;
    let lags: Vec<usize> = (first..=last).collect();
    let span = win + last;

    let mut frames = par::map_range(n_frames, |t| {
        if x.len() < span {
            return NccfFrame {
                frame_index: t,
                lags: lags.clone(),
                values: vec![0.0; lags.len()],
                energy: 0.0,
                low_energy: true,
                skipped: true,
            };
        }
        let start = (t * frame_cfg.hop).min(x.len() - span);
        let r = &x[start..start + win];
        let e0: f64 = r.iter().map(|v| v * v).sum();
        let mut values = Vec::with_capacity(lags.len());
        for &k in &lags {
            // a running energy update cancels badly when the lagged window
            // slides into silence, so both sums are taken directly
            let s = &x[start + k..start + k + win];
            let (cross, ek) = r.iter().zip(s).fold((0.0, 0.0), |(c, e), (a, b)| (c + a * b, e + b * b));
            let denom = (e0 * ek).sqrt();
            values.push(if denom > 0.0 { cross / denom } else { 0.0 });
        }
        NccfFrame {
            frame_index: t,
            lags: lags.clone(),
            values,
            energy: e0,
            low_energy: e0 == 0.0,
            skipped: false,
        }
    });

    let max_energy = frames.iter().map(|f| f.energy).fold(0.0, f64::max);
    let floor = max_energy * 10f64.powf(cfg.silence_db / 10.0);
    for f in &mut frames {
        if f.energy <= floor {
            f.low_energy = true;
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pulse_train(period: usize, len: usize) -> Waveform {
        Waveform::new((0..len).map(|i| if i % period == 0 { 1.0 } else { 0.0 }).collect(), 8000).unwrap()
    }

    #[test]
    fn pulse_train_correlates_at_its_period() {
        let w = pulse_train(80, 8000);
        let frames = nccf(&w, &TrackerConfig::default(), &FrameConfig::for_rate(8000)).unwrap();
        assert_eq!(frames.len(), 100);
        for f in &frames[1..frames.len() - 1] {
            assert!(f.value_at(80).unwrap() >= 0.99);
        }
    }

    #[test]
    fn lags_strictly_increasing_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Waveform::new((0..4000).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap();
        let frames = nccf(&w, &TrackerConfig::default(), &FrameConfig::for_rate(8000)).unwrap();
        for f in &frames {
            assert!(f.lags.windows(2).all(|p| p[0] < p[1]));
            assert!(f.values.iter().all(|v| v.abs() <= 1.0 + 1e-9));
        }
    }

    #[test]
    fn white_noise_is_weakly_correlated() {
        let mut hits = 0;
        let mut total = 0;
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = Waveform::new((0..8000).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap();
            let frames = nccf(&w, &TrackerConfig::default(), &FrameConfig::for_rate(8000)).unwrap();
            total += frames.len();
            hits += frames.iter().filter(|f| f.max_value() < 0.6).count();
        }
        assert!(hits as f64 >= 0.9 * total as f64);
    }

    #[test]
    fn zero_signal_gives_zero_values() {
        let w = Waveform::zeros(2000, 8000).unwrap();
        let frames = nccf(&w, &TrackerConfig::default(), &FrameConfig::for_rate(8000)).unwrap();
        for f in &frames {
            assert!(f.values.iter().all(|&v| v == 0.0));
            assert!(f.low_energy);
        }
    }

    #[test]
    fn short_signal_frames_are_skipped() {
        let w = pulse_train(80, 200);
        let frames = nccf(&w, &TrackerConfig::default(), &FrameConfig::for_rate(8000)).unwrap();
        assert_eq!(frames.len(), 3);
        assert!(frames.iter().all(|f| f.skipped));
    }

    #[test]
    fn amplitude_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.07).sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let a = Waveform::new(s.clone(), 8000).unwrap();
        let b = Waveform::new(s.iter().map(|v| 3.7 * v).collect(), 8000).unwrap();
        let cfg = TrackerConfig::default();
        let fc = FrameConfig::for_rate(8000);
        let fa = nccf(&a, &cfg, &fc).unwrap();
        let fb = nccf(&b, &cfg, &fc).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            for (u, v) in x.values.iter().zip(&y.values) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
