use super::{NccfFrame, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchCandidate {
    /// Lag in samples; 0 is the unvoiced hypothesis.
    pub lag: usize,
    pub score: f64,
}

impl PitchCandidate {
    pub fn unvoiced(bias: f64) -> Self {
        Self { lag: 0, score: bias }
    }

    pub fn is_unvoiced(&self) -> bool {
        self.lag == 0
    }
}

/// Local NCCF maxima above the threshold, best first (earliest lag on ties),
/// capped at `max_candidates_per_frame`, followed by the unvoiced hypothesis.
pub fn pick_candidates(frame: &NccfFrame, cfg: &TrackerConfig) -> Vec<PitchCandidate> {
    let mut out = Vec::new();
    if !frame.skipped && !frame.low_energy {
        let v = &frame.values;
        for i in 1..v.len().saturating_sub(1) {
            // strict on the left so a plateau yields only its first lag
            if v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > cfg.nccf_threshold {
                out.push(PitchCandidate {
                    lag: frame.lags[i],
                    score: v[i],
                });
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.lag.cmp(&b.lag)));
        out.truncate(cfg.max_candidates_per_frame);
    }
    out.push(PitchCandidate::unvoiced(cfg.voicing_bias));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: Vec<f64>) -> NccfFrame {
        NccfFrame {
            frame_index: 0,
            lags: (15..15 + values.len()).collect(),
            values,
            energy: 1.0,
            low_energy: false,
            skipped: false,
        }
    }

    #[test]
    fn single_peak() {
        let mut v = vec![0.0; 150];
        v[80 - 15] = 0.95;
        let c = pick_candidates(&frame(v), &TrackerConfig::default());
        assert_eq!(c, vec![PitchCandidate { lag: 80, score: 0.95 }, PitchCandidate::unvoiced(0.45)]);
    }

    #[test]
    fn below_threshold_only_unvoiced() {
        let v: Vec<f64> = (0..150).map(|i| 0.25 * ((i as f64) * 0.3).sin()).collect();
        let c = pick_candidates(&frame(v), &TrackerConfig::default());
        assert_eq!(c, vec![PitchCandidate::unvoiced(0.45)]);
    }

    #[test]
    fn plateau_earliest_lag() {
        let mut v = vec![0.0; 150];
        v[50] = 0.8;
        v[51] = 0.8;
        v[52] = 0.8;
        let c = pick_candidates(&frame(v), &TrackerConfig::default());
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].lag, 15 + 50);
    }

    #[test]
    fn ranking_and_cap() {
        let mut v = vec![0.0; 150];
        v[20] = 0.5;
        v[40] = 0.9;
        v[60] = 0.9;
        v[80] = 0.7;
        let cfg = TrackerConfig {
            max_candidates_per_frame: 3,
            ..Default::default()
        };
        let c = pick_candidates(&frame(v), &cfg);
        let lags: Vec<usize> = c.iter().map(|c| c.lag).collect();
        assert_eq!(lags, vec![55, 75, 95, 0]);
    }

    #[test]
    fn edge_lags_are_not_candidates() {
        let mut v = vec![0.0; 150];
        v[0] = 0.99;
        v[149] = 0.99;
        let c = pick_candidates(&frame(v), &TrackerConfig::default());
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn low_energy_frames_only_unvoiced() {
        let mut f = frame(vec![0.0, 0.9, 0.0]);
        f.low_energy = true;
        assert_eq!(pick_candidates(&f, &TrackerConfig::default()).len(), 1);
    }
}
