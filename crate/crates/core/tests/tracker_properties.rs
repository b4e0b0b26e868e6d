use proptest::prelude::*;
use voicing_core::dsp::Waveform;
use voicing_core::rapt::{
    local_cost, nccf, tracker_frames, track_voicing, transition_cost, viterbi_path, PitchCandidate, TrackerConfig,
};

/// A few harmonics of `f0` with per-harmonic amplitudes, plus optional silence.
fn voiced_signal(f0: f64, amps: &[f64], len: usize, gap: Option<(usize, usize)>) -> Vec<f64> {
    (0..len)
        .map(|i| {
            if gap.is_some_and(|(a, b)| i >= a && i < b) {
                return 0.0;
            }
            let t = i as f64 / 8000.0;
            amps.iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * std::f64::consts::PI * f0 * (h + 1) as f64 * t).sin())
                .sum()
        })
        .collect()
}

fn lattice() -> impl Strategy<Value = Vec<Vec<PitchCandidate>>> {
    let voiced = (20usize..160, 0.3f64..1.0).prop_map(|(lag, score)| PitchCandidate { lag, score });
    prop::collection::vec(prop::collection::vec(voiced, 0..3), 1..6)
}

fn with_unvoiced(lat: &[Vec<PitchCandidate>], bias: f64) -> Vec<Vec<PitchCandidate>> {
    lat.iter()
        .map(|f| {
            let mut f = f.clone();
            f.push(PitchCandidate::unvoiced(bias));
            f
        })
        .collect()
}

fn path_cost(cands: &[Vec<PitchCandidate>], choice: &[usize], cfg: &TrackerConfig) -> f64 {
    let mut cost = local_cost(&cands[0][choice[0]]);
    for t in 1..cands.len() {
        cost += transition_cost(&cands[t - 1][choice[t - 1]], &cands[t][choice[t]], cfg);
        cost += local_cost(&cands[t][choice[t]]);
    }
    cost
}

fn brute_force(cands: &[Vec<PitchCandidate>], cfg: &TrackerConfig) -> f64 {
    let mut best = f64::INFINITY;
    let mut choice = vec![0; cands.len()];
    loop {
        best = best.min(path_cost(cands, &choice, cfg));
        let mut t = 0;
        loop {
            if t == cands.len() {
                return best;
            }
            choice[t] += 1;
            if choice[t] < cands[t].len() {
                break;
            }
            choice[t] = 0;
            t += 1;
        }
    }
}

fn unvoiced_frames(cands: &[Vec<PitchCandidate>], cfg: &TrackerConfig) -> usize {
    let p = viterbi_path(cands, cfg).unwrap();
    p.choice.iter().zip(cands).filter(|(&j, c)| c[j].is_unvoiced()).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn viterbi_finds_the_cheapest_path(lat in lattice(), bias in 0.0f64..1.0) {
        let cfg = TrackerConfig::default();
        let cands = with_unvoiced(&lat, bias);
        let p = viterbi_path(&cands, &cfg).unwrap();
        let brute = brute_force(&cands, &cfg);
        prop_assert!((p.cost - brute).abs() <= 1e-12, "{} vs {}", p.cost, brute);
        prop_assert!((path_cost(&cands, &p.choice, &cfg) - p.cost).abs() <= 1e-12);
    }

    #[test]
    fn more_bias_never_adds_voicing(lat in lattice(), b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
        let cfg = TrackerConfig::default();
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let u_lo = unvoiced_frames(&with_unvoiced(&lat, lo), &cfg);
        let u_hi = unvoiced_frames(&with_unvoiced(&lat, hi), &cfg);
        prop_assert!(u_hi >= u_lo, "bias {lo}: {u_lo} unvoiced, bias {hi}: {u_hi}");
    }

    #[test]
    fn raising_voicing_bias_on_signals(f0 in 80.0f64..400.0, noise_amp in 0.0f64..1.0, seed in any::<u64>()) {
        let mut s = voiced_signal(f0, &[0.6, 0.3], 4000, Some((1500, 2300)));
        let mut h = seed | 1;
        for v in &mut s {
            h ^= h << 13;
            h ^= h >> 7;
            h ^= h << 17;
            *v += noise_amp * ((h % 2001) as f64 / 1000.0 - 1.0);
        }
        let w = Waveform::new(s, 8000).unwrap();
        let mut prev = usize::MAX;
        for bias in [0.0, 0.2, 0.45, 0.7, 1.0] {
            let cfg = TrackerConfig { voicing_bias: bias, ..TrackerConfig::default() };
            let v = track_voicing(&w, &cfg).unwrap().voiced_count();
            prop_assert!(v <= prev, "bias {bias}: {v} voiced after {prev}");
            prev = v;
        }
    }

    #[test]
    fn nccf_ignores_amplitude(f0 in 60.0f64..450.0, a2 in 0.0f64..1.0, exp in -20i32..20, gain in 0.001f64..1000.0) {
        let s = voiced_signal(f0, &[1.0, a2], 3000, Some((1000, 1400)));
        let cfg = TrackerConfig::default();
        let fc = tracker_frames(&cfg, 8000);
        let base = nccf(&Waveform::new(s.clone(), 8000).unwrap(), &cfg, &fc).unwrap();
        let scaled: Vec<f64> = s.iter().map(|v| v * gain).collect();
        let other = nccf(&Waveform::new(scaled, 8000).unwrap(), &cfg, &fc).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert_eq!(a.low_energy, b.low_energy);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
        // a power-of-two gain is exact, so the decisions are identical
        let p2 = 2f64.powi(exp);
        let w = Waveform::new(s.clone(), 8000).unwrap();
        let w2 = Waveform::new(s.iter().map(|v| v * p2).collect(), 8000).unwrap();
        prop_assert_eq!(track_voicing(&w, &cfg).unwrap(), track_voicing(&w2, &cfg).unwrap());
    }

    #[test]
    fn tracker_is_deterministic(f0 in 60.0f64..450.0, len in 0usize..3000) {
        let w = Waveform::new(voiced_signal(f0, &[0.5, 0.5, 0.2], len, None), 8000).unwrap();
        let cfg = TrackerConfig::default();
        let a = track_voicing(&w, &cfg).unwrap();
        prop_assert_eq!(&a, &track_voicing(&w, &cfg).unwrap());
        prop_assert_eq!(a.len(), voicing_core::dsp::frame_count(len, 8000));
    }
}

#[test]
fn nccf_next_to_silence_is_scale_free() {
    // found by nccf_ignores_amplitude: lagged windows sliding into the gap
    let s = voiced_signal(117.29432997196827, &[1.0, 0.8299790924418757], 3000, Some((1000, 1400)));
    let cfg = TrackerConfig::default();
    let fc = tracker_frames(&cfg, 8000);
    let a = nccf(&Waveform::new(s.clone(), 8000).unwrap(), &cfg, &fc).unwrap();
    let b = nccf(&Waveform::new(s.iter().map(|v| v * 0.001).collect(), 8000).unwrap(), &cfg, &fc).unwrap();
    for (fa, fb) in a.iter().zip(&b) {
        for (x, y) in fa.values.iter().zip(&fb.values) {
            assert!((x - y).abs() <= 1e-9, "frame {}: {x} vs {y}", fa.frame_index);
        }
    }
}
