use proptest::prelude::*;
use voicing_core::dsp::{FeatureTensor, FrameConfig};
use voicing_core::model::{decide_voicing, read_checkpoint, write_checkpoint, DType, DcCrn, Mode, ModelConfig};

fn features(frames: usize, scale: f64, seed: u64) -> FeatureTensor {
    let bins = ModelConfig::tiny().input_freq_bins;
    let mut h = seed | 1;
    let values = (0..frames * 2 * bins)
        .map(|_| {
            h ^= h << 13;
            h ^= h >> 7;
            h ^= h << 17;
            scale * ((h % 20001) as f64 / 10000.0 - 1.0)
        })
        .collect();
    FeatureTensor::new(values, frames, bins).unwrap()
}

fn model(seed: u64) -> DcCrn {
    DcCrn::new(ModelConfig::tiny(), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn posteriors_stay_inside_the_unit_interval(frames in 1usize..24, exp in -3i32..7, seed in any::<u64>(), train in any::<bool>()) {
        let m = model(seed % 7);
        let feat = features(frames, 10f64.powi(exp), seed);
        let mode = if train { Mode::Train } else { Mode::Inference };
        let (p, _) = m.forward(&feat, mode).unwrap();
        prop_assert_eq!(p.len(), frames);
        prop_assert!(p.probs().iter().all(|&v| v > 0.0 && v < 1.0));
        let l = decide_voicing(&p, 0.5).unwrap();
        for (t, &v) in p.probs().iter().enumerate() {
            prop_assert_eq!(l.is_voiced(t), v > 0.5);
        }
    }

    #[test]
    fn inference_is_deterministic(frames in 1usize..16, seed in any::<u64>()) {
        let feat = features(frames, 1.0, seed);
        let (a, b) = (model(3), model(3));
        prop_assert_eq!(a.predict(&feat).unwrap(), b.predict(&feat).unwrap());
    }

    #[test]
    fn f64_checkpoints_are_bit_exact(seed in any::<u64>(), frames in 1usize..10) {
        let m = model(seed);
        let mut buf = Vec::new();
        write_checkpoint(&m, DType::F64, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(back.params(), m.params());
        prop_assert_eq!(back.config(), m.config());
        let feat = features(frames, 1.0, seed);
        prop_assert_eq!(back.predict(&feat).unwrap(), m.predict(&feat).unwrap());
    }
}

#[test]
fn tiny_config_matches_a_frame_layout() {
    // 32-sample FFT at the model rate gives the tiny model's 17 bins
    let fc = FrameConfig::new(32, 16, 32).unwrap();
    assert_eq!(fc.n_bins(), ModelConfig::tiny().input_freq_bins);
}
