use proptest::prelude::*;
use voicing_core::dsp::{frame_count, Waveform};
use voicing_core::labels::{
    align_for_lowest_vde, extract_reference_labels, extract_reference_labels_with_cutoff, format_labels,
    mismatch_rate, parse_labels, Sex, SpeakerMeta, VoicingLabels, FEMALE_CUTOFF_HZ, MALE_CUTOFF_HZ,
};
use voicing_core::rapt::{track_voicing, TrackerConfig};

fn bits(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, len)
}

fn lab(b: &[u8]) -> VoicingLabels {
    VoicingLabels::new(b.to_vec()).unwrap()
}

/// Glottal-like pulse train: a sharp rise once per period with a decaying tail.
fn laryngograph(f0: f64, len: usize, offset: f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let ph = (f0 * i as f64 / 8000.0).fract();
            (-6.0 * ph).exp() + offset
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mismatch_is_symmetric(a in bits(1..300), flips in prop::collection::vec(any::<prop::sample::Index>(), 0..20), cut in 0usize..3) {
        let mut b = a.clone();
        for i in &flips {
            let k = i.index(b.len());
            b[k] ^= 1;
        }
        b.truncate(b.len().saturating_sub(cut).max(1));
        let (x, y) = (lab(&a), lab(&b));
        let ab = mismatch_rate(&x, &y).unwrap();
        let ba = mismatch_rate(&y, &x).unwrap();
        prop_assert_eq!(ab.mismatch_rate, ba.mismatch_rate);
        prop_assert_eq!(ab.n_frames, ba.n_frames);
        prop_assert_eq!(ab.counts.errors(), ba.counts.errors());
    }

    #[test]
    fn self_alignment_is_exact(a in bits(10..300), max_shift in 0usize..8) {
        let x = lab(&a);
        let (shift, c) = align_for_lowest_vde(&x, &x, max_shift).unwrap();
        prop_assert_eq!(shift, 0);
        prop_assert_eq!(c.mismatch_rate, 0.0);
    }

    #[test]
    fn alignment_never_loses_to_no_shift(a in bits(20..200), b in bits(20..200)) {
        let n = a.len().min(b.len());
        let (x, y) = (lab(&a[..n]), lab(&b[..n]));
        let plain = mismatch_rate(&x, &y).unwrap();
        let (_, best) = align_for_lowest_vde(&x, &y, 5).unwrap();
        prop_assert!(best.mismatch_rate <= plain.mismatch_rate);
    }

    #[test]
    fn label_text_round_trips(a in bits(0..200), with_f0 in any::<bool>()) {
        let mut x = lab(&a);
        if with_f0 {
            let f0 = a.iter().enumerate().map(|(i, &v)| if v == 1 { 80.0 + i as f64 } else { 0.0 }).collect();
            x = x.with_f0(f0).unwrap();
        }
        let back = parse_labels(&format_labels(&x), "prop").unwrap();
        prop_assert_eq!(back.labels(), x.labels());
        prop_assert_eq!(format_labels(&back), format_labels(&x));
    }

    #[test]
    fn reference_labels_cover_every_frame(len in 0usize..6000, f0 in 70.0f64..400.0, female in any::<bool>()) {
        let meta = SpeakerMeta::new("s", if female { Sex::Female } else { Sex::Male });
        let w = Waveform::new(laryngograph(f0, len, 0.0), 8000).unwrap();
        let l = extract_reference_labels(&w, &meta, &TrackerConfig::default()).unwrap();
        prop_assert_eq!(l.len(), frame_count(len, 8000));
    }

    #[test]
    fn highpass_is_transparent_above_100_hz(f0 in 100.0f64..400.0, offset in -2.0f64..2.0, female in any::<bool>()) {
        let cutoff = if female { FEMALE_CUTOFF_HZ } else { MALE_CUTOFF_HZ };
        let cfg = TrackerConfig::default();
        let with_dc = Waveform::new(laryngograph(f0, 8000, offset), 8000).unwrap();
        let clean = Waveform::new(laryngograph(f0, 8000, 0.0), 8000).unwrap();
        let filtered = extract_reference_labels_with_cutoff(&with_dc, cutoff, &cfg).unwrap();
        let direct = track_voicing(&clean, &cfg).unwrap();
        prop_assert_eq!(filtered.labels(), direct.labels());
    }
}
