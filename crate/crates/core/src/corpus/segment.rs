use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Minimum length of a trailing piece to stand as its own segment.
pub const MIN_SEGMENT_SECS: f64 = 1.0;

/// Cuts a long recording at fixed `target_sec` boundaries. A trailing piece
/// shorter than one second is merged into the previous segment.
pub fn segment_recording(wave: &Waveform, target_sec: f64) -> Result<Vec<Waveform>> {
    if !(target_sec > 0.0 && target_sec.is_finite()) {
        return Err(Error::invalid(format!("target segment length must be positive, got {target_sec}")));
    }
    let sr = wave.sample_rate() as f64;
    let seg = ((target_sec * sr).round() as usize).max(1);
    let min_tail = (MIN_SEGMENT_SECS * sr).round() as usize;
    let n = wave.len();
    if n < min_tail {
        log::warn!("recording of {:.2} s is shorter than {MIN_SEGMENT_SECS} s; kept as a single segment", wave.duration_secs());
    }
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + seg).min(n);
        bounds.push((start, end));
        start = end;
    }
    if bounds.len() > 1 {
        let (ls, le) = bounds[bounds.len() - 1];
        if le - ls < min_tail {
            bounds.pop();
            bounds.last_mut().unwrap().1 = le;
        }
    }
    Ok(bounds.into_iter().map(|(s, e)| wave.slice(s, e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(s: f64) -> Waveform {
        let n = (s * 8000.0).round() as usize;
        Waveform::new((0..n).map(|i| i as f64).collect(), 8000).unwrap()
    }

    #[test]
    fn thirty_seconds_gives_ten() {
        let segs = segment_recording(&secs(30.0), 3.0).unwrap();
        assert_eq!(segs.len(), 10);
        assert!(segs.iter().all(|s| s.len() == 24000));
    }

    #[test]
    fn short_tail_merged_long_tail_kept() {
        let segs = segment_recording(&secs(3.5), 3.0).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].len(), 28000);
        let segs = segment_recording(&secs(7.0), 3.0).unwrap();
        assert_eq!(segs.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![24000, 24000, 8000]);
    }

    #[test]
    fn tiny_recording_single_segment_and_contiguous() {
        let w = secs(0.5);
        let segs = segment_recording(&w, 3.0).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0], w);
        let w = secs(10.3);
        let joined: Vec<f64> = segment_recording(&w, 3.0).unwrap().iter().flat_map(|s| s.samples().to_vec()).collect();
        assert_eq!(joined, w.samples());
        assert!(segment_recording(&w, 0.0).is_err());
    }
}
