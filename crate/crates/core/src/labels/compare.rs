use crate::error::{Error, Result};

use super::VoicingLabels;

/// Largest length difference tolerated before alignment is demanded.
pub const MAX_LENGTH_SLACK: usize = 2;
pub const MIN_ALIGNED_OVERLAP: usize = 10;
pub const DEFAULT_MAX_SHIFT: usize = 5;

/// Per-direction error counts between an estimate and a reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    /// reference voiced, estimate unvoiced
    pub voiced_to_unvoiced: usize,
    /// reference unvoiced, estimate voiced
    pub unvoiced_to_voiced: usize,
    /// frames compared (excluded frames are not counted)
    pub frames: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.voiced_to_unvoiced + self.unvoiced_to_voiced
    }

    /// Error percentage; 0 when no frames were compared.
    pub fn percent(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            100.0 * self.errors() as f64 / self.frames as f64
        }
    }

    pub fn add(&mut self, other: &ErrorCounts) {
        self.voiced_to_unvoiced += other.voiced_to_unvoiced;
        self.unvoiced_to_voiced += other.unvoiced_to_voiced;
        self.frames += other.frames;
    }

    /// `self` has a strictly lower error rate than `other` (exact rational compare).
    pub fn better_than(&self, other: &ErrorCounts) -> bool {
        (self.errors() as u128) * (other.frames as u128) < (other.errors() as u128) * (self.frames as u128)
    }
}

/// Counts errors with `est` moved `shift` frames later relative to `reference`:
/// `est[t - shift]` is compared against `reference[t]` over the overlap.
pub fn shifted_counts(est: &VoicingLabels, reference: &VoicingLabels, shift: i64) -> ErrorCounts {
    let lo = shift.max(0);
    let hi = (est.len() as i64 + shift).min(reference.len() as i64);
    let mut c = ErrorCounts::default();
    for t in lo..hi {
        let (te, tr) = ((t - shift) as usize, t as usize);
        if est.is_excluded(te) || reference.is_excluded(tr) {
            continue;
        }
        c.frames += 1;
        match (est.is_voiced(te), reference.is_voiced(tr)) {
            (false, true) => c.voiced_to_unvoiced += 1,
            (true, false) => c.unvoiced_to_voiced += 1,
            _ => {}
        }
    }
    c
}

fn overlap(est_len: usize, ref_len: usize, shift: i64) -> usize {
    let lo = shift.max(0);
    let hi = (est_len as i64 + shift).min(ref_len as i64);
    (hi - lo).max(0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelComparison {
    /// percent of compared frames that disagree
    pub mismatch_rate: f64,
    pub n_frames: usize,
    pub shift_applied: i64,
    pub counts: ErrorCounts,
}

impl LabelComparison {
    fn from_counts(counts: ErrorCounts, shift: i64) -> Self {
        Self {
            mismatch_rate: counts.percent(),
            n_frames: counts.frames,
            shift_applied: shift,
            counts,
        }
    }
}

/// Percentage of disagreeing frames. Sequences are truncated to the shorter
/// length when they differ by at most two frames.
pub fn mismatch_rate(a: &VoicingLabels, b: &VoicingLabels) -> Result<LabelComparison> {
    let diff = a.len().abs_diff(b.len());
    if diff > MAX_LENGTH_SLACK {
        return Err(Error::AlignmentRequired { diff });
    }
    let counts = shifted_counts(a, b, 0);
    if counts.frames == 0 {
        return Err(Error::invalid("no frames to compare"));
    }
    Ok(LabelComparison::from_counts(counts, 0))
}

/// Searches shifts in `[-max_shift, max_shift]` for the lowest error rate
/// over the overlap. Ties go to the smallest `|shift|`, negative first.
/// Positive shifts move `est` later in time relative to `reference`.
pub fn align_for_lowest_vde(
    est: &VoicingLabels,
    reference: &VoicingLabels,
    max_shift: usize,
) -> Result<(i64, LabelComparison)> {
    let mut best: Option<(i64, ErrorCounts)> = None;
    for shift in shift_order(max_shift) {
        if overlap(est.len(), reference.len(), shift) < MIN_ALIGNED_OVERLAP {
            continue;
        }
        let c = shifted_counts(est, reference, shift);
        if c.frames == 0 {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| c.better_than(b)) {
            best = Some((shift, c));
        }
    }
    let (shift, counts) = best.ok_or_else(|| {
        Error::invalid(format!(
            "overlap shorter than {MIN_ALIGNED_OVERLAP} frames for every shift ({} vs {} frames)",
            est.len(),
            reference.len()
        ))
    })?;
    Ok((shift, LabelComparison::from_counts(counts, shift)))
}

/// `0, -1, 1, -2, 2, ...`
pub fn shift_order(max_shift: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_shift as i64).flat_map(|s| [-s, s]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(bits: &[u8]) -> VoicingLabels {
        VoicingLabels::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn basic_rates() {
        assert_eq!(mismatch_rate(&l(&[1, 0, 1, 0]), &l(&[1, 0, 1, 0])).unwrap().mismatch_rate, 0.0);
        assert_eq!(mismatch_rate(&l(&[1, 0, 1, 0]), &l(&[0, 1, 0, 1])).unwrap().mismatch_rate, 100.0);
        assert_eq!(mismatch_rate(&l(&[1, 0, 1, 0]), &l(&[1, 0, 0, 0])).unwrap().mismatch_rate, 25.0);
    }

    #[test]
    fn length_slack() {
        let a = l(&[1, 1, 0, 0, 1]);
        let b = l(&[1, 1, 0]);
        let c = mismatch_rate(&a, &b).unwrap();
        assert_eq!(c.n_frames, 3);
        assert!(matches!(mismatch_rate(&a, &l(&[1, 1])), Err(Error::AlignmentRequired { diff: 3 })));
        assert!(mismatch_rate(&l(&[]), &l(&[])).is_err());
    }

    #[test]
    fn excluded_frames_are_skipped() {
        let a = l(&[1, 1, 0, 0]);
        let b = l(&[1, 0, 0, 1]).with_excluded(vec![false, true, false, true]).unwrap();
        let c = mismatch_rate(&a, &b).unwrap();
        assert_eq!((c.n_frames, c.mismatch_rate), (2, 0.0));
    }

    #[test]
    fn recovers_shift() {
        let est: Vec<u8> = (0..60).map(|t| ((t / 7) % 2) as u8).collect();
        let mut reference = vec![0u8, 0];
        reference.extend_from_slice(&est[..58]);
        let (shift, c) = align_for_lowest_vde(&l(&est), &l(&reference), 5).unwrap();
        assert_eq!(shift, 2);
        assert_eq!(c.mismatch_rate, 0.0);
        let (shift, c) = align_for_lowest_vde(&l(&reference), &l(&est), 5).unwrap();
        assert_eq!((shift, c.mismatch_rate), (-2, 0.0));
    }

    #[test]
    fn ties_prefer_zero_then_negative() {
        let x = l(&[1; 30]);
        assert_eq!(align_for_lowest_vde(&x, &x, 5).unwrap().0, 0);
        let order: Vec<i64> = shift_order(2).collect();
        assert_eq!(order, vec![0, -1, 1, -2, 2]);
    }

    #[test]
    fn short_overlap_is_an_error() {
        assert!(align_for_lowest_vde(&l(&[1; 5]), &l(&[1; 5]), 2).is_err());
    }
}
