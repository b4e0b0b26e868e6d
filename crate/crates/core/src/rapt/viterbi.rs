use crate::error::{Error, Result};
use crate::labels::VoicingLabels;

use super::{PitchCandidate, TrackerConfig};

pub fn local_cost(c: &PitchCandidate) -> f64 {
    1.0 - c.score
}

pub fn transition_cost(prev: &PitchCandidate, cur: &PitchCandidate, cfg: &TrackerConfig) -> f64 {
    match (prev.is_unvoiced(), cur.is_unvoiced()) {
        (true, true) => 0.0,
        (false, false) => cfg.octave_weight * (cur.lag as f64 / prev.lag as f64).log2().abs(),
        _ => cfg.switch_cost,
    }
}

/// Chosen candidate index per frame and the total path cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPath {
    pub choice: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost path through the candidate lattice. The cost of a path is
/// accumulated as `((c_0 + tr_01) + c_1) + tr_12 + ...`; ties keep the
/// lowest candidate index.
pub fn viterbi_path(candidates: &[Vec<PitchCandidate>], cfg: &TrackerConfig) -> Result<TrackPath> {
    if candidates.is_empty() {
        return Err(Error::invalid("viterbi needs at least one frame"));
    }
    if let Some(t) = candidates.iter().position(|c| c.is_empty()) {
        return Err(Error::invalid(format!("frame {t} has no candidates")));
    }
    let mut acc: Vec<f64> = candidates[0].iter().map(local_cost).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
    back.push(vec![0; acc.len()]);
    for t in 1..candidates.len() {
        let (prev, cur) = (&candidates[t - 1], &candidates[t]);
        let mut next = Vec::with_capacity(cur.len());
        let mut ptr = Vec::with_capacity(cur.len());
        for c in cur {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (i, p) in prev.iter().enumerate() {
                let v = acc[i] + transition_cost(p, c, cfg);
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            next.push(best + local_cost(c));
            ptr.push(arg);
        }
        acc = next;
        back.push(ptr);
    }
    let (mut j, cost) = acc
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bj, bc), (j, &c)| if c < bc { (j, c) } else { (bj, bc) });
    let mut choice = vec![0; candidates.len()];
    for t in (0..candidates.len()).rev() {
        choice[t] = j;
        j = back[t][j];
    }
    Ok(TrackPath { choice, cost })
}

/// Voicing labels and F0 read off the minimum-cost path.
pub fn viterbi_track(
    candidates: &[Vec<PitchCandidate>],
    cfg: &TrackerConfig,
    sample_rate: u32,
) -> Result<VoicingLabels> {
    let path = viterbi_path(candidates, cfg)?;
    labels_from_path(candidates, &path, sample_rate)
}

pub(crate) fn labels_from_path(
    candidates: &[Vec<PitchCandidate>],
    path: &TrackPath,
    sample_rate: u32,
) -> Result<VoicingLabels> {
    let picked: Vec<&PitchCandidate> = path.choice.iter().zip(candidates).map(|(&j, c)| &c[j]).collect();
    let voiced: Vec<bool> = picked.iter().map(|c| !c.is_unvoiced()).collect();
    let f0: Vec<f64> = picked
        .iter()
        .map(|c| if c.is_unvoiced() { 0.0 } else { sample_rate as f64 / c.lag as f64 })
        .collect();
    VoicingLabels::from_bools(&voiced).with_f0(f0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voiced(lag: usize, score: f64) -> PitchCandidate {
        PitchCandidate { lag, score }
    }

    #[test]
    fn strong_peaks_all_voiced() {
        let cfg = TrackerConfig::default();
        let cands: Vec<_> = (0..10).map(|_| vec![voiced(80, 0.95), PitchCandidate::unvoiced(0.45)]).collect();
        let l = viterbi_track(&cands, &cfg, 8000).unwrap();
        assert_eq!(l.voiced_count(), 10);
        assert!(l.f0().unwrap().iter().all(|&f| f == 100.0));
    }

    #[test]
    fn only_unvoiced() {
        let cfg = TrackerConfig::default();
        let cands: Vec<_> = (0..5).map(|_| vec![PitchCandidate::unvoiced(0.45)]).collect();
        let l = viterbi_track(&cands, &cfg, 8000).unwrap();
        assert_eq!(l.voiced_count(), 0);
        assert!(l.f0().is_none());
    }

    #[test]
    fn errors() {
        let cfg = TrackerConfig::default();
        assert!(viterbi_path(&[], &cfg).is_err());
        assert!(viterbi_path(&[vec![]], &cfg).is_err());
    }

    #[test]
    fn switch_cost_smooths_isolated_frames() {
        let cfg = TrackerConfig::default();
        let mut cands: Vec<_> = (0..7).map(|_| vec![voiced(80, 0.9), PitchCandidate::unvoiced(0.45)]).collect();
        // one frame whose voiced evidence is marginally weaker than the unvoiced hypothesis
        cands[3] = vec![voiced(80, 0.4), PitchCandidate::unvoiced(0.45)];
        let l = viterbi_track(&cands, &cfg, 8000).unwrap();
        assert_eq!(l.voiced_count(), 7);
    }
}
