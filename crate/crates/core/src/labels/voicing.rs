use crate::error::{Error, Result};

/// Per-frame binary voicing decisions at a fixed hop.
///
/// Frames may optionally carry an F0 value (Hz, 0 where unvoiced) and an
/// exclusion mask; excluded frames are ignored by every comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicingLabels {
    labels: Vec<u8>,
    f0: Option<Vec<f64>>,
    excluded: Option<Vec<bool>>,
    hop_ms: u32,
}

pub const DEFAULT_HOP_MS: u32 = 10;

impl VoicingLabels {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!("label {} at frame {i} is not 0 or 1", labels[i])));
        }
        Ok(Self {
            labels,
            f0: None,
            excluded: None,
            hop_ms: DEFAULT_HOP_MS,
        })
    }

    pub fn from_bools(voiced: &[bool]) -> Self {
        Self {
            labels: voiced.iter().map(|&v| v as u8).collect(),
            f0: None,
            excluded: None,
            hop_ms: DEFAULT_HOP_MS,
        }
    }

    pub fn unvoiced(n: usize) -> Self {
        Self::from_bools(&vec![false; n])
    }

    /// Attaches F0 values; `f0 > 0` must hold exactly on voiced frames.
    /// An all-zero track is stored as "no F0".
    pub fn with_f0(mut self, f0: Vec<f64>) -> Result<Self> {
        if f0.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.labels.len(),
                right: f0.len(),
            });
        }
        for (t, (&l, &f)) in self.labels.iter().zip(&f0).enumerate() {
            if !f.is_finite() || f < 0.0 || (f > 0.0) != (l == 1) {
                return Err(Error::invalid(format!("frame {t}: f0 {f} inconsistent with label {l}")));
            }
        }
        self.f0 = f0.iter().any(|&f| f > 0.0).then_some(f0);
        Ok(self)
    }

    pub fn with_excluded(mut self, excluded: Vec<bool>) -> Result<Self> {
        if excluded.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.labels.len(),
                right: excluded.len(),
            });
        }
        self.excluded = excluded.iter().any(|&e| e).then_some(excluded);
        Ok(self)
    }

    pub fn with_hop_ms(mut self, hop_ms: u32) -> Self {
        self.hop_ms = hop_ms;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn is_voiced(&self, t: usize) -> bool {
        self.labels[t] == 1
    }

    pub fn is_excluded(&self, t: usize) -> bool {
        self.excluded.as_ref().is_some_and(|e| e[t])
    }

    pub fn excluded(&self) -> Option<&[bool]> {
        self.excluded.as_deref()
    }

    pub fn f0(&self) -> Option<&[f64]> {
        self.f0.as_deref()
    }

    pub fn hop_ms(&self) -> u32 {
        self.hop_ms
    }

    pub fn voiced_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Logical complement; F0 is dropped.
    pub fn complement(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
            f0: None,
            excluded: self.excluded.clone(),
            hop_ms: self.hop_ms,
        }
    }

    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            labels: self.labels[..n].to_vec(),
            f0: self.f0.as_ref().map(|f| f[..n].to_vec()).filter(|f| f.iter().any(|&v| v > 0.0)),
            excluded: self
                .excluded
                .as_ref()
                .map(|e| e[..n].to_vec())
                .filter(|e| e.iter().any(|&v| v)),
            hop_ms: self.hop_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rules() {
        assert!(VoicingLabels::new(vec![0, 1, 2]).is_err());
        let l = VoicingLabels::new(vec![0, 1, 1]).unwrap();
        assert!(l.clone().with_f0(vec![0.0, 100.0]).is_err());
        assert!(l.clone().with_f0(vec![0.0, 100.0, 0.0]).is_err());
        assert!(l.clone().with_f0(vec![50.0, 100.0, 120.0]).is_err());
        let l = l.with_f0(vec![0.0, 100.0, 120.0]).unwrap();
        assert_eq!(l.f0(), Some(&[0.0, 100.0, 120.0][..]));
        assert_eq!(l.voiced_count(), 2);
        assert_eq!(l.complement().labels(), &[1, 0, 0]);
    }

    #[test]
    fn all_zero_f0_normalises_to_none() {
        let l = VoicingLabels::unvoiced(3).with_f0(vec![0.0; 3]).unwrap();
        assert!(l.f0().is_none());
    }
}
