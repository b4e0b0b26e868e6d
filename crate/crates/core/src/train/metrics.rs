use crate::error::{Error, Result};
use crate::labels::{shifted_counts, VoicingLabels};

/// Voicing decision error in percent: `100 * (N_v→u + N_u→v) / N` over the
/// scored frames. Frames excluded in either sequence are not scored.
pub fn vde(est: &VoicingLabels, reference: &VoicingLabels) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: reference.len(),
        });
    }
    let c = shifted_counts(est, reference, 0);
    if c.frames == 0 {
        return Err(Error::invalid("no frames to compare"));
    }
    Ok(c.percent())
}
