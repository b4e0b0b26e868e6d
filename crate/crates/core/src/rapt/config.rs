use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tracker parameters. The cost constants were fixed on the bundled
/// synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub max_candidates_per_frame: usize,
    /// Score of the unvoiced hypothesis; larger values favour "unvoiced".
    pub voicing_bias: f64,
    /// Cost of a voiced/unvoiced switch between consecutive frames.
    pub switch_cost: f64,
    /// Weight on `|log2(lag_t / lag_{t-1})|` for voiced-to-voiced transitions.
    pub octave_weight: f64,
    pub nccf_threshold: f64,
    pub corr_window_ms: f64,
    pub hop_ms: f64,
    /// Frames this far (dB) below the loudest frame only get the unvoiced hypothesis.
    pub silence_db: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            f0_min: 50.0,
            f0_max: 500.0,
            max_candidates_per_frame: 20,
            voicing_bias: 0.45,
            switch_cost: 0.3,
            octave_weight: 0.2,
            nccf_threshold: 0.3,
            corr_window_ms: 20.0,
            hop_ms: 10.0,
            silence_db: -40.0,
        }
    }
}

const TEXT_HEADER: &str = "#tracker_config v1";

impl TrackerConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyq = sample_rate as f64 / 2.0;
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max < nyq) {
            return Err(Error::Config(format!(
                "tracker needs 0 < f0_min < f0_max < {nyq}, got {} / {}",
                self.f0_min, self.f0_max
            )));
        }
        if self.switch_cost < 0.0 || self.octave_weight < 0.0 {
            return Err(Error::Config("tracker costs must be non-negative".into()));
        }
        if self.max_candidates_per_frame == 0 {
            return Err(Error::Config("max_candidates_per_frame must be positive".into()));
        }
        if !(self.corr_window_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::Config("window and hop must be positive".into()));
        }
        Ok(())
    }

    /// Smallest and largest analysed lag in samples.
    pub fn lag_range(&self, sample_rate: u32) -> (usize, usize) {
        let sr = sample_rate as f64;
        let lo = ((sr / self.f0_max).floor() as usize).max(1);
        let hi = ((sr / self.f0_min).ceil() as usize).max(lo);
        (lo, hi)
    }

    /// Versioned `key=value` text form.
    pub fn to_text(&self) -> String {
        let mut s = String::from(TEXT_HEADER);
        s.push('\n');
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("f0_min", self.f0_min.to_string());
        kv("f0_max", self.f0_max.to_string());
        kv("max_candidates_per_frame", self.max_candidates_per_frame.to_string());
        kv("voicing_bias", self.voicing_bias.to_string());
        kv("switch_cost", self.switch_cost.to_string());
        kv("octave_weight", self.octave_weight.to_string());
        kv("nccf_threshold", self.nccf_threshold.to_string());
        kv("corr_window_ms", self.corr_window_ms.to_string());
        kv("hop_ms", self.hop_ms.to_string());
        kv("silence_db", self.silence_db.to_string());
        s
    }

    /// Parses [`to_text`](Self::to_text) output; missing keys take defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == TEXT_HEADER => {}
            _ => return Err(Error::format("tracker config", 1, format!("expected `{TEXT_HEADER}`"))),
        }
        let mut cfg = Self::default();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::format("tracker config", i + 1, m);
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("not key=value: {line}")))?;
            let (k, v) = (k.trim(), v.trim());
            let f = || v.parse::<f64>().map_err(|e| err(format!("{k}: {e}")));
            match k {
                "f0_min" => cfg.f0_min = f()?,
                "f0_max" => cfg.f0_max = f()?,
                "max_candidates_per_frame" => {
                    cfg.max_candidates_per_frame = v.parse().map_err(|e| err(format!("{k}: {e}")))?
                }
                "voicing_bias" => cfg.voicing_bias = f()?,
                "switch_cost" => cfg.switch_cost = f()?,
                "octave_weight" => cfg.octave_weight = f()?,
                "nccf_threshold" => cfg.nccf_threshold = f()?,
                "corr_window_ms" => cfg.corr_window_ms = f()?,
                "hop_ms" => cfg.hop_ms = f()?,
                "silence_db" => cfg.silence_db = f()?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = TrackerConfig {
            voicing_bias: 0.123456789,
            f0_max: 400.0,
            ..Default::default()
        };
        let text = cfg.to_text();
        assert!(text.starts_with("#tracker_config v1\n"));
        assert_eq!(TrackerConfig::from_text(&text).unwrap(), cfg);
        assert_eq!(TrackerConfig::from_text(&text).unwrap().to_text(), text);
    }

    #[test]
    fn text_rejects_unknown_and_unversioned() {
        assert!(TrackerConfig::from_text("f0_min=50\n").is_err());
        assert!(TrackerConfig::from_text("#tracker_config v1\nbogus=1\n").is_err());
        let partial = TrackerConfig::from_text("#tracker_config v1\nswitch_cost=0.5\n").unwrap();
        assert_eq!(partial.switch_cost, 0.5);
        assert_eq!(partial.f0_min, 50.0);
    }

    #[test]
    fn validation() {
        let d = TrackerConfig::default();
        assert!(d.validate(8000).is_ok());
        assert!(TrackerConfig { f0_max: 4000.0, ..d.clone() }.validate(8000).is_err());
        assert!(TrackerConfig { switch_cost: -1.0, ..d.clone() }.validate(8000).is_err());
        assert_eq!(d.lag_range(8000), (16, 160));
    }
}
