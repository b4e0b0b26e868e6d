use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// DC-CRN architecture. Defaults give the full-size detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub input_freq_bins: usize,
    pub block_out_channels: Vec<usize>,
    pub composite_layers: usize,
    pub composite_growth: usize,
    pub composite_kernel: usize,
    pub composite_pad: usize,
    pub gated_kernel: usize,
    pub gated_stride: usize,
    pub gated_pad: usize,
    pub blstm_layers: usize,
    pub blstm_hidden: usize,
    pub groups: usize,
    pub threshold: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub ln_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_channels: 2,
            input_freq_bins: 513,
            block_out_channels: vec![4, 8, 16, 32, 64, 128, 256],
            composite_layers: 4,
            composite_growth: 8,
            composite_kernel: 3,
            composite_pad: 1,
            gated_kernel: 4,
            gated_stride: 2,
            gated_pad: 1,
            blstm_layers: 2,
            blstm_hidden: 512,
            groups: 4,
            threshold: 0.5,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            ln_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    /// Two blocks, channels [2, 4], 32-unit BLSTM in 2 groups, 17 input bins.
    pub fn tiny() -> Self {
        Self {
            input_freq_bins: 17,
            block_out_channels: vec![2, 4],
            blstm_hidden: 32,
            groups: 2,
            ..Self::default()
        }
    }

    /// Seven blocks with narrow widths; trains on the synthetic corpus in
    /// minutes on one core.
    pub fn reduced() -> Self {
        Self {
            block_out_channels: vec![2, 4, 4, 8, 8, 8, 16],
            composite_layers: 2,
            composite_growth: 2,
            blstm_hidden: 32,
            groups: 4,
            ..Self::default()
        }
    }

    /// Frequency bins after each block, starting with the input.
    pub fn freq_chain(&self) -> Vec<usize> {
        let mut f = vec![self.input_freq_bins];
        for _ in &self.block_out_channels {
            let last = *f.last().unwrap();
            f.push((last + 2 * self.gated_pad).saturating_sub(self.gated_kernel) / self.gated_stride + 1);
        }
        f
    }

    /// Input channels of block `b`.
    pub fn block_in_channels(&self, b: usize) -> usize {
        if b == 0 {
            self.input_channels
        } else {
            self.block_out_channels[b - 1]
        }
    }

    /// Input channels of composite layer `l` (0-based) in block `b`.
    pub fn composite_in_channels(&self, b: usize, l: usize) -> usize {
        self.block_in_channels(b) + self.composite_growth * l
    }

    /// Per-frame feature width entering the recurrent stage.
    pub fn recurrent_width(&self) -> usize {
        let c = self.block_out_channels.last().copied().unwrap_or(self.input_channels);
        c * self.freq_chain().last().copied().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0,1), got {}", self.threshold));
        }
        if self.input_channels == 0 || self.input_freq_bins == 0 {
            return bad("input channels and bins must be positive".into());
        }
        if self.block_out_channels.contains(&0) {
            return bad("block output channels must be positive".into());
        }
        if !self.block_out_channels.is_empty() {
            if self.composite_growth == 0 || self.composite_kernel == 0 {
                return bad("composite growth and kernel must be positive".into());
            }
            if self.composite_kernel != 2 * self.composite_pad + 1 {
                return bad("composite kernel must be 2·pad+1 so frequency size is preserved".into());
            }
            if self.gated_kernel == 0 || self.gated_stride == 0 {
                return bad("gated kernel and stride must be positive".into());
            }
        }
        let mut f = self.input_freq_bins;
        for _ in &self.block_out_channels {
            if f + 2 * self.gated_pad < self.gated_kernel {
                return bad(format!("frequency axis of {f} bins too small for another block"));
            }
            f = (f + 2 * self.gated_pad - self.gated_kernel) / self.gated_stride + 1;
        }
        if self.blstm_layers > 0 {
            if self.groups == 0 || self.blstm_hidden == 0 {
                return bad("groups and hidden size must be positive".into());
            }
            let d = self.recurrent_width();
            if d % self.groups != 0 {
                return bad(format!("recurrent width {d} not divisible by {} groups", self.groups));
            }
        }
        if !(self.bn_momentum >= 0.0 && self.bn_momentum < 1.0) || self.bn_eps <= 0.0 || self.ln_eps <= 0.0 {
            return bad("invalid normalization constants".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_chain() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.freq_chain(), vec![513, 256, 128, 64, 32, 16, 8, 4]);
        assert_eq!(c.recurrent_width(), 1024);
        assert_eq!((0..4).map(|l| c.composite_in_channels(0, l)).collect::<Vec<_>>(), vec![2, 10, 18, 26]);
        ModelConfig::tiny().validate().unwrap();
        assert_eq!(ModelConfig::tiny().freq_chain(), vec![17, 8, 4]);
        ModelConfig::reduced().validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let c = ModelConfig { threshold: 1.0, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { groups: 3, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { input_freq_bins: 3, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ModelConfig>("{\"bogus\":1}").is_err());
    }
}
