//! Signal-processing primitives: waveforms, resampling, STFT, FIR filters.

mod fir;
mod resample;
mod stft;
mod waveform;
pub mod window;

pub use fir::{apply_fir, design_kaiser_highpass, design_kaiser_lowpass, dtft_magnitude, FirDesign, FirFilter};
pub use resample::resample;
pub use stft::{
    extract_features, feature_from_spectrogram, frame_count, ms_to_samples, stft, ComplexSpectrogram,
    FeatureTensor, FrameConfig, WindowKind, HOP_MS, WINDOW_MS,
};
pub use waveform::{read_wav, write_wav, write_wav_pcm16, Waveform};

pub use rustfft::num_complex::Complex64;
