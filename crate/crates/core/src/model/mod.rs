//! DC-CRN voicing detector implemented from scratch in f64: Conv-DC
//! blocks, gated convolutions, grouped BLSTM with layer norm, sigmoid head
//! and BCE loss, each with an analytic backward pass.

pub mod checkpoint;
mod config;
pub mod conv;
pub mod linalg;
pub mod lstm;
mod net;
mod params;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, DType};
pub use config::ModelConfig;
pub use conv::{
    composite_layer_backward, composite_layer_forward, conv_dc_block_backward, conv_dc_block_forward, gated_conv_backward,
    gated_conv_forward, Mode,
};
pub use net::{
    bce_loss, blstm_gate_weight_count, count_params, decide_voicing, grouped_blstm_forward, model_forward, param_layout, DcCrn, ForwardCache,
    VoicingPosterior, POSTERIOR_EPS,
};
pub use params::{Param, ParamGrads, ParamStore};
pub use tensor::Tensor;
