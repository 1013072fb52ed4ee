//! The Euler interaction network: embedding, complex mapping, stacked Euler
//! layers fusing explicit and implicit interactions, and the CTR head.

mod archive;
mod config;
mod forward;
mod params;

pub use archive::{
    check_config, decode_header, decode_params, encode_params, load_params, load_params_for, save_params,
    ArchiveHeader, ManifestEntry, FORMAT_VERSION,
};
pub use config::{Mode, ModelConfig};
pub use forward::{embed_record, forward, forward_batch, layer_forward, predict, LayerVars, TapeForward};
pub use params::{
    init_params, EmbeddingTable, EulerLayerParams, FieldModulus, LayerNormParams, ModelParams, OutputHead,
    HEAD_INIT_STD,
};
