//! Float reference network with hand-written backward passes.

pub mod checkpoint;
mod config;
mod convblock;
mod network;
mod rc;
mod rf;
mod tensor;

pub use checkpoint::{Checkpoint, NamedArray};
pub use config::{BlockKind, BranchConfig, NetworkConfig};
pub use convblock::{
    convblock_backward, convblock_backward_into, convblock_forward, convblock_forward_cached, BlockCache,
    ConvBlockParams, Dense,
};
pub use network::{
    network_backward, network_forward, network_forward_train, network_upscale, quantize_sim, stage_forward, ArraySpec,
    BranchParams, NetworkParams, NetworkTape,
};
pub use rc::{rc_backward, rc_backward_into, rc_forward, RcModuleParams};
pub use rf::receptive_field;
pub use tensor::{pixel_shuffle, pixel_unshuffle, Tensor};
