//! Sinogram networks: the graph-line module (GLM), its CNN counterpart,
//! the image-domain network and the closed-form counters.

mod counters;
mod gamma;
mod message;
mod module;
mod network;

pub use counters::{complexity_estimate, count_params, memory_estimate, network_complexity};
pub use gamma::{gamma_forward, GammaCache, GammaNet, GammaSpec};
pub use message::{message_pass, MessagePassing};
pub use module::{ModuleCache, SinoConv, SinoModule};
pub use network::{
    cnn_module_forward, glm_module_forward, network_forward, NetworkCache, NetworkKind, NetworkSpec,
    SinogramNet,
};
