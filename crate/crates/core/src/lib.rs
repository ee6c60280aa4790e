//! Source-free domain adaptation by cluster-level pseudo-labelling.
//!
//! A trained source classifier labels an unlabelled target set. The target
//! features are over-clustered with k-means, each cluster takes the majority
//! pseudo-label, and only clusters whose purity reaches a per-class percentile
//! threshold are kept. Independently, a target feature extractor is pretrained
//! with a swapped-prototype objective whose codes come from Sinkhorn-Knopp.
//! Finally the pretrained extractor gets a new softmax head and is trained on
//! the retained samples with cross-entropy.
//!
//! Every capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run --release --example end_to_end
//! ```

pub mod clustering;
mod codec;
pub mod error;
pub mod features;
pub mod network;
pub mod pipeline;
pub mod pseudo_label;
pub mod rng;
pub mod ssl;

pub use codec::xor_checksum;
pub use error::{Error, Result};
