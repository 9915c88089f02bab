//! Wavelet-filtered skip-connection segmentation with a synthetic
//! domain-shift benchmark.
//!
//! The network is a U-shaped encoder-decoder whose skip connections are
//! filtered by a wavelet module: each encoder feature is split into Haar
//! sub-bands, the low-pass band is decoupled into content and style
//! branches, the directional detail bands are gated and boosted, the
//! diagonal band is dropped, and the result is reconstructed and fused
//! residually. Training, segmentation metrics, distribution distances
//! and a seeded fundus-like data generator live alongside the model so
//! the whole benchmark runs from one binary.

pub mod config;
pub mod error;
pub mod layers;
pub mod losses;
pub mod metrics;
pub mod segnet;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod verify;
pub mod wavelet;
pub mod wiser;

pub use error::{Error, Result};
pub use tensor::{Graph, NodeId, ParamId, ParamStore, Scalar, Shape, Tensor4};
