//! Near-field beam training for extremely large uniform linear arrays.
//!
//! * [`array`] spherical-wavefront channels and the SINR/rate objective
//! * [`codebook`] polar-domain and far-field codebooks
//! * [`search`] exhaustive and hierarchical codeword selection
//! * [`scenario`] multi-user drops, training samples and dataset files
//! * [`net`] the codebook-free CNN beamformer, trained on negative mean rate

pub mod array;
mod binio;
pub mod codebook;
pub mod error;
pub mod net;
pub mod scenario;
pub mod search;
pub mod weights;

pub use error::{Error, Result};
pub use weights::{phases_to_weights, BeamWeights, PhaseVector};
