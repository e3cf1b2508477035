//! Codebook-free beamformer: an encoder–decoder CNN over the `2×N` channel
//! image whose head emits one phase per antenna.
//!
//! Shape chain for `B` samples and widths `[c0, c1, c2]`:
//!
//! ```text
//! B×1×2×N  → block → B×c0×2×N   → pool → block → B×c1×2×N/2
//!          → pool → block → B×c2×2×N/4
//!          → deconv → block → B×c1×2×N/2 → deconv → block → B×c0×2×N
//!          → FC(c0·2N → N) → tanh → θ,  w = e^{jπθ}
//! ```

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{rate_loss, rate_loss_and_grad};
pub use model::{downsample, feature_block, head, upsample, Beamformer, NetworkConfig, Parameters};
pub use optim::{Adam, PlateauScheduler};
pub use tensor::Tensor;
pub use train::{evaluate_loss, evaluate_rates, train, write_history_csv, EpochRecord, TrainConfig, Trainer};
