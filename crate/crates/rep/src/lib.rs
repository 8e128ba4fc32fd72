//! The geometry/contrast-disentangled representation.
//!
//! Two encoders split an image into a low-resolution spatial geometry latent
//! and per-level contrast vectors; a FiLM-modulated decoder recombines them.
//! Training minimizes the image-transfer loss on cross-composed phantom
//! pairs, so geometry must carry across contrast swaps.

pub mod arch;
pub mod corpus;
pub mod eval;
pub mod loss;
pub mod nets;
pub mod train;

pub use arch::{ContrastLatent, RepArchitecture, RepModel};
pub use corpus::{build_corpus, RepCorpus};
pub use eval::{cosine, interp_contrast, iou, support_mask};
pub use loss::{transfer_loss, transfer_loss_batch, TripletTensors};
pub use nets::{
    channels_to_complex, complex_to_channels, decode, encode_contrast, encode_geometry,
    film_modulate,
};
pub use train::{train_autoencoder, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RepError {
    #[error("resolution mismatch: model expects {expect}x{expect}, got {got:?}")]
    Resolution { expect: usize, got: Vec<usize> },
    #[error("contrast latent level {level} has width {got}, expected {expect}")]
    LatentWidth {
        level: usize,
        got: usize,
        expect: usize,
    },
    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("corpus too small: {0}")]
    Corpus(String),
    #[error(transparent)]
    Autodiff(#[from] mdr_autodiff::AdError),
    #[error(transparent)]
    Phantom(#[from] mdr_phantom::PhantomError),
}

pub type Result<T> = std::result::Result<T, RepError>;
