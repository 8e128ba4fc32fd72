//! Generative prior over geometry latents.
//!
//! A time-conditioned convolutional noise predictor is trained with the
//! epsilon-prediction objective; reconstruction interleaves reverse DDIM
//! steps with data-consistency updates mapped back onto the trajectory by
//! stochastic resampling.

pub mod loss;
pub mod predictor;
pub mod sampler;
pub mod schedule;
pub mod train;

pub use loss::{ldm_loss, ldm_loss_with_fn};
pub use predictor::{NoisePredictor, PredictorArch};
pub use sampler::{ddim_step, sample_prior, sigma_t_squared, stochastic_resample, tweedie_estimate};
pub use schedule::{make_schedule, DiffusionSchedule, Spacing};
pub use train::{train_ldm, LdmTrainConfig, LdmTrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("invalid beta range [{0}, {1}]")]
    BetaRange(f64, f64),
    #[error("diffusion index {t} out of range (T_d = {t_max})")]
    StepIndex { t: usize, t_max: usize },
    #[error("alpha-bar must be positive, got {0}")]
    AlphaBar(f64),
    #[error("negative radicand {0} in the DDIM update (schedule invariant violated)")]
    NegativeRadicand(f64),
    #[error("training diverged (non-finite loss) at step {0}")]
    Diverged(usize),
    #[error("latent corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Autodiff(#[from] mdr_autodiff::AdError),
}

pub type Result<T> = std::result::Result<T, DiffusionError>;
