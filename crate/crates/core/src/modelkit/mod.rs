//! A small trainable softmax classifier, its losses, temperature scaling and
//! a synthetic data generator.

pub mod loss;
pub mod model;
pub mod synthetic;
pub mod temperature;
pub mod train;

pub use loss::{kl_loss, kl_loss_and_grad};
pub use model::ClassifierModel;
pub use synthetic::{generate_rater_matrix, generate_synthetic, RaterPoolSpec, SyntheticData, SyntheticSpec};
pub use temperature::{apply_temperature, fit_temperature, TemperatureObjective};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};
