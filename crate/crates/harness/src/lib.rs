//! Experiment harness for tensor ring completion: file formats, images,
//! masks, synthetic data, reshaping, metrics and repeated experiments.

pub mod error;
pub mod experiment;
pub mod image;
pub mod io;
pub mod metrics;
pub mod reshape;
pub mod sampling;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentRecord, ExperimentSpec, SolverSpec, Source};
pub use image::{load_image, save_image};
pub use io::{load_chain, load_tensor, save_chain, save_tensor};
pub use metrics::{generalization_error, recovery_error};
pub use reshape::reshape_plan;
pub use sampling::{sample_mask, synthetic_tr};
