//! Tensor ring decomposition and completion by alternating least squares.
//!
//! Layout: every tensor is stored with the first index running fastest, and
//! all modes are 0-based.

mod error;
mod kernel;

pub mod als;
pub mod linalg;
pub mod model;
pub mod tensor;
pub mod tra;

pub use als::{
    build_rows, complete, complete_from, observed_residual, sliced_residual, tt_complete,
    update_core, Completion, Ranks, SolverConfig, SolverReport, SubchainStrategy,
};
pub use error::{Error, Result};
pub use linalg::{lstsq_minnorm, thin_qr, truncated_svd, SvdResult};
pub use model::{
    connect_product, cyclic_shift, left_orthogonalize, left_unfold, right_unfold, storage_params,
    subchain, subchain_slice, tr_entry, tr_full, TRChain, TRCore,
};
pub use tensor::{tensor_permute, DenseTensor, ObservationMask, Shape};
pub use tra::{tra_init, tra_init_ranks, TraConfig};
