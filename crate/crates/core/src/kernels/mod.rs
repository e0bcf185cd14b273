//! Forward/backward kernels for every non-recurrent layer.
//!
//! Each forward returns its output together with a typed cache; the matching
//! backward consumes that cache by value, so a cache cannot be replayed.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod gap;
mod pool;

pub use activation::{activation_backward, activation_forward, sigmoid_scalar, ActCache, Activation};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormState, BnCache, BnGrads};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_param_count, ConvCache, ConvGrads};
pub use dense::{dense_backward, dense_forward, dense_param_count, DenseCache, DenseGrads};
pub use dropout::{dropout_backward, spatial_dropout, spatial_dropout_with_mask, DropoutCache};
pub use gap::{global_average_pool, global_average_pool_backward, GapCache};
pub use pool::{maxpool1d, maxpool1d_backward, PoolCache};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}
