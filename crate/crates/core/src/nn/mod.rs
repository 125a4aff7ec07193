//! Small dense-network stack: affine layers, batch norm, tanh/sigmoid
//! activations, reverse-mode gradients and minibatch SGD.

mod io;
mod layer;
mod net;
mod train;

use thiserror::Error;

pub use io::{write_floats, Records, MAGIC, VERSION};
pub use layer::{parse_widths, stack, validate_spec, Activation, LayerSpec};
pub use net::{BatchNorm, DenseNet, ForwardCache, Gradients, Layer, LayerGrad, Mode, BN_EPS, BN_MOMENTUM};
pub use train::{mse, train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("network needs at least one layer")]
    EmptySpec,
    #[error("layer {layer} has a zero dimension")]
    ZeroDim { layer: usize },
    #[error("layer {layer} expects {expected} inputs but takes {found}")]
    BrokenChain {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("bad architecture `{0}`, expected comma-separated widths")]
    BadArch(String),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("expected {expected} columns, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("batch norm in training needs at least 2 rows, got {rows}")]
    BatchTooSmall { rows: usize },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
}
