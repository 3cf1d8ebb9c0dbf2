//! From-scratch recurrent network with a NALU output head.
//!
//! [`RnnNaluModel`] maps per-step `(speed, yaw_rate, dt)` features to a
//! per-step planar displacement. Training is plain per-sequence BPTT with
//! Adam or SGD and global-norm clipping; [`grad_check`] verifies the
//! analytic gradients against central differences.

mod extrapolation;
mod gradcheck;
mod model;
mod nalu;
mod persist;
mod rnn;
mod softmax;
mod train;

pub use extrapolation::{compare_extrapolation, ExtrapolationReport, ExtrapolationSetup, TanhHead};
pub use gradcheck::{grad_check, grad_check_report};
pub use model::{
    Displacement, ModelGrads, Normalization, RnnNaluModel, SequenceCache, StepFeatures, DEFAULT_HIDDEN,
    INPUT_DIM, OUTPUT_DIM,
};
pub use nalu::{NaluCache, NaluCell, NaluGrads, DEFAULT_EPS};
pub use persist::{ModelFile, MODEL_FORMAT_VERSION};
pub use rnn::RnnCell;
pub use softmax::{argmax, softmax};
pub use train::{train, train_with_rng, Optimizer, Sequence, TrainConfig};
