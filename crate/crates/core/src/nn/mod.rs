//! A small deterministic classifier trainer: two reference architectures,
//! hand-written backpropagation, and SGD with momentum.

mod checkpoint;
mod gradcheck;
mod kernels;
mod model;
mod params;
mod spec;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointHeader,
};
pub use gradcheck::{
    finite_diff_check, finite_diff_check_with, relative_error, small_cnn1d, small_mlp,
    GradCheckOptions, GradCheckReport,
};
pub use model::{
    argmax, batch_loss, cross_entropy, forward, loss_and_grad, softmax, Output, PROB_FLOOR,
};
pub use params::{init_params, Parameters};
pub use spec::{conv_out_len, Arch, ModelSpec, TensorInfo, TrainConfig};
pub use train::{predict_all, train, train_epoch, Examples, TrainState};
