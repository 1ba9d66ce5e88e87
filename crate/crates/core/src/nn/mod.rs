//! Encoder-decoder mask estimation network with a hand-written backward pass.

mod arch;
mod data;
mod model;
mod network;
pub mod ops;
mod tensor;
mod train;

pub use arch::{ArchitectureConfig, BatchNormPlacement, ConvLayerSpec, MASK_BINS};
pub use data::{audio_features, make_batch, mask_from_network, mask_to_network, video_features, Standardizer, TrainingSegment};
pub use model::{training_segment, utterance_segments, Checkpoint, NetworkEstimator, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{backward, forward, forward_with_pattern, init_parameters, ActivationPattern, mask_mse, BnRunning, ForwardCache, Mode, NetworkParameters, SegmentBatch};
pub use ops::ConvGeometry;
pub use tensor::Tensor;
pub use train::{
    adam_step, evaluate, loss_and_gradients, next_lr, run_epochs, train, AdamConfig, AdamState, EpochRecord, LrReference, TrainOutcome,
    TrainingConfig, TrainingLog,
};
