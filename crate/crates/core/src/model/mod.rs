//! Spatial-temporal graph encoder, projection and regression heads.

mod adjacency;
mod checkpoint;
mod encoder;
mod heads;
pub mod layers;
mod ri;
mod state;

pub use adjacency::{
    adjacency_with_loops, normalized_adjacency, PartitionStrategy, CENTRIFUGAL_PARTITION, CENTRIPETAL_PARTITION,
    SELF_PARTITION,
};
pub use checkpoint::{
    checkpoint_id, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use checkpoint::write_atomic;
pub use encoder::{Encoder, EncoderCache, EncoderConfig, StgcnBlock};
pub use heads::{ProjectionConfig, ProjectionHead, RegressionCache, RegressionHead, RegressionHeadConfig};
pub use layers::Module;
pub use ri::{ri_batch, ri_descriptor, ri_frames};
pub use state::{stack_sequences, Head, HeadMode, HeadSpec, ModelState, TrainingMeta};
