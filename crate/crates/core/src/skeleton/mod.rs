//! Skeleton sequences, labels, dataset adapters and splitting.

mod canonical;
mod dataset;
mod graph;
mod ingest;
mod sequence;
mod split;

pub use canonical::{export_canonical, load_canonical, CanonicalMeta, ManifestRecord, ManifestSummary};
pub use dataset::{Assessment, Dataset, ExerciseType, Label, LabeledSample, CLINICAL_SCORE_MAX};
pub use graph::SkeletonGraph;
pub use ingest::{ingest, DatasetKind};
pub use sequence::{repair_non_finite, resample_frames, resample_temporal, SkeletonSequence};
pub use split::{split, split_indices, Fold, SplitOptions, SplitScheme};

/// Default number of frames every sequence is re-sampled to.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 64;
