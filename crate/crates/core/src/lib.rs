//! Preparation of irregularly sampled, partially observed time series for
//! machine learning: UEA/UCR `.ts` archives and the PhysioNet 2012/2019
//! challenges become padded `(n, s, c)` tensors with targets, lengths,
//! optional masks and time deltas, imputation, standardisation and
//! reproducible stratified splits.

pub mod batching;
pub mod cache;
pub mod dataset;
pub mod error;
pub mod export;
pub mod master;
pub mod par;
pub mod physionet;
pub mod pipeline;
pub mod rng;
pub mod splits;
pub mod stats;
pub mod tensor;
pub mod tensor_file;
pub mod transforms;
pub mod ts_format;

pub use batching::{batches, pack, sort_by_length, unpack, Batch, PackedBatch};
pub use dataset::{Dataset, TargetKind};
pub use error::{Error, Result};
pub use master::MasterData;
pub use par::Parallelism;
pub use pipeline::{build, build_with, DatasetKind, PipelineConfig};
pub use splits::{Split, SplitAssignment, SplitSpec};
pub use tensor::{ChannelKind, ChannelLayout, PaddedTensor3};
pub use transforms::{ImputeMethod, MissingSpec};
