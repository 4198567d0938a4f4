//! Weight decomposition and accelerator cost modelling.

pub mod dataflow;
pub mod dse;
pub mod error;
pub mod matcore;
pub mod perfmodel;
pub mod sxform;
pub mod tensor;
pub mod workload;

pub use dataflow::{DataType, Dataflow, Dim, HardwareConfig, Level, Style};
pub use dse::{optimize, DseResult, Metric, Objective, SearchMode};
pub use error::{Error, Result};
pub use matcore::Matrix;
pub use perfmodel::{AccessCounts, PerfReport};
pub use sxform::{SeForm, SeParams, StorageStats};
pub use tensor::WeightTensor;
pub use workload::{LayerKind, LayerSpec, Workload};
