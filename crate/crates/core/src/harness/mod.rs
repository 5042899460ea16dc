//! Training, evaluation, architecture comparison and the data pipeline
//! feeding them.

mod baseline;
mod config;
mod history;
mod metrics;
mod pipeline;
mod train;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::dataset::DatasetError;
use crate::imaging::ImagingError;
use crate::kv::KvError;
use crate::models::ModelError;
use crate::nn::NnError;

pub use baseline::{downsample, nearest_centroid_accuracy};
pub use config::TrainConfig;
pub use history::{EpochRecord, TrainHistory, HISTORY_HEADER};
pub use metrics::{
    parse_prediction_log, prediction_log, write_prediction_log, Metrics, PredictionRecord, PREDICTION_LOG_HEADER,
};
pub use pipeline::{build_split, preprocess_items, split_from_dataset, PipelineConfig};
pub use train::{compare, compare_table, evaluate, train, CompareRow, EvalReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("nothing to evaluate")]
    EmptyEval,
    #[error("loss became {value} at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize, value: f64 },
    #[error("bad train config: {0}")]
    BadConfig(String),
    #[error("compare needs at least two architectures, got {0}")]
    TooFewArchs(usize),
    #[error("preprocessing {source_id}: {source}")]
    Preprocess { source_id: String, source: ImagingError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("config: {0}")]
    Kv(#[from] KvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
