use super::{train, TrainConfig, TrainData, TrainError, TrainReport};
use crate::autodiff::Tensor;
use crate::data::{default_log_flags, DataError, Dataset, Preprocessor, Split, SplitPlan};
use crate::metrics::{ErrorReport, MetricsError};
use crate::nn::{Checkpoint, Metadata, Network, NetworkConfig, NnError, PreprocessingStats};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A dataset cut into partitions, with scalers fitted on the training rows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: Split,
    pub preprocessing: PreprocessingStats,
    pub data: TrainData,
    pub test: Dataset,
}

pub fn prepare(dataset: &Dataset, plan: &SplitPlan) -> Result<Prepared, ExperimentError> {
    let split = plan.split(dataset.len())?;
    let train_rows = dataset.select(&split.train);
    let fit = |names: &[String], t: &Tensor| Preprocessor::fit(t, &default_log_flags(names, t));
    let input = fit(&dataset.input_columns, &train_rows.x)?;
    let output = fit(&dataset.output_columns, &train_rows.y)?;
    let val = dataset.select(&split.val);
    let data = TrainData {
        x_train: input.apply(&train_rows.x)?,
        y_train: output.apply(&train_rows.y)?,
        x_val: input.apply(&val.x)?,
        y_val: output.apply(&val.y)?,
    };
    Ok(Prepared {
        test: dataset.select(&split.test),
        split,
        preprocessing: PreprocessingStats {
            input_columns: dataset.input_columns.clone(),
            output_columns: dataset.output_columns.clone(),
            input,
            output,
        },
        data,
    })
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Best-validation weights with their preprocessing and provenance.
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    /// Errors on the test split in physical units.
    pub test_report: ErrorReport,
    pub prepared: Prepared,
}

/// Splits, fits the scalers, trains a freshly initialised network and
/// evaluates the best weights on the test rows.
pub fn run_experiment(
    dataset: &Dataset,
    network: &NetworkConfig,
    config: &TrainConfig,
    plan: &SplitPlan,
    threshold: f64,
) -> Result<ExperimentResult, ExperimentError> {
    let prepared = prepare(dataset, plan)?;
    let net = Network::init(network, config.seed)?;
    let trained = train(net, &prepared.data, config)?;
    let checkpoint = Checkpoint {
        network: trained.best,
        preprocessing: Some(prepared.preprocessing.clone()),
        metadata: Metadata {
            seed: config.seed,
            epochs: config.epochs,
            dataset_hash: Some(dataset.sha256()),
            case: None,
            best_epoch: Some(trained.report.best_epoch),
            best_val_loss: Some(trained.report.best_val_loss),
            split: Some(*plan),
        },
    };
    let test_report = evaluate(&checkpoint, &prepared.test, threshold)?;
    Ok(ExperimentResult {
        checkpoint,
        report: trained.report,
        test_report,
        prepared,
    })
}

/// Error report of a checkpoint on a dataset, in physical units.
pub fn evaluate(checkpoint: &Checkpoint, data: &Dataset, threshold: f64) -> Result<ErrorReport, ExperimentError> {
    let pred = checkpoint.predict_physical(&data.x)?;
    Ok(ErrorReport::compute(&data.output_columns, &data.y, &pred, threshold)?)
}
