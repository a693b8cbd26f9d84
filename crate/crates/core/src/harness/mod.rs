//! Synthetic classification benchmark for the invariance methods.

mod dataset;
mod experiment;
mod mlp;

pub use dataset::{synth_dataset, template_point, Dataset, DatasetSpec, TEMPLATES};
pub use experiment::{
    dataset_for, evaluate, ordering_check, run_experiment, run_single, seed_means, stream, train,
    Enforcer, ExperimentConfig, ExperimentResults, LossCurve, MeanRecord, Method, OrderingCheck,
    Record,
};
pub use mlp::{softmax, Gradients, Layer, LayerJson, MlpJson, MlpModel, Sgd};
