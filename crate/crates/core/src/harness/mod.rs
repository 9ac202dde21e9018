//! Experiment configuration, the training loop and its output files.

mod config;
mod experiment;
mod metrics;

pub use config::{
    DatasetSpec, ExperimentConfig, PhyConfig, Scheme, TestHooks, DEFAULT_BETA, MAX_DEFAULT_FRAMES,
};
pub use experiment::{run_experiment, summary_file, Experiment, RoundOutcome, RunState};
pub use metrics::{
    read_metrics, read_summary, scheme_label, summary_path, write_plot_data, write_summary,
    MetricsWriter, RoundMetrics, SummaryRow,
};
