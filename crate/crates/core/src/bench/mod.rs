//! Gaussian parameter-recovery sweep: data generation, per-method training,
//! CSV results and the error-vs-dimension chart.

mod data;
mod plot;
mod run;
mod spec;

pub use data::{generate_dataset, generate_dataset_with_latent};
pub use plot::{emit_plot, render_svg};
pub use run::{
    aggregate, final_elbo, gaussian_nll, gaussian_objective, read_aggregate_csv, read_results_csv, run_experiment, thread_pool,
    train_gaussian, worker_threads, write_aggregate_csv, write_results_csv, AggregateRow, ExperimentResult, ResultRow,
    AGGREGATE_HEADER, RESULT_HEADER,
};
pub use spec::{gaussian_train_defaults, parse_kv, parse_tempering, ExperimentSpec, Method, MethodSpec, Settings};
