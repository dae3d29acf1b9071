//! Experiment harness: config parsing, seeded runs, comparisons, ablation
//! sweeps, checkpoint bundles and SVG plots.

mod ablate;
mod checkpoint;
mod compare;
pub mod config;
mod csv;
mod plot;
mod runner;

pub use ablate::{ablation_matrix, AblationAxis, AblationCell};
pub use checkpoint::{load_agent, save_agent, CheckpointMeta};
pub use compare::{compare, load_method, mean_std, median, Comparison, LoadedRun, MethodStats};
pub use config::{ConfigMap, RunConfig};
pub use csv::{read_numeric_csv, CsvWriter};
pub use plot::plot_run;
pub use runner::{run, RunSummary};

#[cfg(test)]
mod tests;
