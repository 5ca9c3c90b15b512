//! Seeded experiment sweeps with CSV and JSON output.
//!
//! Repetition `r` of an experiment with seed `s` draws all of its randomness
//! from `rep_seed(s, r)`, so a sweep gives the same records whatever the
//! number of workers or the order in which repetitions finish.

pub mod config;
pub mod output;
pub mod record;
pub mod run;

pub use config::{
    BaselineConfig, BoundTableConfig, Experiment, ExperimentConfig, OcCdfConfig, OcConfig, ReachConfig, VolumeBox,
};
pub use output::{csv_files, render_summary, summary_json, write_outputs};
pub use record::{LevelRecord, RunRecord};
pub use run::{resolve_threads, run_experiment, summarize, Aggregate, MethodSummary, RunOutput, THREADS_ENV};
