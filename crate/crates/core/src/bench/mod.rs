//! Benchmark harness: multi-split runs, degree buckets, random search,
//! compatibility heatmaps and timing.

mod config;
mod degree;
mod heatmap;
mod report;
mod run;
mod search;
mod timing;

pub use config::{ModelKind, RunConfig};
pub use degree::{degree_buckets, degree_report, BucketStat, DegreeReport};
pub use heatmap::{cm_csv, cm_svg, cmd_cm, CmMode, CmOutput, ANNOTATE_MAX_CLASSES};
pub use report::{cmd_bench, format_cell, mean_std, select_splits, BenchReport, DEGREE_BUCKETS};
pub use run::{run_model, split_seed, ModelRun};
pub use search::{cmd_search, sample_trials, SearchResult, SearchSpace, Trial};
pub use timing::{scaling_check, timing_of, ScalingReport, TimingReport};
