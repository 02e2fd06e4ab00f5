//! Training, decoding, recovery scoring and the two experiments built on
//! them: sample-complexity sweeps and the flatness landscape probe.

mod adam;
mod landscape;
mod recovery;
mod report;
mod spec;
mod sweep;
mod train;

pub use adam::Adam;
pub use landscape::{landscape_probe, multi_restart, sv_spread_max, LandscapeSummary, MultiRestart, RunSummary};
pub use recovery::{argmax, decode, evaluate, evaluate_decoded, Decoded, RecoveryReport};
pub(crate) use landscape::json_num;
pub use report::train_result_json;
pub use spec::TableSpec;
pub use sweep::{
    aggregate, fmt17, mask_seed, read_csv, run_job, run_jobs, sample_mask, scan_threshold, sweep_jobs, sweep_sample_complexity, thresholds,
    write_csv, Aggregate, MGrid, Method, RowKey, SweepJob, SweepOutput, SweepRow, CSV_HEADER, RECOVERY_THRESHOLD,
};
pub use train::{train, TrainConfig, TrainResult, TrajectoryPoint};
