//! Dataset generation, batch evaluation of planners and CSV reporting.

mod dataset;
mod eval;

pub use dataset::{dataset_path, generate_dataset, DatasetFile, DatasetSpec, DatasetVersion};
pub use eval::{
    compare_rewards, evaluate, evaluate_dataset, write_eval_csv, write_raw_csv, write_reward_csv,
    EpisodeRecord, EvalRecord, EvalReport, EvalSpec, PlannerEntry, RewardRow, EVAL_CSV_HEADER,
    MAX_FAILURE_FRACTION, MAX_RAW_ROWS, RAW_CSV_HEADER, REWARD_CSV_HEADER,
};
