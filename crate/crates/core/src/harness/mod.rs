//! Monte Carlo harness: trial worlds, metrics, campaigns and result files.

mod campaign;
mod metrics;
pub mod plot;
mod report;
mod world;

pub use campaign::{
    evaluate, receiver_config, run_campaign, run_trial, score, summarize, Campaign, CampaignSpec,
    PointSummary, TrialRecord, MIN_ERROR_EVENTS, Z95,
};
pub use metrics::{activity_error, bler, channel_nmse, nmse_db, NmseSupport, NMSE_FLOOR_DB};
pub use report::{
    read_records_jsonl, read_results_csv, write_campaign, write_records_jsonl, write_results_csv,
    ResultRow,
    RESULTS_HEADER,
};
pub use world::{generate_world, trial_rng, World};
