//! Config-driven experiment batteries: one training run per seed, results
//! persisted as line-delimited JSON plus a summary, and plot-ready artifacts.

mod battery;
mod config;
mod plots;

pub use battery::{
    build_sequence, load_buffer, load_results, prepare_data, run_battery, run_seed, save_buffer,
    save_results, seed_dir, Aggregate, MeanStd, PreparedData, ResultsRecord, RunMetrics, SeedRun,
    RUNS_FILE, SUMMARY_FILE,
};
pub use config::{
    parse_config, parse_config_str, DataConfig, ExperimentConfig, Overrides, SplitConfig, TwinSource,
};
pub use plots::emit_plots;
