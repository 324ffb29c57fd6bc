//! Training, evaluation metrics, convergence-rate fits and the preset sweeps.

mod fit;
mod metrics;
mod presets;
mod report;
mod run;
mod sweep;
mod train;

pub use fit::{fit, fit_exponential, fit_power_law, fit_windowed, linear_fit, FitKind, RateFit};
pub use metrics::{generalization_gap, mean_std, median, trimmed_mse, trimmed_test_mse, GapSummary};
pub use report::{config_hash, ExperimentReport, HistoryPoint};
pub use train::{evaluate, train, BatchMode, LrSchedule, TrainConfig};
pub use run::{run_point, DataCache, DataSpec, ExtraTest, ModelSpec, PreparedData, RunOutcome, RunSpec, TrainedModel};
pub use sweep::{
    plot_script, run_plan, sweep_fit, write_fits_csv, write_summary_csv, PointSummary, PresetPlan, PresetReport, SeriesPlan,
    SeriesSummary, SweepPlan, SweepSummary, MIN_FIT_WINDOW,
};
pub use presets::{preset_plan, run_preset, Overrides, PRESET_NAMES};
