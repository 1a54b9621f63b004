//! Ranking metrics, down-sampling validation and the upper-bound simulation.

mod metrics;
mod montecarlo;
mod simulation;

pub use metrics::{average_precision_at_k, reciprocal_rank_at_k};
pub use montecarlo::{
    load_labels, mc_validate, mc_validate_with, write_eval_csv, write_labels, EvalReport, LabeledQuery, McConfig,
    McSummary, QueryReport, Ranker,
};
pub use simulation::{plot_series, simulate_bounds, write_bounds_csv, BoundRow, PlotSeries, SimSpec, System};
