//! The six built-in experiments, multi-seed runs, and comparison reports.

mod config;
mod plot;
mod run;

pub use config::{
    builtin_experiment, mini_instance, reference_fill_rate, ExperimentConfig, BOARD_SETUPS, PIECE_FOOTPRINTS,
    PIECE_HEIGHTS, PIECE_QUANTITIES, REFERENCE_FILL_RATES, UNIFORM_HEIGHT,
};
pub use plot::{boards_svg, line_chart_svg, Series};
pub use run::{
    aggregate, checkpoint_file_name, heuristic_file_stem, learning_curves_svg, load_report, log_file_name, mean_std,
    read_log, run_experiment, run_heuristics, summary_csv, summary_table, train_seed, write_report_files, EvalPoint,
    RunOptions, RunReport, SeedRun, SummaryRow, METRICS, SUMMARY_CSV_HEADER,
};
