//! Experiment grid execution, aggregation, reports and acceptance checks.

mod check;
mod config;
mod report;
mod suite;
mod summary;

pub use check::{check_acceptance, load_criteria, parse_criteria, render_verdicts, Check, Verdict};
pub use config::{DatasetSource, ExperimentConfig, OracleOverrides, OracleSource};
pub use report::{
    parse_runs_csv, parse_runs_jsonl, parse_summary_csv, report, runs_csv, runs_jsonl, summary_csv, summary_table,
    Format,
};
pub use suite::{
    cells, fingerprint, latest_ok, load_dataset, load_results, oracle_label, results_path, run_cell, run_suite,
    run_suite_with, Cell, RunResult,
};
pub use summary::{lookup, median, population_std, summarize, SummaryRow, ZERO_SHOT};
