//! Configuration, trace files and CSV result tables.

mod config;
mod report;
mod trace;

pub use config::{MonteCarloSection, RunConfig, SweepSection};
pub use report::{
    bound_check_table, contour_field_table, contour_lines_table, crb_table, estimate_table,
    mitigation_table, read_table, staircase_table, sweep_table, Cell, CsvTable, Provenance,
};
pub use trace::{export_trace, import_trace, parse_trace, render_trace};
