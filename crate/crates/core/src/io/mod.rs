//! Run configurations, curve files, reports and plots.

mod config;
mod curves;
mod pipeline;
mod report;
mod svg;

pub use config::{NetworkSpec, Problem, RunConfig, TurbulenceInitial};
pub use curves::{format_value, read_csv, write_csv, CurveSet};
pub use pipeline::{execute, execute_filtered, run, write_artifacts, Execution, OutputFormat, RunOutput};
pub use report::{ErrorRecord, RunReport, RunStatus};
pub use svg::{render_svg, write_svg, PlotStyle};
