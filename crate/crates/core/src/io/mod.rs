//! File formats and reporting: INI-style scenario configs, CSV traces, SVG
//! trajectory plots and run summaries.

pub mod config;
pub mod csv;
pub mod plot;
pub mod report;

pub use config::{parse_config, parse_config_str, serialize_config};
pub use csv::{emit_csv, read_csv, read_csv_str, write_csv};
pub use plot::{emit_plot, render_svg, PlotOverlay};
pub use report::RunReport;
