pub mod backend;
pub mod render;
pub mod synth;

pub use backend::{Backend, CliError, CliResult, ExportFormat, Remote};
pub use render::OutputFormat;
