//! Text formats: model definitions, CSV tables and analysis reports. Every
//! format starts with a versioned `# onestep … v1` comment line.

pub mod model_file;
pub mod report;
pub mod table;

pub use model_file::{load_model_file, parse_model, parse_scheme, render_model, ModelFileError};
pub use report::{AnalysisReport, ReportEntry, ReportError};
pub use table::{read_ensemble, read_trajectory, write_ensemble, write_trajectory, TableError};
