pub mod dsp;
pub mod error;
pub mod functions;
pub mod graph;
pub mod model_file;
pub mod mvn;
pub mod oracle;
pub mod ranking;

pub use error::{CdnError, Result};
