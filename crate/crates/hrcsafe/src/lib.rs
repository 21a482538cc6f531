//! Config-driven front end for `hrcsafe-core`: safety reports, collision
//! heatmaps, pipeline simulations, end-to-end report bundles and the
//! brute-force validator suite.

use std::path::Path;

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;
pub mod units;

pub use commands::{cmd_heatmap, cmd_oracle, cmd_report, cmd_safety, cmd_simulate, Run};
pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(#[from] hrcsafe_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

/// Independent seed for stream `(a, b)` of a run (splitmix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
