//! Stationarity and dependence diagnostics, and feature screening.

mod acf;
mod adf;
mod consensus;
mod lasso;
mod mi;
mod screen;

pub use acf::{acf_pacf, AcfResult};
pub use adf::{adf_test, critical_value, AdfResult};
pub use consensus::{consensus, consensus_from_lists, write_consensus_csv, ConsensusRow};
pub use lasso::{lasso_path, lambda_grid, lambda_max, LassoPath};
pub use mi::{equal_frequency_bins, mutual_information};
pub use screen::{
    screen_features, write_rankings_csv, ScreenParams, ScreenResult, METHODS,
};

pub const DEFAULT_MI_BINS: usize = 16;
pub const DEFAULT_TOP_K: usize = 15;
pub const DEFAULT_CONSENSUS_THRESHOLD: f64 = 0.6;
