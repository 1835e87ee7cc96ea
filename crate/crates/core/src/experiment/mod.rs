//! Configured experiment runs: each mode turns a config into rows, verdicts
//! and CSV tables.

mod config;
mod matrices;
mod report;
mod runs;
mod scans;

use thiserror::Error;

pub use config::{parse_config, parse_config_as, theorem_b_nu_bound, ExperimentConfig, Mode};
pub use matrices::{companion, continuity_t3, default_t3, default_t4, strong_ph_margin, strong_ph_search, SearchHit};
pub use report::{
    write_orbit_stats_csv, write_outputs, write_plot_dat, write_report_csv, OrbitBlock, Outcome, ReportRow,
    RowStatus, RunReport,
};
pub use runs::{
    run, run_conditions, run_robustness, run_spectrum, run_theorem_a, run_theorem_b, robustness_system,
    THEOREM_A_CONDITIONS, THEOREM_B_CONDITIONS,
};
pub use scans::{bunching_log, run_bound_lab, run_continuity_scan, run_partition};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Validation(String),
    /// A `t = 0` control row disagreed with the linear spectrum.
    #[error("control row failed: {0}")]
    ControlFailed(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// 4 for configuration problems, 2 for a failed control, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Validation(_) => 4,
            ExperimentError::ControlFailed(_) => 2,
            _ => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical_from!(
    crate::lattice::LatticeError,
    crate::geometry::GeometryError,
    crate::cocycle::CocycleError,
    crate::partition::PartitionError,
    crate::adapted::AdaptedError
);
