//! Experiment harness for the broken-FEEC Hodge-Laplacian: configuration,
//! sweeps, property verification and CSV/JSON reporting.

pub mod cases;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{AlphaPolicy, ExperimentConfig, Kind, Mask};
pub use error::{HarnessError, Result};
pub use output::{write_outputs, RunOutput};

/// Runs the experiment described by `config`. Dense kernels run
/// single-threaded so results are bit-identical across runs; sweep points
/// are parallel instead.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    match config.kind {
        Kind::SourceConvergence => run::run_convergence(config),
        Kind::EigenStudy => run::run_eigen_study(config),
        Kind::Verify => verify::run_verify(config),
        Kind::DecomposeDemo => run::run_decompose(config),
    }
}
