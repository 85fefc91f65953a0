use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry is not invertible: det = {det:.3e} at x' = ({x:.4}, {y:.4}), x3 = {x3:.4e}")]
    NonInvertible { det: f64, x: f64, y: f64, x3: f64 },

    #[error("geometry amplitude {fh} exceeds admissible maximum {fh_max}")]
    InadmissibleAmplitude { fh: f64, fh_max: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("force density has nonzero mean {mean:.3e} (tolerance {tol:.3e})")]
    NonzeroMean { mean: f64, tol: f64 },

    #[error("force density has nonzero first moments ({m1:.3e}, {m2:.3e}); the loaded functional is unbounded below for R = I")]
    NonzeroMoments { m1: f64, m2: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("cannot project the zero matrix onto SO(3)")]
    ZeroMatrix,

    #[error("non-finite energy at iteration {iteration}; iterate dumped to {}", dump.display())]
    Diverged { iteration: usize, dump: PathBuf },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
