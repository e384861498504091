// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised across the numerical and simulation layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("derivative order {requested} exceeds supported maximum {max}")]
    OrderUnsupported { requested: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e}")]
    AccuracyNotReached { estimate: f64, error: f64 },

    #[error("seminorm ||.||_({k},{l}) diverges (still growing at radius {radius:e})")]
    DivergentSeminorm { k: usize, l: usize, radius: f64 },

    #[error("L2 norm diverges: {0}")]
    DivergentNorm(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("Robin routes disagree: direct {direct:e} vs reduction {reduction:e}")]
    RouteMismatch { direct: f64, reduction: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot step backwards from t={current} to t={target}")]
    Ordering { current: f64, target: f64 },

    #[error("state space of {sites} sites exceeds the cap of {cap}")]
    StateSpace { sites: usize, cap: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("time grid too coarse: trapezoid error {error_estimate:e} exceeds half CI {half_ci:e}")]
    Resolution { error_estimate: f64, half_ci: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
