//! Closed-form performance metrics: covariance, rates, SCNR, FIM/CRB and beampatterns.

mod beamformer;
mod beampattern;
mod fim;
mod mle;
mod rates;
mod scnr;

use thiserror::Error;

pub use beamformer::{transmit_covariance, BeamformerSet};
pub use beampattern::{beampattern, Beampattern};
pub use fim::{crb_from_fim, fim_blocks, fim_matrix, CrbReport, FimBundle};
pub use mle::{mle_mse_oracle, mle_squared_errors};
pub use rates::{noma_order, rsma_rates, scheme_rates, CsiMode, MaScheme, RatesReport};
pub use scnr::{echo_scnr, echo_scnr_with_gains, unit_scnr};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular FIM (smallest eigenvalue {min_eig:e})")]
    SingularFim { min_eig: f64 },
    #[error("instance too large for the MLE oracle: {0}")]
    InstanceTooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
