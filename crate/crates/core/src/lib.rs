//! Fairness-aware rate-splitting ISAC: scenario sampling, closed-form sensing and
//! communication metrics, and an SCA/SDR/penalty beamforming optimizer with baselines.

pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod scenario;
pub mod serde_complex;
