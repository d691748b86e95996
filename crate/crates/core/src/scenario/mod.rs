//! Physical scenario: array geometry, user channels with bounded CSI error, and targets.

mod channel;
mod config;
mod steering;
mod targets;

pub use channel::{sample_csi_error, sample_rician_channel, standard_complex_normal, UserChannel};
pub use config::{ConfigError, Profile, SystemConfig};
pub use steering::{ula_steering, ula_steering_derivative};
pub use targets::{build_scenario, default_target_angles, default_user_angles, Scenario, ScenarioError, TargetSet};
