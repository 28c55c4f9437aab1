//! Max-min secrecy-rate design for full-duplex multiuser systems with two
//! user groups, fractional time allocation and artificial noise.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod conic;
pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod outage;
pub mod path_following;
pub mod rates;
pub mod scenario;
pub mod surrogates;

pub use channel::{draw_channels, path_loss_db, place_users, ChannelSet, Instance, Topology};
pub use config::{noise_power_watts, SystemConfig};
pub use design::{DesignPoint, GroupDesign};
pub use error::{Error, Result};
pub use rates::{secrecy_rates, RateReport};
pub use scenario::{Mode, Scenario};
pub use outage::{empirical_outage, OutageReport};
pub use path_following::{run, RunOutput, SolveReport, SolverOptions};
pub use harness::{run_experiment, ExperimentSpec, ResultRow};
