//! Configuration, initial conditions, output and run orchestration for the
//! `epmesh` command-line tool.

pub mod config;
pub mod init;
pub mod output;
pub mod sim;
pub mod verify;

pub use config::{load_config, parse_config, ConfigError, IcSpec, SimConfig};
pub use sim::{demo_config, run_simulation, RunSummary, SimError};
