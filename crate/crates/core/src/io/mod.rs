//! Configuration, presets and result files.

pub mod config;
pub mod curves;
pub mod vtk;

pub use config::{
    parse_config, parse_config_str, preset, ConfigError, MeshSource, RunConfig, PRESETS,
};
pub use curves::{validate_curves, write_curves, write_diagnostics};
pub use vtk::write_vtk;
